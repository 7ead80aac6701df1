#include "immersia/suites.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "immersia/error.hpp"

namespace immersia {

std::vector<CorpusShape> analytic_corpus() {
  std::vector<CorpusShape> out;
  auto add = [&](std::string name, ShapeSpec s, int res, int mult, bool open) {
    s.n = 4;
    out.push_back({std::move(name), s, res, mult, open});
  };
  ShapeSpec s;
  s.kind = ShapeKind::round_sphere;
  add("round_sphere", s, 17, 1, false);
  s.codim = 2;
  add("round_sphere_codim2", s, 17, 1, false);
  s = {};
  s.kind = ShapeKind::ellipsoid;
  s.semi_axes = {1.0, 0.8, 1.2, 0.9, 1.1};
  add("ellipsoid", s, 17, 1, false);
  s = {};
  s.kind = ShapeKind::clifford_torus;
  add("clifford_torus", s, 33, 1, false);
  s = {};
  s.kind = ShapeKind::graph_perturbation;
  s.base = ShapeKind::round_sphere;
  add("perturbed_sphere", s, 17, 1, false);
  s = {};
  s.kind = ShapeKind::dumbbell;
  s.neck_width = 0.2;
  add("dumbbell", s, 17, 1, false);
  s = {};
  s.kind = ShapeKind::double_cover_sphere;
  add("double_cover_sphere", s, 17, 2, false);
  s = {};
  s.kind = ShapeKind::plane;
  add("plane", s, 33, 1, true);
  s = {};
  s.kind = ShapeKind::graph_perturbation;
  s.base = ShapeKind::plane;
  s.frequency = 2.0;
  add("perturbed_plane", s, 33, 1, true);
  return out;
}

const CorpusShape& corpus_shape(const std::string& name) {
  static const std::vector<CorpusShape> corpus = analytic_corpus();
  for (const auto& c : corpus)
    if (c.name == name) return c;
  throw Error(ErrorCode::invalid_shape, "unknown corpus shape: " + name);
}

BoundaryDistance::BoundaryDistance(const PushforwardMeasure& mu) {
  std::vector<double> pts;
  for (std::size_t i = 0; i < mu.size(); ++i)
    if (mu.boundary[i]) pts.insert(pts.end(), mu.position(i), mu.position(i) + mu.d);
  empty_ = pts.empty();
  if (!empty_) index_ = SpatialIndex(std::move(pts), mu.d);
}

double BoundaryDistance::operator()(const double* x) const {
  if (empty_) return kInfinity;
  double d2 = 0.0;
  index_.nearest(x, &d2);
  return std::sqrt(d2);
}

std::vector<std::size_t> sample_atoms(const PushforwardMeasure& mu, int count, double clearance, std::uint64_t seed) {
  if (mu.size() == 0) throw Error(ErrorCode::invalid_argument, "empty measure");
  const BoundaryDistance bd(mu);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, mu.size() - 1);
  std::vector<std::size_t> out;
  const long limit = 10000L * std::max(1, count);
  for (long tries = 0; static_cast<int>(out.size()) < count; ++tries) {
    if (tries > limit)
      throw Error(ErrorCode::precondition, "no atoms clear of the boundary by " + std::to_string(clearance));
    const std::size_t i = pick(rng);
    if (bd(mu.position(i)) > clearance) out.push_back(i);
  }
  return out;
}

std::vector<InequalityReport> hardy_suite(const PushforwardMeasure& mu, const HardySuiteParams& p) {
  std::vector<double> as = p.a;
  if (as.empty()) as = {0.0, mu.n - 2.0};
  const BoundaryDistance bd(mu);
  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, mu.size() - 1);
  std::vector<InequalityReport> out;
  for (int b = 0; b < p.bumps; ++b) {
    Bump phi;
    phi.radius = p.radius_lo + (p.radius_hi - p.radius_lo) * unit(rng);
    std::size_t c = pick(rng);
    for (int tries = 0; bd(mu.position(c)) <= phi.radius; ++tries) {
      if (tries > 100000) throw Error(ErrorCode::precondition, "no bump support clear of the boundary");
      c = pick(rng);
    }
    phi.center.assign(mu.position(c), mu.position(c) + mu.d);
    const auto inside = mu.index.ball_indices(phi.center.data(), phi.radius);
    std::uniform_int_distribution<std::size_t> pick_in(0, inside.size() - 1);
    const std::size_t o = inside[pick_in(rng)];
    for (double a : as) {
      auto rep = hardy_check(mu, a, phi, mu.position(o), p.tol);
      rep.parameters.emplace_back("bump", b);
      rep.parameters.emplace_back("bump_radius", phi.radius);
      rep.parameters.emplace_back("origin_atom", static_cast<double>(o));
      out.push_back(std::move(rep));
    }
  }
  return out;
}

std::vector<InequalityReport> monotonicity_suite(const PushforwardMeasure& mu, const MonotonicitySuiteParams& p) {
  const BoundaryDistance bd(mu);
  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, mu.size() - 1);
  std::vector<InequalityReport> out;
  for (int s = 0; s < p.samples; ++s) {
    const double rho = p.rho_lo + (p.rho_hi - p.rho_lo) * unit(rng);
    const double sigma = rho * (p.sigma_lo + (p.sigma_hi - p.sigma_lo) * unit(rng));
    // the ramp reaches half a cell past rho
    const double clearance = rho + mu.cell_max;
    std::size_t c = pick(rng);
    for (int tries = 0; bd(mu.position(c)) <= clearance; ++tries) {
      if (tries > 100000) throw Error(ErrorCode::precondition, "no ball clear of the boundary");
      c = pick(rng);
    }
    auto rep = monotonicity_check(mu, mu.position(c), sigma, rho, p.tol);
    rep.parameters.emplace_back("atom", static_cast<double>(c));
    out.push_back(std::move(rep));
  }
  return out;
}

GrowthSuiteResult growth_suite(const PushforwardMeasure& mu, const EnergyAtoms& energy, const GrowthSuiteParams& p) {
  if (p.radii.empty()) throw Error(ErrorCode::invalid_argument, "growth suite needs radii");
  const double rmax = *std::max_element(p.radii.begin(), p.radii.end());
  const auto atoms = sample_atoms(mu, p.points, rmax + mu.cell_max, p.seed);
  std::vector<std::vector<double>> centers;
  for (std::size_t i : atoms) centers.emplace_back(mu.position(i), mu.position(i) + mu.d);
  GrowthSuiteResult res;
  res.reports = volume_growth_check(mu, energy, centers, p.radii);
  res.c_lo = kInfinity;
  res.c_hi = 0.0;
  for (const auto& r : res.reports) {
    res.c_lo = std::min(res.c_lo, r.lhs);
    res.c_hi = std::max(res.c_hi, r.lhs);
  }
  res.spread = res.c_lo > 0 ? res.c_hi / res.c_lo : kInfinity;
  return res;
}

std::vector<InequalityReport> sobolev_suite(const PushforwardMeasure& mu, const SobolevSuiteParams& p) {
  const BoundaryDistance bd(mu);
  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, mu.size() - 1);
  std::vector<Bump> bumps;
  for (int b = 0; b < p.bumps; ++b) {
    Bump phi;
    phi.radius = p.radius_lo + (p.radius_hi - p.radius_lo) * unit(rng);
    std::size_t c = pick(rng);
    for (int tries = 0; bd(mu.position(c)) <= phi.radius; ++tries) {
      if (tries > 100000) throw Error(ErrorCode::precondition, "no bump support clear of the boundary");
      c = pick(rng);
    }
    phi.center.assign(mu.position(c), mu.position(c) + mu.d);
    bumps.push_back(std::move(phi));
  }
  return sobolev_ratio_probe(mu, bumps, p.p, p.q);
}

}  // namespace immersia
