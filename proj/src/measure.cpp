#include "immersia/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "immersia/error.hpp"

namespace immersia {

namespace {

double dist2(const double* a, const double* b, int d) {
  double s = 0.0;
  for (int k = 0; k < d; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

double norm(const double* a, int d) {
  double s = 0.0;
  for (int k = 0; k < d; ++k) s += a[k] * a[k];
  return std::sqrt(s);
}

// atom indices in B(center, r), ascending
std::vector<std::size_t> ball_atoms(const PushforwardMeasure& mu, const double* center, double r) {
  return mu.index.ball_indices(center, r);
}

}  // namespace

double unit_ball_volume(int n) { return std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0); }

double PushforwardMeasure::total() const {
  double s = 0.0;
  for (double w : weight) s += w;
  return s;
}

void PushforwardMeasure::tangent_part(std::size_t i, const double* v, double* out) const {
  const double* T = tangent.data() + i * n * d;
  for (int k = 0; k < d; ++k) out[k] = 0.0;
  for (int a = 0; a < n; ++a) {
    double c = 0.0;
    for (int k = 0; k < d; ++k) c += T[a * d + k] * v[k];
    for (int k = 0; k < d; ++k) out[k] += c * T[a * d + k];
  }
}

double PushforwardMeasure::normal_norm(std::size_t i, const double* v) const {
  double t[kMaxD];
  tangent_part(i, v, t);
  double s = 0.0;
  for (int k = 0; k < d; ++k) s += (v[k] - t[k]) * (v[k] - t[k]);
  return std::sqrt(s);
}

PushforwardMeasure pushforward(const SampledImmersion& imm, DerivativeMode mode, Execution exec) {
  PushforwardMeasure mu;
  const int n = imm.n, d = imm.d;
  mu.n = n;
  mu.d = d;
  const std::size_t total = imm.node_count();
  mu.pos.resize(total * d);
  mu.weight.resize(total);
  mu.cell.resize(total);
  mu.tangent.resize(total * n * d);
  mu.H.resize(total * d);
  mu.II_norm.resize(total);
  mu.boundary.assign(total, 0);
  mu.chart.resize(total);
  mu.node.resize(total);
  mu.spacing = INFINITY;
  std::size_t offset = 0;
  for (int c = 0; c < static_cast<int>(imm.charts.size()); ++c) {
    const auto& grid = imm.charts[c].grid;
    visit_geometry(imm, c, false, mode, exec, [&](std::size_t i, const PointGeometry& G) {
      const std::size_t a = offset + i;
      const MultiIndex m = grid.multi(i);
      for (int k = 0; k < d; ++k) {
        mu.pos[a * d + k] = G.pos[k];
        mu.H[a * d + k] = G.H[k];
      }
      mu.weight[a] = grid.cell_weight(m) * G.sqrt_det;
      mu.cell[a] = std::pow(grid.cell_volume() * G.sqrt_det, 1.0 / n);
      mu.II_norm[a] = std::sqrt(std::max(0.0, G.II_norm2));
      mu.boundary[a] = grid.is_boundary(m) ? 1 : 0;
      mu.chart[a] = c;
      mu.node[a] = i;
      // Gram-Schmidt on the coordinate tangents
      double* T = mu.tangent.data() + a * n * d;
      for (int j = 0; j < n; ++j) {
        double v[kMaxD];
        for (int k = 0; k < d; ++k) v[k] = G.tangent[j][k];
        for (int pass = 0; pass < 2; ++pass)
          for (int b = 0; b < j; ++b) {
            double s = 0.0;
            for (int k = 0; k < d; ++k) s += T[b * d + k] * v[k];
            for (int k = 0; k < d; ++k) v[k] -= s * T[b * d + k];
          }
        const double nv = norm(v, d);
        for (int k = 0; k < d; ++k) T[j * d + k] = v[k] / nv;
      }
    });
    MultiIndex mid{};
    for (int a = 0; a < n; ++a) mid[a] = grid.dims()[a] / 2;
    const Vec p = imm.phi(c, mid);
    for (int a = 0; a < n; ++a) {
      MultiIndex nb = mid;
      nb[a] += 1;
      mu.spacing = std::min(mu.spacing, (imm.phi(c, nb) - p).norm());
    }
    offset += grid.node_count();
  }
  mu.cell_max = total ? *std::max_element(mu.cell.begin(), mu.cell.end()) : 0.0;
  mu.index = SpatialIndex(mu.pos, d);
  // chart-boundary atoms whose image is shared with another node are seams, not boundary
  const double tol = 1e-9 * std::max(1.0, mu.spacing);
  for (std::size_t a = 0; a < total; ++a) {
    if (!mu.boundary[a]) continue;
    bool partner = false;
    mu.index.ball(mu.position(a), tol, [&](std::size_t j, double) { partner = partner || j != a; });
    if (partner) mu.boundary[a] = 0;
  }
  return mu;
}

double ball_fraction(const PushforwardMeasure& mu, std::size_t i, double dist, double r) {
  // ramp in the volume coordinate t^n, unbiased on flat pieces
  const double n = mu.n;
  const double width = n * std::pow(r, n - 1.0) * mu.cell[i];
  return std::clamp((std::pow(r, n) - std::pow(dist, n)) / width + 0.5, 0.0, 1.0);
}

std::vector<std::size_t> ball_support(const PushforwardMeasure& mu, const double* center, double r) {
  std::vector<std::size_t> out;
  mu.index.ball(center, r + 0.5 * mu.cell_max, [&](std::size_t i, double d2) {
    if (ball_fraction(mu, i, std::sqrt(d2), r) > 0.0) out.push_back(i);
  });
  std::sort(out.begin(), out.end());
  return out;
}

double extrinsic_ball_volume(const PushforwardMeasure& mu, const double* center, double r) {
  if (!(r > 0)) throw Error(ErrorCode::invalid_argument, "radius must be > 0");
  double s = 0.0;
  for (std::size_t i : ball_support(mu, center, r))
    s += mu.weight[i] * ball_fraction(mu, i, std::sqrt(dist2(mu.position(i), center, mu.d)), r);
  return s;
}

bool ball_meets_boundary(const PushforwardMeasure& mu, const double* center, double r) {
  bool hit = false;
  mu.index.ball(center, r, [&](std::size_t i, double) { hit = hit || mu.boundary[i]; });
  return hit;
}

DensityResult density_at(const PushforwardMeasure& mu, const double* p, const std::vector<double>& radii) {
  if (radii.empty()) throw Error(ErrorCode::invalid_argument, "density needs at least one radius");
  for (std::size_t i = 1; i < radii.size(); ++i)
    if (!(radii[i] < radii[i - 1])) throw Error(ErrorCode::invalid_argument, "radii must be decreasing");
  DensityResult res;
  const double wn = unit_ball_volume(mu.n);
  for (double r : radii) res.ratios.push_back(extrinsic_ball_volume(mu, p, r) / (wn * std::pow(r, mu.n)));
  if (radii.size() == 1) {
    res.raw = res.ratios.back();
  } else {
    const std::size_t m = radii.size();
    const double r1 = radii[m - 2], r2 = radii[m - 1];
    const double R1 = res.ratios[m - 2], R2 = res.ratios[m - 1];
    // ratio(r) = theta + c r^2
    res.raw = (r1 * r1 * R2 - r2 * r2 * R1) / (r1 * r1 - r2 * r2);
    res.conclusive = std::abs(R1 - R2) <= 0.3;
  }
  res.rounded = static_cast<int>(std::lround(res.raw));
  return res;
}

void InequalityReport::finish(double tol) {
  ratio = rhs > 0 ? lhs / rhs : (lhs > 0 ? INFINITY : 0.0);
  margin_ok = !degenerate && lhs <= rhs * (1.0 + tol);
}

double InequalityReport::param(const std::string& key) const {
  for (const auto& [k, v] : parameters)
    if (k == key) return v;
  throw Error(ErrorCode::invalid_argument, "report has no parameter " + key);
}

InequalityReport monotonicity_check(const PushforwardMeasure& mu, const double* p, double sigma, double rho,
                                    double tol) {
  if (!(sigma > 0 && sigma < rho)) throw Error(ErrorCode::invalid_argument, "need 0 < sigma < rho");
  const int n = mu.n, d = mu.d;
  double mass_s = 0.0, mass_r = 0.0, h_term = 0.0, h_n = 0.0;
  const double coincide = 1e-9 * std::max(1.0, mu.spacing);
  for (std::size_t i : ball_support(mu, p, rho)) {
    const double* x = mu.position(i);
    const double r2 = dist2(x, p, d);
    const double in_r = ball_fraction(mu, i, std::sqrt(r2), rho);
    const double in_s = ball_fraction(mu, i, std::sqrt(r2), sigma);
    const double h2 = [&] {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += mu.H[i * d + k] * mu.H[i * d + k];
      return s;
    }();
    const double w = mu.weight[i];
    mass_r += w * in_r;
    // atoms at p carry an integrable singularity; dropping them only lowers the right side
    if (r2 > coincide * coincide) h_term += w * in_r * h2 / std::pow(r2, 0.5 * (n - 2));
    mass_s += w * in_s;
    h_n += w * in_s * std::pow(h2, 0.5 * n);
  }
  InequalityReport rep;
  rep.degenerate = mass_s == 0.0;
  rep.lhs = mass_s / std::pow(sigma, n);
  const double lead = mass_r / std::pow(rho, n);
  rep.rhs = lead + 0.5 * h_term + std::pow(rep.lhs, (n - 1.0) / n) * std::pow(h_n, 1.0 / n);
  rep.parameters = {{"sigma", sigma},           {"rho", rho}, {"leading_rhs", lead}, {"h_term", 0.5 * h_term},
                    {"boundary", ball_meets_boundary(mu, p, rho) ? 1.0 : 0.0}};
  rep.finish(tol);
  return rep;
}

double Bump::value(const double* x, int d) const {
  const double t = std::sqrt(dist2(x, center.data(), d)) / radius;
  if (t >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - t * t));
}

void Bump::gradient(const double* x, int d, double* out) const {
  const double dist = std::sqrt(dist2(x, center.data(), d));
  const double t = dist / radius;
  for (int k = 0; k < d; ++k) out[k] = 0.0;
  if (t >= 1.0 || dist == 0.0) return;
  const double s = 1.0 - t * t;
  // d/dt exp(1 - 1/s) = exp(1 - 1/s) * (-2t / s^2)
  const double dphi_dt = std::exp(1.0 - 1.0 / s) * (-2.0 * t / (s * s));
  for (int k = 0; k < d; ++k) out[k] = dphi_dt * (x[k] - center[k]) / (dist * radius);
}

InequalityReport hardy_check(const PushforwardMeasure& mu, double a, const Bump& phi, const double* origin,
                             double tol) {
  const int n = mu.n, d = mu.d;
  if (!(a >= 0 && a < n)) throw Error(ErrorCode::invalid_exponent, "a must lie in [0, n)");
  double lhs = 0.0, rhs = 0.0;
  // seam copies of the origin count as the origin
  const double coincide = 1e-9 * std::max(1.0, mu.spacing);
  for (std::size_t i : ball_atoms(mu, phi.center.data(), phi.radius)) {
    const double* x = mu.position(i);
    double rel[kMaxD];
    for (int k = 0; k < d; ++k) rel[k] = x[k] - origin[k];
    const double r = norm(rel, d);
    if (r <= coincide) continue;
    const double f = phi.value(x, d);
    double grad[kMaxD], gt[kMaxD];
    phi.gradient(x, d, grad);
    mu.tangent_part(i, grad, gt);
    const double xp = mu.normal_norm(i, rel);
    double v2 = 0.0;
    for (int k = 0; k < d; ++k) {
      const double e = 2.0 * gt[k] - n * mu.H[i * d + k] * f;
      v2 += e * e;
    }
    const double w = mu.weight[i];
    lhs += w * ((n - a) * f * f / std::pow(r, a) + a * xp * xp * f * f / std::pow(r, a + 2));
    rhs += w * v2 * std::pow(r, 2.0 - a);
  }
  InequalityReport rep;
  rep.lhs = lhs;
  rep.rhs = rhs / (n - a);
  rep.parameters = {{"a", a}, {"bump_radius", phi.radius},
                    {"boundary", ball_meets_boundary(mu, phi.center.data(), phi.radius) ? 1.0 : 0.0}};
  rep.finish(tol);
  if (lhs == 0.0 && rhs == 0.0) rep.margin_ok = true;
  return rep;
}

InequalityReport hardy_iterated_check(const PushforwardMeasure& mu, double total_energy) {
  const int n = mu.n, d = mu.d;
  const double zero[kMaxD] = {};
  double nearest2 = 0.0;
  mu.index.nearest(zero, &nearest2);
  double max_r = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) max_r = std::max(max_r, norm(mu.position(i), d));
  if (std::sqrt(nearest2) > 1e-9 * std::max(1.0, mu.spacing) || max_r > 1.0 + 1e-9)
    throw Error(ErrorCode::precondition, "needs 0 on the image and the image inside the closed unit ball");
  double ii = 0.0, xp = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double* x = mu.position(i);
    const double r = norm(x, d);
    if (r == 0.0) continue;
    const double w = mu.weight[i];
    ii += w * mu.II_norm[i] * mu.II_norm[i] / std::pow(r, n - 2);
    const double perp = mu.normal_norm(i, x);
    xp += w * perp * perp / std::pow(r, n + 2);
  }
  InequalityReport rep;
  rep.lhs = ii;
  rep.rhs = total_energy;
  const double c1 = total_energy > 0 ? ii / total_energy : (ii > 0 ? INFINITY : 0.0);
  const double c2 = total_energy > 0 ? xp / std::sqrt(total_energy) : (xp > 0 ? INFINITY : 0.0);
  rep.parameters = {{"II_weighted", ii}, {"xperp_weighted", xp}, {"C_II", c1}, {"C_xperp", c2}, {"energy", total_energy}};
  rep.ratio = c1;
  rep.margin_ok = std::isfinite(c1) && std::isfinite(c2);
  return rep;
}

std::vector<InequalityReport> volume_growth_check(const PushforwardMeasure& mu, const EnergyAtoms& energy,
                                                  const std::vector<std::vector<double>>& centers,
                                                  const std::vector<double>& radii) {
  std::vector<InequalityReport> out;
  const int n = mu.n;
  for (const auto& c : centers) {
    const double big_mass = extrinsic_ball_volume(mu, c.data(), 2.0);
    const double big_energy = ball_energy(energy, c.data(), 2.0);
    for (double r : radii) {
      if (!(r > 0 && r < 1)) throw Error(ErrorCode::invalid_argument, "radii must lie in (0,1)");
      InequalityReport rep;
      const double m = extrinsic_ball_volume(mu, c.data(), r);
      rep.lhs = m / std::pow(r, n);
      rep.rhs = 2.0 * big_mass;
      const double needed = big_energy > 0 ? std::max(0.0, (rep.lhs - rep.rhs) / big_energy) : 0.0;
      rep.parameters = {{"r", r},
                        {"lower_ratio", rep.lhs},
                        {"lower_ratio_over_omega", rep.lhs / unit_ball_volume(n)},
                        {"observed_C", needed},
                        {"boundary", ball_meets_boundary(mu, c.data(), 2.0) ? 1.0 : 0.0}};
      rep.ratio = rep.rhs > 0 ? rep.lhs / rep.rhs : 0.0;
      rep.margin_ok = big_energy > 0 || rep.lhs <= rep.rhs;
      out.push_back(rep);
    }
  }
  return out;
}

std::vector<InequalityReport> sobolev_ratio_probe(const PushforwardMeasure& mu, const std::vector<Bump>& bumps,
                                                  double p, double q) {
  const int n = mu.n, d = mu.d;
  if (!(p >= 1 && p < n)) throw Error(ErrorCode::invalid_exponent, "p must lie in [1, n)");
  WeightedSampleSet hs;
  for (std::size_t i = 0; i < mu.size(); ++i) hs.add(norm(mu.H.data() + i * d, d), mu.weight[i]);
  const double h_weak = weak_norm(hs, n);
  std::vector<InequalityReport> out;
  for (const auto& b : bumps) {
    WeightedSampleSet f, df;
    for (std::size_t i : ball_atoms(mu, b.center.data(), b.radius)) {
      const double* x = mu.position(i);
      double grad[kMaxD], gt[kMaxD];
      b.gradient(x, d, grad);
      mu.tangent_part(i, grad, gt);
      f.add(b.value(x, d), mu.weight[i]);
      df.add(norm(gt, d), mu.weight[i]);
    }
    InequalityReport rep;
    rep.lhs = lorentz_norm(f, n * p / (n - p), q);
    rep.rhs = lorentz_norm(df, p, q);
    rep.degenerate = rep.lhs == 0.0;
    rep.ratio = rep.rhs > 0 ? rep.lhs / rep.rhs : 0.0;
    rep.margin_ok = !rep.degenerate;
    rep.parameters = {{"bump_radius", b.radius}, {"p", p}, {"q", q}, {"H_weak_n", h_weak},
                      {"boundary", ball_meets_boundary(mu, b.center.data(), b.radius) ? 1.0 : 0.0}};
    out.push_back(rep);
  }
  return out;
}

std::size_t GoodBadDecomposition::bad_count() const {
  return static_cast<std::size_t>(std::count(bad.begin(), bad.end(), 1));
}

std::vector<double> all_thresholds(const EnergyAtoms& atoms, double eps0, Execution exec) {
  std::vector<double> thr(atoms.size());
  if (atoms.total() < 0.5 * eps0) {
    std::fill(thr.begin(), thr.end(), 1.0);
    return thr;
  }
  const std::ptrdiff_t N = static_cast<std::ptrdiff_t>(atoms.size());
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 256)
    for (std::ptrdiff_t i = 0; i < N; ++i) thr[i] = radius_threshold(atoms, atoms.position(i), eps0);
  } else {
    for (std::ptrdiff_t i = 0; i < N; ++i) thr[i] = radius_threshold(atoms, atoms.position(i), eps0);
  }
  return thr;
}

GoodBadDecomposition good_bad_decomposition(const EnergyAtoms& atoms, const std::vector<double>& thresholds,
                                            double eps0, double r) {
  if (!(r > 0)) throw Error(ErrorCode::invalid_argument, "scale must be > 0");
  if (thresholds.size() != atoms.size()) throw Error(ErrorCode::invalid_argument, "threshold count mismatch");
  GoodBadDecomposition gb;
  gb.r = r;
  gb.eps0 = eps0;
  gb.threshold = thresholds;
  gb.bad.assign(atoms.size(), 0);
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < atoms.size(); ++i)
    if (thresholds[i] < r) {
      gb.bad[i] = 1;
      bad.push_back(i);
    }
  if (bad.empty()) return gb;
  // farthest-point cover by balls of radius 2r
  const int d = atoms.d;
  const double R = 2.0 * r;
  std::vector<double> gap(bad.size(), INFINITY);
  std::size_t next = 0;
  while (true) {
    const double* c = atoms.position(bad[next]);
    gb.cover.emplace_back(std::vector<double>(c, c + d), R);
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t j = 0; j < bad.size(); ++j) {
      gap[j] = std::min(gap[j], std::sqrt(dist2(atoms.position(bad[j]), c, d)));
      if (gap[j] > far_d) {
        far_d = gap[j];
        far = j;
      }
    }
    if (far_d < R) break;
    next = far;
  }
  return gb;
}

}  // namespace immersia
