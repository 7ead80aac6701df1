#include "immersia/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <exception>
#include <numbers>
#include <optional>
#include <random>

#include "immersia/energy.hpp"
#include "immersia/error.hpp"
#include "immersia/fixtures.hpp"
#include "immersia/harmonic.hpp"
#include "immersia/lorentz.hpp"
#include "immersia/measure.hpp"
#include "immersia/slicing.hpp"
#include "immersia/suites.hpp"
#include "immersia/topology.hpp"

namespace immersia {
namespace {

constexpr double kPi = std::numbers::pi;

std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

void append(std::string& s, const std::string& part) {
  if (!s.empty()) s += "; ";
  s += part;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

ShapeSpec spec_of(ShapeKind k) {
  ShapeSpec s;
  s.kind = k;
  return s;
}

// image of the middle node of chart 0
Vec middle_point(const SampledImmersion& imm) {
  const auto& g = imm.charts[0].grid;
  MultiIndex m{};
  for (int a = 0; a < g.n(); ++a) m[a] = g.dims()[a] / 2;
  const double* x = imm.charts[0].at(g.index(m), imm.d);
  return Eigen::Map<const Vec>(x, imm.d);
}

// ---- shared corpus pass: Hardy, monotonicity, growth, density ----

struct CorpusRun {
  std::string name;
  std::string error;
  int multiplicity = 1;
  bool flat = false;
  int hardy_count = 0, hardy_fail = 0;
  double hardy_worst = 0.0;
  int mono_count = 0, mono_fail = 0;
  double mono_worst = 0.0;
  double lead_dev = 0.0;
  double c_lo = 0.0, c_hi = 0.0, spread = 0.0;
  int dens_count = 0, dens_bad = 0;
  double dens_lo = kInfinity, dens_hi = 0.0;
};

CorpusRun run_corpus_shape(const CorpusShape& cs) {
  CorpusRun run;
  run.name = cs.name;
  run.multiplicity = cs.multiplicity;
  run.flat = cs.spec.kind == ShapeKind::plane;
  try {
    const auto imm = build_shape(cs.spec, cs.resolution);
    const auto mu = pushforward(imm);
    for (const auto& r : hardy_suite(mu, {})) {
      ++run.hardy_count;
      run.hardy_fail += !r.margin_ok;
      run.hardy_worst = std::max(run.hardy_worst, r.ratio);
    }
    for (const auto& r : monotonicity_suite(mu, {})) {
      ++run.mono_count;
      run.mono_fail += !r.margin_ok;
      run.mono_worst = std::max(run.mono_worst, r.ratio);
      run.lead_dev = std::max(run.lead_dev, std::abs(r.lhs / r.param("leading_rhs") - 1.0));
    }
    const auto atoms = energy_atoms(imm);
    const auto g = growth_suite(mu, atoms, {});
    run.c_lo = g.c_lo;
    run.c_hi = g.c_hi;
    run.spread = g.spread;
    for (std::size_t i : sample_atoms(mu, 10, 9.0 * mu.cell_max, 1)) {
      const double c = mu.cell[i];
      const auto dr = density_at(mu, mu.position(i), {8.0 * c, 6.0 * c, 4.0 * c});
      ++run.dens_count;
      run.dens_bad += dr.rounded != cs.multiplicity || !dr.conclusive;
      run.dens_lo = std::min(run.dens_lo, dr.raw);
      run.dens_hi = std::max(run.dens_hi, dr.raw);
    }
  } catch (const std::exception& e) {
    run.error = e.what();
  }
  return run;
}

const std::vector<CorpusRun>& corpus_runs() {
  static std::optional<std::vector<CorpusRun>> cache;
  if (!cache) {
    cache.emplace();
    for (const auto& cs : analytic_corpus()) cache->push_back(run_corpus_shape(cs));
  }
  return *cache;
}

// ---- shared good-slice searches ----

constexpr int kSearchRes = 17;
constexpr double kSearchR = 0.5;

struct SearchRun {
  std::string name;
  std::string error;
  int degree = 1;  // expected covering degree
  std::optional<SliceSearchResult> coarse, fine;
};

SearchRun run_search(const std::string& name, ShapeSpec spec, int degree, bool refine_grid) {
  SearchRun run;
  run.name = name;
  run.degree = degree;
  try {
    const auto imm = build_shape(spec, kSearchRes);
    const Vec p = middle_point(imm);
    run.coarse = good_slice_search(imm, p, kSearchR, 3, 3);
    if (refine_grid) run.fine = good_slice_search(imm, p, kSearchR, 5, 5, run.coarse->ball_energy);
  } catch (const std::exception& e) {
    run.error = e.what();
  }
  return run;
}

const std::vector<SearchRun>& search_runs() {
  static std::optional<std::vector<SearchRun>> cache;
  if (!cache) {
    cache.emplace();
    ShapeSpec ps = spec_of(ShapeKind::graph_perturbation);
    ps.base = ShapeKind::round_sphere;
    ShapeSpec el = spec_of(ShapeKind::ellipsoid);
    el.semi_axes = {1.0, 0.8, 1.2, 0.9, 1.1};
    cache->push_back(run_search("round_sphere", spec_of(ShapeKind::round_sphere), 1, true));
    cache->push_back(run_search("perturbed_sphere", ps, 1, true));
    cache->push_back(run_search("ellipsoid", el, 1, false));
    cache->push_back(run_search("plane", spec_of(ShapeKind::plane), 1, false));
    cache->push_back(run_search("double_cover_sphere", spec_of(ShapeKind::double_cover_sphere), 2, false));
  }
  return *cache;
}

// ---- harmonic cap charts at res 9, shared by criteria 11 and 12 ----

struct CapCharts {
  SampledImmersion imm;
  std::vector<HarmonicChart> charts;
};

const CapCharts& cap_charts_res9() {
  static std::optional<CapCharts> cache;
  if (!cache) {
    CapCharts c;
    c.imm = sphere_cap_charts(4, 3, 9);
    BoundaryMap bm;
    bm.kind = BoundaryKind::plane_fit;
    for (int k = 0; k < 3; ++k) c.charts.push_back(solve_harmonic_coordinates(c.imm, k, bm));
    cache = std::move(c);
  }
  return *cache;
}

// ---- criteria ----

CriterionResult sphere_energy() {
  CriterionResult r;
  const double exact = 128.0 * kPi * kPi / 3.0;
  const std::vector<int> res{9, 17, 33};
  std::vector<double> lh, le;
  double err33 = 0.0;
  for (int k : res) {
    const auto e = energy(build_shape(spec_of(ShapeKind::round_sphere), k));
    const double err = rel(e.total, exact);
    append(r.detail, fmt("res %d E %.10g err %.3g", k, e.total, err));
    lh.push_back(std::log(2.0 / (k - 1)));
    le.push_back(std::log(err));
    err33 = err;
  }
  const double mh = (lh[0] + lh[1] + lh[2]) / 3.0, me = (le[0] + le[1] + le[2]) / 3.0;
  double sxy = 0.0, sxx = 0.0;
  for (int i = 0; i < 3; ++i) {
    sxy += (lh[i] - mh) * (le[i] - me);
    sxx += (lh[i] - mh) * (lh[i] - mh);
  }
  const double order = sxy / sxx;
  append(r.detail, fmt("order %.3f", order));
  r.pass = err33 <= 0.01 && order >= 1.8;
  return r;
}

CriterionResult scale_invariance() {
  CriterionResult r;
  ShapeSpec ps = spec_of(ShapeKind::graph_perturbation);
  ps.base = ShapeKind::round_sphere;
  ShapeSpec el = spec_of(ShapeKind::ellipsoid);
  el.semi_axes = {1.0, 0.8, 1.2, 0.9, 1.1};
  double worst = 0.0;
  for (const ShapeSpec& s : {spec_of(ShapeKind::round_sphere), el, ps}) {
    const auto imm = build_shape(s, 9);
    const double base = energy(imm, {}, DerivativeMode::exact).total;
    for (double lambda : {0.5, 2.0, 10.0}) {
      auto T = SimilarityTransform::identity(imm.d);
      T.dilation = lambda;
      T.translation = Vec::LinSpaced(imm.d, 0.1, 0.5);
      const double e = energy(apply_transform(imm, T), {}, DerivativeMode::exact).total;
      worst = std::max(worst, rel(e, base));
    }
  }
  r.detail = fmt("worst relative change %.3g over 3 shapes x 3 dilations", worst);
  r.pass = worst <= 1e-8;
  return r;
}

CriterionResult lorentz_exactness() {
  CriterionResult r;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst_ind = 0.0;
  for (int t = 0; t < 100; ++t) {
    const double p = 1.0 + 7.0 * unit(rng);
    const double q = t % 10 == 9 ? kInfinity : 1.0 + 7.0 * unit(rng);
    const double m = std::exp(std::log(0.01) + std::log(1e4) * unit(rng));
    WeightedSampleSet s;
    const int pieces = 1 + static_cast<int>(unit(rng) * 20);
    std::vector<double> cuts(pieces);
    double sum = 0.0;
    for (double& c : cuts) sum += (c = 0.1 + unit(rng));
    for (double c : cuts) s.add(1.0, m * c / sum);
    for (int z = 0; z < 5; ++z) s.add(0.0, unit(rng) + 0.01);
    const double expect = std::isinf(q) ? std::pow(m, 1.0 / p) : std::pow(p / q, 1.0 / q) * std::pow(m, 1.0 / p);
    worst_ind = std::max(worst_ind, rel(lorentz_norm(s, p, q), expect));
  }
  double worst_pp = 0.0;
  for (int t = 0; t < 100; ++t) {
    const double p = 1.0 + 5.0 * unit(rng);
    WeightedSampleSet s;
    const int size = 1 + static_cast<int>(unit(rng) * 200);
    std::lognormal_distribution<double> val(0.0, 1.0);
    for (int i = 0; i < size; ++i) s.add(val(rng), 0.01 + unit(rng));
    worst_pp = std::max(worst_pp, rel(lorentz_norm(s, p, p), lebesgue_norm(s, p)));
  }
  r.detail = fmt("indicator worst rel %.3g; L(p,p) vs Lp worst rel %.3g", worst_ind, worst_pp);
  r.pass = worst_ind <= 1e-12 && worst_pp <= 1e-10;
  return r;
}

CriterionResult hardy() {
  CriterionResult r;
  r.pass = true;
  for (const auto& c : corpus_runs()) {
    if (!c.error.empty()) {
      append(r.detail, c.name + " error: " + c.error);
      r.pass = false;
      continue;
    }
    append(r.detail, fmt("%s %d/%d worst %.3f", c.name.c_str(), c.hardy_count - c.hardy_fail, c.hardy_count,
                         c.hardy_worst));
    r.pass = r.pass && c.hardy_fail == 0 && c.hardy_count > 0;
  }
  return r;
}

CriterionResult monotonicity() {
  CriterionResult r;
  r.pass = true;
  for (const auto& c : corpus_runs()) {
    if (!c.error.empty()) {
      append(r.detail, c.name + " error: " + c.error);
      r.pass = false;
      continue;
    }
    std::string part =
        fmt("%s %d/%d worst %.3f", c.name.c_str(), c.mono_count - c.mono_fail, c.mono_count, c.mono_worst);
    r.pass = r.pass && c.mono_fail == 0 && c.mono_count > 0;
    if (c.flat) {
      part += fmt(" leading %.4f", c.lead_dev);
      r.pass = r.pass && c.lead_dev <= 0.01;
    }
    append(r.detail, part);
  }
  return r;
}

CriterionResult volume_growth() {
  CriterionResult r;
  r.pass = true;
  for (const auto& c : corpus_runs()) {
    if (!c.error.empty()) {
      append(r.detail, c.name + " error: " + c.error);
      r.pass = false;
      continue;
    }
    append(r.detail, fmt("%s c %.3f..%.3f spread %.2f", c.name.c_str(), c.c_lo, c.c_hi, c.spread));
    r.pass = r.pass && c.c_lo > 0.0 && c.spread <= 10.0;
  }
  return r;
}

double majorant_margin(Slice s) {
  if (!s.has_second_form) slice_second_form(s);
  double m = -kInfinity;
  for (std::size_t c = 0; c < s.cells; ++c) m = std::max(m, s.A_norm[c] - s.A_bound[c]);
  return m;
}

CriterionResult slice_geometry() {
  CriterionResult r;
  const auto imm = build_shape(spec_of(ShapeKind::round_sphere), 33);
  const double c = 1.2, rho = 0.5;
  Vec q = Vec::Zero(imm.d);
  q[imm.n] = c;
  Slice s = level_set_slice(imm, q, rho);
  slice_second_form(s);
  const double xn = (1.0 + c * c - rho * rho) / (2.0 * c);
  const double sr = std::sqrt(1.0 - xn * xn);
  const double area_exact = 2.0 * kPi * kPi * sr * sr * sr;
  const double A_exact = std::sqrt(3.0 * (1.0 / (sr * sr) - 1.0 / (rho * rho)));
  const double area_err = rel(s.total_area(), area_exact);
  double A_err = 0.0;
  for (std::size_t k = 0; k < s.cells; ++k) A_err = std::max(A_err, rel(s.A_norm[k], A_exact));
  r.detail = fmt("latitude cells %zu area err %.3g |A| worst err %.3g", s.cells, area_err, A_err);
  r.pass = s.cells > 0 && area_err <= 0.02 && A_err <= 0.02;
  double worst = -kInfinity;
  int slices = 0;
  for (const auto& run : search_runs()) {
    if (!run.error.empty()) {
      append(r.detail, run.name + " search error: " + run.error);
      r.pass = false;
      continue;
    }
    for (const auto* res : {&run.coarse, &run.fine}) {
      if (!*res) continue;
      worst = std::max(worst, majorant_margin((*res)->slice));
      ++slices;
    }
  }
  append(r.detail, fmt("majorant margin max %.3g over %d search slices", worst, slices));
  r.pass = r.pass && slices > 0 && worst <= 1e-10;
  return r;
}

CriterionResult search_stability() {
  CriterionResult r;
  r.pass = true;
  for (const auto& run : search_runs()) {
    if (!run.coarse && run.error.empty()) continue;
    if (!run.error.empty()) {
      if (run.name == "round_sphere" || run.name == "perturbed_sphere") {
        append(r.detail, run.name + " error: " + run.error);
        r.pass = false;
      }
      continue;
    }
    if (!run.fine) continue;
    const auto& a = *run.coarse;
    const auto& b = *run.fine;
    auto change = [](double x, double y) {
      if (x == y) return 0.0;
      return std::abs(y - x) / std::max(std::abs(x), std::abs(y));
    };
    const double dA = change(a.c_A, b.c_A), dII = change(a.c_II, b.c_II), dV = change(a.c_vol, b.c_vol);
    append(r.detail, fmt("%s c_A %.4g->%.4g c_II %.4g->%.4g c_vol %.4g->%.4g max change %.3g", run.name.c_str(),
                         a.c_A, b.c_A, a.c_II, b.c_II, a.c_vol, b.c_vol, std::max({dA, dII, dV})));
    r.pass = r.pass && dA <= 0.1 && dII <= 0.1 && dV <= 0.1;
  }
  return r;
}

CriterionResult graph_covering() {
  CriterionResult r;
  r.pass = true;
  for (const auto& run : search_runs()) {
    if (!run.error.empty()) {
      append(r.detail, run.name + " error: " + run.error);
      r.pass = false;
      continue;
    }
    const Slice& s = run.coarse->slice;
    const auto fit = plane_fit(s);
    const auto g = graph_extract(s, fit);
    const double delta = fit.offset / s.rho;
    append(r.detail, fmt("%s degree %d (want %d) delta %.3g", run.name.c_str(), g.degree, run.degree, delta));
    r.pass = r.pass && g.degree == run.degree && delta < 1.0;
  }
  return r;
}

CriterionResult morse_count() {
  CriterionResult r;
  r.pass = true;
  ShapeSpec el = spec_of(ShapeKind::ellipsoid);
  el.semi_axes = {1.0, 0.8, 1.2, 0.9, 1.1};
  for (const auto& [name, spec] : {std::pair{"round_sphere", spec_of(ShapeKind::round_sphere)}, std::pair{"ellipsoid", el}}) {
    const auto imm = build_shape(spec, 17);
    Vec Q = Vec::Zero(imm.d);
    Q[0] = 3.0;
    Q[1] = 1.0;
    std::string counts;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto rep = critical_point_count_seeded(imm, seed, Q, 2.0);
      counts += fmt("%s%d", seed ? "," : "", rep.count);
      r.pass = r.pass && rep.count == 2;
    }
    append(r.detail, fmt("%s counts %s", name, counts.c_str()));
  }
  ShapeSpec db = spec_of(ShapeKind::dumbbell);
  const auto imm = build_shape(db, 17);
  Vec e = Vec::Zero(imm.d), Q = Vec::Zero(imm.d);
  e[1] = 1.0;
  Q[2] = 10.0;
  const auto rep = critical_point_count(imm, e, Q, 10.0);
  append(r.detail, fmt("dumbbell count %d", rep.count));
  r.pass = r.pass && rep.count >= 4;
  return r;
}

CriterionResult harmonic_charts() {
  CriterionResult r;
  const auto flat = flat_rotated_charts(4, 1, 9);
  BoundaryMap id;
  id.kind = BoundaryKind::identity;
  const auto F = solve_harmonic_coordinates(flat, 0, id);
  double err = 0.0;
  for (std::size_t i = 0; i < F.nodes(); ++i) {
    double x[kMaxN];
    F.grid.param(F.grid.multi(i), x);
    for (int a = 0; a < F.n; ++a) err = std::max(err, std::abs(F.coords[i * F.n + a] - x[a]));
  }
  append(r.detail, fmt("flat identity err %.3g", err));
  bool ok = err <= 1e-10;

  const auto& H9 = cap_charts_res9().charts[0];
  BoundaryMap pf;
  pf.kind = BoundaryKind::plane_fit;
  const auto H17 = solve_harmonic_coordinates(sphere_cap_charts(4, 1, 17), 0, pf);
  double solve_res = 0.0;
  for (const auto* h : {&F, &H9, &H17})
    for (double v : h->residuals) solve_res = std::max(solve_res, v);
  append(r.detail, fmt("solve residual max %.3g", solve_res));
  ok = ok && solve_res <= 1e-10;
  append(r.detail, fmt("cap sup|g-delta| harmonic %.17g input %.17g", H17.estimates.sup_deviation,
                       H17.input_estimates.sup_deviation));
  // both sups sit at box corners, where the two metrics agree up to rounding
  ok = ok && H17.estimates.sup_deviation <= H17.input_estimates.sup_deviation * (1.0 + 1e-12);
  const auto p9 = harmonic_metric_pde_residual(H9);
  const auto p17 = harmonic_metric_pde_residual(H17);
  const double order = std::log(p9.residual_rms / p17.residual_rms) / std::log(2.0);
  append(r.detail, fmt("pde rms %.4g -> %.4g order %.3f", p9.residual_rms, p17.residual_rms, order));
  r.pass = ok && order >= 0.9;
  return r;
}

CriterionResult transitions() {
  CriterionResult r;
  const auto flat = flat_rotated_charts(4, 2, 9);
  BoundaryMap id;
  id.kind = BoundaryKind::identity;
  const auto A = solve_harmonic_coordinates(flat, 0, id);
  const auto B = solve_harmonic_coordinates(flat, 1, id);
  const auto rigid = transition_map(A, B);
  append(r.detail, fmt("rigid isometry dev %.3g hess sup %.3g", rigid.isometry_deviation, rigid.hess_sup));
  bool ok = rigid.isometry_deviation <= 1e-10 && rigid.hess_sup <= 1e-10;

  const auto& caps = cap_charts_res9();
  const auto comp = transition_composition(caps.charts[0], caps.charts[1], caps.charts[2]);
  append(r.detail, fmt("composition err %.3g tol %.3g nodes %zu", comp.max_error, comp.tolerance, comp.nodes));
  ok = ok && comp.ok && comp.nodes > 0;

  const auto T = transition_map(caps.charts[0], caps.charts[1]);
  const double cap_energy =
      energy(caps.imm, [](int chart, std::size_t, const double*) { return chart == 0; }).total;
  const double C = T.isometry_deviation / std::sqrt(cap_energy);
  append(r.detail, fmt("cap isometry dev %.4g energy %.4g C %.4g", T.isometry_deviation, cap_energy, C));
  r.pass = ok && std::isfinite(T.isometry_deviation) && std::isfinite(C);
  return r;
}

CriterionResult good_bad() {
  CriterionResult r;
  bool ok = true;
  auto subset = [](const GoodBadDecomposition& lo, const GoodBadDecomposition& hi) {
    for (std::size_t i = 0; i < lo.bad.size(); ++i)
      if (lo.bad[i] && !hi.bad[i]) return false;
    return true;
  };
  const std::vector<double> ladder{0.0125, 0.025, 0.05, 0.1};
  auto monotone = [&](const EnergyAtoms& atoms, const std::vector<double>& th) {
    std::optional<GoodBadDecomposition> prev;
    for (double rr : ladder) {
      auto g = good_bad_decomposition(atoms, th, kDefaultEps0, rr);
      if (prev && !subset(*prev, g)) return false;
      prev = std::move(g);
    }
    return true;
  };
  const std::pair<const char*, int> flat_cases[] = {{"plane", 17}, {"round_sphere", 13}};
  for (const auto& [name, res] : flat_cases) {
    const auto atoms = energy_atoms(build_shape(spec_of(shape_kind_from_name(name)), res));
    const auto th = all_thresholds(atoms, kDefaultEps0);
    const auto g = good_bad_decomposition(atoms, th, kDefaultEps0, 0.01);
    const bool mono = monotone(atoms, th);
    append(r.detail, fmt("%s bad %zu at r 0.01 monotone %d", name, g.bad_count(), mono));
    ok = ok && g.bad_count() == 0 && mono;
  }
  ShapeSpec db = spec_of(ShapeKind::dumbbell);
  db.neck_width = 0.1;
  const auto atoms = energy_atoms(build_shape(db, 13));
  const auto th = all_thresholds(atoms, kDefaultEps0);
  const auto g1 = good_bad_decomposition(atoms, th, kDefaultEps0, 0.05);
  const auto g2 = good_bad_decomposition(atoms, th, kDefaultEps0, 0.025);
  const bool mono = monotone(atoms, th);
  const long dI = static_cast<long>(g2.cover_size()) - static_cast<long>(g1.cover_size());
  append(r.detail, fmt("dumbbell bad %zu I %zu at r 0.05, bad %zu I %zu at r 0.025, monotone %d", g1.bad_count(),
                       g1.cover_size(), g2.bad_count(), g2.cover_size(), mono));
  r.pass = ok && mono && g1.bad_count() > 0 && std::labs(dI) <= 1;
  return r;
}

CriterionResult density() {
  CriterionResult r;
  r.pass = true;
  for (const auto& c : corpus_runs()) {
    if (!c.error.empty()) {
      append(r.detail, c.name + " error: " + c.error);
      r.pass = false;
      continue;
    }
    append(r.detail, fmt("%s %d/%d round to %d raw %.3f..%.3f", c.name.c_str(), c.dens_count - c.dens_bad,
                         c.dens_count, c.multiplicity, c.dens_lo, c.dens_hi));
    r.pass = r.pass && c.dens_bad == 0 && c.dens_count > 0;
  }
  return r;
}

using CriterionFn = CriterionResult (*)();

struct CriterionEntry {
  const char* name;
  CriterionFn fn;
};

constexpr CriterionEntry kCriteria[kCriterionCount] = {
    {"sphere-energy", sphere_energy},       {"scale-invariance", scale_invariance},
    {"lorentz-exactness", lorentz_exactness}, {"hardy-suite", hardy},
    {"monotonicity-suite", monotonicity},   {"volume-growth", volume_growth},
    {"slice-geometry", slice_geometry},     {"search-stability", search_stability},
    {"graph-covering", graph_covering},     {"morse-count", morse_count},
    {"harmonic-charts", harmonic_charts},   {"transition-maps", transitions},
    {"good-bad", good_bad},                 {"density", density},
};

}  // namespace

const char* criterion_name(int id) {
  if (id < 1 || id > kCriterionCount) throw Error(ErrorCode::invalid_argument, "criterion id out of range");
  return kCriteria[id - 1].name;
}

CriterionResult run_criterion(int id) {
  const char* name = criterion_name(id);
  const auto t0 = std::chrono::steady_clock::now();
  CriterionResult r;
  try {
    r = kCriteria[id - 1].fn();
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = std::string("error: ") + e.what();
  }
  r.id = id;
  r.name = name;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::vector<CriterionResult> run_acceptance(const std::vector<int>& ids,
                                            const std::function<void(const CriterionResult&)>& on_result) {
  std::vector<int> list = ids;
  if (list.empty())
    for (int i = 1; i <= kCriterionCount; ++i) list.push_back(i);
  std::vector<CriterionResult> out;
  for (int id : list) {
    out.push_back(run_criterion(id));
    if (on_result) on_result(out.back());
  }
  return out;
}

std::string format_result(const CriterionResult& r) {
  return fmt("[%s] %02d %s (%.1f s): ", r.pass ? "PASS" : "FAIL", r.id, r.name.c_str(), r.seconds) + r.detail;
}

}  // namespace immersia
