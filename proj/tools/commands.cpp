#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "immersia/acceptance.hpp"
#include "immersia/chart_io.hpp"
#include "immersia/energy.hpp"
#include "immersia/error.hpp"
#include "immersia/geometry.hpp"
#include "immersia/harmonic.hpp"
#include "immersia/lorentz.hpp"
#include "immersia/measure.hpp"
#include "immersia/report.hpp"
#include "immersia/slicing.hpp"
#include "immersia/suites.hpp"
#include "immersia/topology.hpp"

namespace immersia::cli {

using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

DerivativeMode mode_from_name(const std::string& s) {
  if (s == "auto") return DerivativeMode::automatic;
  if (s == "exact") return DerivativeMode::exact;
  if (s == "numeric") return DerivativeMode::numeric;
  throw Error(ErrorCode::invalid_argument, "unknown derivative mode: " + s);
}

json parse_params(const std::string& text) {
  if (text.empty()) return json::object();
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string("parameters are not valid JSON: ") + e.what());
  }
}

// Where a single report goes: a file written atomically, or stdout.
struct Output {
  std::string report;

  void add(CLI::App* app) { app->add_option("--report", report, "Write the JSON report to this file"); }
  void emit(const json& j) const {
    const std::string text = dump_report(j) + "\n";
    if (report.empty())
      std::cout << text << std::flush;
    else
      atomic_write(report, text);
  }
};

// Either --input manifest or a generated shape.
struct Input {
  std::string manifest;
  std::string kind;
  int n = 4;
  int res = 17;
  std::string params;

  void add(CLI::App* app) {
    app->add_option("--input", manifest, "Immersion manifest");
    app->add_option("--kind", kind, "Generate a shape of this kind instead of reading --input");
    app->add_option("--n", n, "Dimension of the generated shape")->capture_default_str();
    app->add_option("--res", res, "Nodes per chart axis of the generated shape")->capture_default_str();
    app->add_option("--shape-params", params, "Extra shape fields as a JSON object");
  }

  ShapeSpec spec() const {
    json j = parse_params(params);
    check_known_keys(j, {"codim", "radius", "semi_axes", "extent", "base", "amplitude", "frequency", "neck_width"});
    j["kind"] = kind;
    j["n"] = n;
    return shape_spec_from_json(j);
  }

  SampledImmersion load() const {
    if (!manifest.empty() && !kind.empty())
      throw Error(ErrorCode::invalid_argument, "--input and --kind are exclusive");
    if (!manifest.empty()) return read_immersion(manifest);
    if (kind.empty()) throw Error(ErrorCode::invalid_argument, "one of --input or --kind is required");
    return build_shape(spec(), res);
  }
};

int resolution_of(const SampledImmersion& imm) { return imm.charts.empty() ? 0 : imm.charts.front().grid.dims().front(); }

// One row per node: chart, multi-index, |II|, |H|, |nabla II|, min eigenvalue of g.
void dump_fields(const SampledImmersion& imm, DerivativeMode mode, const std::string& path) {
  std::ostringstream out;
  out << "chart,node";
  for (int a = 0; a < imm.n; ++a) out << ",i" << a;
  out << ",II_norm,H_norm,cov_II_norm,min_eig_g\n";
  for (int c = 0; c < static_cast<int>(imm.charts.size()); ++c) {
    const auto f = compute_geometry(imm, c, 1, mode);
    for (std::size_t i = 0; i < f.nodes(); ++i) {
      const auto m = f.grid.multi(i);
      out << c << ',' << i;
      for (int a = 0; a < imm.n; ++a) out << ',' << m[a];
      out << ',' << num(f.II_norm[i]) << ',' << num(f.H_norm[i]) << ',' << num(f.cov_II_norm[i]) << ','
          << num(f.min_eig_g[i]) << '\n';
    }
  }
  atomic_write(path, out.str());
}

void slice_csv(const Slice& s, const std::string& path) {
  std::ostringstream out;
  out << "cell,chart,component";
  for (int a = 0; a < s.n; ++a) out << ",u" << a;
  for (int a = 0; a < s.d; ++a) out << ",x" << a;
  out << ",area,grad,II_norm";
  if (s.has_second_form) out << ",A_norm,A_bound";
  out << '\n';
  for (std::size_t c = 0; c < s.cells; ++c) {
    out << c << ',' << s.chart[c] << ',' << s.component[c];
    for (int a = 0; a < s.n; ++a) out << ',' << num(s.u[c * s.n + a]);
    for (int a = 0; a < s.d; ++a) out << ',' << num(s.pos[c * s.d + a]);
    out << ',' << num(s.area[c]) << ',' << num(s.grad[c]) << ',' << num(s.II_norm[c]);
    if (s.has_second_form) out << ',' << num(s.A_norm[c]) << ',' << num(s.A_bound[c]);
    out << '\n';
  }
  atomic_write(path, out.str());
}

double parse_exponent(const std::string& s) {
  if (s == "inf" || s == "infinity") return kInfinity;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::invalid_argument, "not an exponent: " + s);
}

WeightedSampleSet read_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  WeightedSampleSet s;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::invalid_argument, "line " + std::to_string(lineno) + ": expected value,weight");
    try {
      s.add(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
    } catch (const std::invalid_argument&) {
      if (lineno == 1) continue;  // header
      throw Error(ErrorCode::invalid_argument, "line " + std::to_string(lineno) + ": not a number");
    }
  }
  s.validate();
  return s;
}

template <class T>
T param_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

// ---- subcommands ----

Command shapes_command(CLI::App& app) {
  auto* sub = app.add_subcommand("shapes", "Generate a sampled shape and write its manifest");
  auto in = std::make_shared<Input>();
  auto out = std::make_shared<Output>();
  auto path = std::make_shared<std::string>();
  auto format = std::make_shared<std::string>("binary");
  auto fields = std::make_shared<std::string>();
  in->add(sub);
  out->add(sub);
  sub->add_option("--out", *path, "Manifest path")->required();
  sub->add_option("--format", *format, "Chart data format")->check(CLI::IsMember({"binary", "json"}))->capture_default_str();
  sub->add_option("--dump-fields", *fields, "Per-node geometry CSV");
  return {sub, [=] {
            const auto imm = in->load();
            write_immersion(imm, *path, *format == "json" ? ChartFormat::json : ChartFormat::binary);
            json r = report_header("shapes");
            r["shape"] = imm.spec ? shape_spec_to_json(*imm.spec) : json::object();
            r["n"] = imm.n;
            r["d"] = imm.d;
            r["charts"] = imm.charts.size();
            r["nodes"] = imm.node_count();
            r["resolution"] = resolution_of(imm);
            r["manifest"] = *path;
            r["format"] = *format;
            if (!fields->empty()) {
              dump_fields(imm, DerivativeMode::automatic, *fields);
              r["fields_csv"] = *fields;
            }
            out->emit(r);
            return 0;
          }};
}

Command energy_command(CLI::App& app) {
  auto* sub = app.add_subcommand("energy", "Integrate the curvature energy");
  auto in = std::make_shared<Input>();
  auto out = std::make_shared<Output>();
  auto center = std::make_shared<std::vector<double>>();
  auto radius = std::make_shared<double>(0.0);
  auto mode = std::make_shared<std::string>("auto");
  auto fields = std::make_shared<std::string>();
  in->add(sub);
  out->add(sub);
  sub->add_option("--center", *center, "Center of an extrinsic ball")->expected(1, -1);
  sub->add_option("--radius", *radius, "Radius of the extrinsic ball");
  sub->add_option("--mode", *mode, "Derivative mode")->check(CLI::IsMember({"auto", "exact", "numeric"}))->capture_default_str();
  sub->add_option("--dump-fields", *fields, "Per-node geometry CSV");
  return {sub, [=] {
            const auto imm = in->load();
            const auto m = mode_from_name(*mode);
            if (!center->empty() && !(*radius > 0)) throw Error(ErrorCode::invalid_argument, "--center needs --radius > 0");
            const auto e = center->empty() ? energy(imm, {}, m) : energy_in_extrinsic_ball(imm, to_vec(*center), *radius, m);
            json r = report_header("energy");
            r.update(to_json(e));
            r["mode"] = *mode;
            if (!center->empty()) {
              r["center"] = *center;
              r["radius"] = *radius;
            }
            if (!fields->empty()) {
              dump_fields(imm, m, *fields);
              r["fields_csv"] = *fields;
            }
            out->emit(r);
            return 0;
          }};
}

Command norm_command(CLI::App& app) {
  auto* sub = app.add_subcommand("norm", "Lorentz norms of a weighted sample CSV (value,weight)");
  auto out = std::make_shared<Output>();
  auto path = std::make_shared<std::string>();
  auto p = std::make_shared<std::string>("2");
  auto q = std::make_shared<std::string>("2");
  out->add(sub);
  sub->add_option("--samples", *path, "CSV of value,weight rows")->required();
  sub->add_option("--p", *p, "Exponent p")->capture_default_str();
  sub->add_option("--q", *q, "Exponent q, or inf")->capture_default_str();
  return {sub, [=] {
            const auto s = read_samples(*path);
            const double pv = parse_exponent(*p), qv = parse_exponent(*q);
            json r = report_header("norm");
            r["p"] = pv;
            r["q"] = std::isinf(qv) ? json(nullptr) : json(qv);
            r["lorentz"] = lorentz_norm(s, pv, qv);
            r["weak"] = weak_norm(s, pv);
            r["lebesgue"] = lebesgue_norm(s, pv);
            r["samples"] = s.size();
            r["total_weight"] = s.total_weight();
            out->emit(r);
            return 0;
          }};
}

Command check_command(CLI::App& app) {
  auto* sub = app.add_subcommand("check", "Run an inequality suite; one JSON line per instance");
  auto in = std::make_shared<Input>();
  auto out = std::make_shared<Output>();
  auto which = std::make_shared<std::string>();
  auto params = std::make_shared<std::string>();
  auto strict = std::make_shared<bool>(false);
  in->add(sub);
  out->add(sub);
  sub->add_option("--inequality", *which, "Inequality suite")
      ->required()
      ->check(CLI::IsMember({"hardy", "monotonicity", "growth", "sobolev", "hardy-iterated"}));
  sub->add_option("--params", *params, "Suite parameters as a JSON object");
  sub->add_flag("--strict", *strict, "Exit 1 when any instance misses its margin");
  return {sub, [=] {
            const json pj = parse_params(*params);
            const auto imm = in->load();
            const auto mu = pushforward(imm);
            std::vector<InequalityReport> reps;
            if (*which == "hardy") {
              check_known_keys(pj, {"a", "bumps", "radius_lo", "radius_hi", "seed", "tol"});
              HardySuiteParams hp;
              hp.a = param_or(pj, "a", hp.a);
              hp.bumps = param_or(pj, "bumps", hp.bumps);
              hp.radius_lo = param_or(pj, "radius_lo", hp.radius_lo);
              hp.radius_hi = param_or(pj, "radius_hi", hp.radius_hi);
              hp.seed = param_or(pj, "seed", hp.seed);
              hp.tol = param_or(pj, "tol", hp.tol);
              reps = hardy_suite(mu, hp);
            } else if (*which == "monotonicity") {
              check_known_keys(pj, {"samples", "rho_lo", "rho_hi", "sigma_lo", "sigma_hi", "seed", "tol"});
              MonotonicitySuiteParams mp;
              mp.samples = param_or(pj, "samples", mp.samples);
              mp.rho_lo = param_or(pj, "rho_lo", mp.rho_lo);
              mp.rho_hi = param_or(pj, "rho_hi", mp.rho_hi);
              mp.sigma_lo = param_or(pj, "sigma_lo", mp.sigma_lo);
              mp.sigma_hi = param_or(pj, "sigma_hi", mp.sigma_hi);
              mp.seed = param_or(pj, "seed", mp.seed);
              mp.tol = param_or(pj, "tol", mp.tol);
              reps = monotonicity_suite(mu, mp);
            } else if (*which == "growth") {
              check_known_keys(pj, {"points", "radii", "seed"});
              GrowthSuiteParams gp;
              gp.points = param_or(pj, "points", gp.points);
              gp.radii = param_or(pj, "radii", gp.radii);
              gp.seed = param_or(pj, "seed", gp.seed);
              reps = growth_suite(mu, energy_atoms(imm), gp).reports;
            } else if (*which == "sobolev") {
              check_known_keys(pj, {"bumps", "p", "q", "radius_lo", "radius_hi", "seed"});
              SobolevSuiteParams sp;
              sp.bumps = param_or(pj, "bumps", sp.bumps);
              sp.p = param_or(pj, "p", sp.p);
              sp.q = param_or(pj, "q", sp.q);
              sp.radius_lo = param_or(pj, "radius_lo", sp.radius_lo);
              sp.radius_hi = param_or(pj, "radius_hi", sp.radius_hi);
              sp.seed = param_or(pj, "seed", sp.seed);
              reps = sobolev_suite(mu, sp);
            } else {
              check_known_keys(pj, {});
              reps.push_back(hardy_iterated_check(mu, energy(imm).total));
            }
            std::string text;
            bool all_ok = true;
            for (std::size_t i = 0; i < reps.size(); ++i) {
              json r = report_header("inequality");
              r.update(to_json(reps[i]));
              r["inequality"] = *which;
              r["instance"] = i;
              if (imm.shape_id) r["shape"] = *imm.shape_id;
              text += dump_report(r) + "\n";
              all_ok = all_ok && reps[i].margin_ok;
            }
            if (out->report.empty())
              std::cout << text << std::flush;
            else
              atomic_write(out->report, text);
            return *strict && !all_ok ? 1 : 0;
          }};
}

Command slice_command(CLI::App& app) {
  auto* sub = app.add_subcommand("slice", "Slice the image by a sphere, or search for a good slice");
  auto in = std::make_shared<Input>();
  auto out = std::make_shared<Output>();
  auto center = std::make_shared<std::vector<double>>();
  auto radius = std::make_shared<double>(0.0);
  auto search = std::make_shared<bool>(false);
  auto r = std::make_shared<double>(0.5);
  auto counts = std::make_shared<std::vector<int>>(std::vector<int>{3, 3});
  auto csv = std::make_shared<std::string>();
  in->add(sub);
  out->add(sub);
  sub->add_option("--center", *center, "Sphere center q, or the search point p with --search")->expected(1, -1);
  sub->add_option("--radius", *radius, "Sphere radius rho");
  sub->add_flag("--search", *search, "Search q near --center and rho in [0.6 r, 0.9 r]");
  sub->add_option("--r", *r, "Search scale r")->capture_default_str();
  sub->add_option("--grid", *counts, "Search lattice sizes for q and rho")->expected(2);
  sub->add_option("--csv", *csv, "Slice geometry CSV, one row per cell");
  return {sub, [=] {
            const auto imm = in->load();
            if (center->empty()) throw Error(ErrorCode::invalid_argument, "--center is required");
            json rep = report_header("slice");
            Slice s;
            if (*search) {
              auto res = good_slice_search(imm, to_vec(*center), *r, (*counts)[0], (*counts)[1]);
              rep["search"] = to_json(res);
              s = std::move(res.slice);
            } else {
              if (!(*radius > 0)) throw Error(ErrorCode::invalid_argument, "--radius must be > 0");
              s = level_set_slice(imm, to_vec(*center), *radius);
            }
            if (s.cells > 0 && !s.has_second_form) slice_second_form(s);
            rep.update(slice_summary(s));
            if (s.cells > 0) {
              const auto fit = plane_fit(s);
              rep["plane_fit"] = to_json(fit);
              rep["graph"] = to_json(graph_extract(s, fit));
            }
            if (!csv->empty()) {
              slice_csv(s, *csv);
              rep["slice_csv"] = *csv;
            }
            out->emit(rep);
            return 0;
          }};
}

Command morse_command(CLI::App& app) {
  auto* sub = app.add_subcommand("morse", "Count critical points of a height function on the inverted image");
  auto in = std::make_shared<Input>();
  auto out = std::make_shared<Output>();
  auto dir = std::make_shared<std::vector<double>>();
  auto seed = std::make_shared<std::uint64_t>(0);
  auto Q = std::make_shared<std::vector<double>>();
  auto R = std::make_shared<double>(1.0);
  auto tc = std::make_shared<bool>(false);
  in->add(sub);
  out->add(sub);
  sub->add_option("--direction", *dir, "Height direction e")->expected(1, -1);
  sub->add_option("--seed", *seed, "Seed of the random direction when --direction is absent")->capture_default_str();
  sub->add_option("--invert-center", *Q, "Inversion center Q")->expected(1, -1)->required();
  sub->add_option("--invert-radius", *R, "Inversion radius")->capture_default_str();
  sub->add_flag("--total-curvature", *tc, "Also integrate |det(g^-1 II)| over the original image");
  return {sub, [=] {
            const auto imm = in->load();
            const Vec q = to_vec(*Q);
            const auto rep = dir->empty() ? critical_point_count_seeded(imm, *seed, q, *R)
                                          : critical_point_count(imm, to_vec(*dir), q, *R);
            json r = report_header("morse");
            r.update(to_json(rep));
            r["invert_center"] = *Q;
            r["invert_radius"] = *R;
            if (*tc) r["total_curvature"] = total_curvature_integral(imm);
            out->emit(r);
            return 0;
          }};
}

Command chart_command(CLI::App& app) {
  auto* sub = app.add_subcommand("chart", "Solve for harmonic coordinates on one chart");
  auto in = std::make_shared<Input>();
  auto out = std::make_shared<Output>();
  auto chart = std::make_shared<int>(0);
  auto boundary = std::make_shared<std::string>("plane-fit");
  auto tol = std::make_shared<double>(1e-10);
  auto coords = std::make_shared<std::string>();
  auto other = std::make_shared<int>(-1);
  in->add(sub);
  out->add(sub);
  sub->add_option("--chart", *chart, "Chart index")->capture_default_str();
  sub->add_option("--boundary", *boundary, "Dirichlet data")
      ->check(CLI::IsMember({"plane-fit", "identity"}))
      ->capture_default_str();
  sub->add_option("--tol", *tol, "Relative residual of the linear solve")->capture_default_str();
  sub->add_option("--coords-out", *coords, "Binary dump of u, n little-endian float64 per node");
  sub->add_option("--transition-to", *other, "Also solve this chart and report the transition map");
  return {sub, [=] {
            const auto imm = in->load();
            BoundaryMap bm;
            bm.kind = *boundary == "identity" ? BoundaryKind::identity : BoundaryKind::plane_fit;
            HarmonicOptions opt;
            opt.tol = *tol;
            const auto hc = solve_harmonic_coordinates(imm, *chart, bm, opt);
            json r = report_header("chart");
            r.update(to_json(hc));
            r["pde"] = to_json(harmonic_metric_pde_residual(hc));
            if (!coords->empty()) {
              atomic_write(*coords, encode_doubles(hc.coords));
              r["coords_file"] = *coords;
            }
            if (*other >= 0) r["transition"] = to_json(transition_map(hc, solve_harmonic_coordinates(imm, *other, bm, opt)));
            out->emit(r);
            return 0;
          }};
}

Command goodbad_command(CLI::App& app) {
  auto* sub = app.add_subcommand("goodbad", "Split atoms by energy threshold radius at scale r");
  auto in = std::make_shared<Input>();
  auto out = std::make_shared<Output>();
  auto eps0 = std::make_shared<double>(kDefaultEps0);
  auto r = std::make_shared<double>(0.05);
  in->add(sub);
  out->add(sub);
  sub->add_option("--eps0", *eps0, "Energy threshold")->capture_default_str();
  sub->add_option("--r", *r, "Scale")->capture_default_str();
  return {sub, [=] {
            const auto imm = in->load();
            const auto atoms = energy_atoms(imm);
            const auto g = good_bad_decomposition(atoms, all_thresholds(atoms, *eps0), *eps0, *r);
            json rep = report_header("goodbad");
            rep.update(to_json(g));
            out->emit(rep);
            return 0;
          }};
}

Command accept_command(CLI::App& app) {
  auto* sub = app.add_subcommand("accept", "Run the acceptance suite; exit 0 iff every criterion passes");
  auto out = std::make_shared<Output>();
  auto ids = std::make_shared<std::vector<int>>();
  out->add(sub);
  sub->add_option("--criteria", *ids, "Run only these criteria")->delimiter(',')->check(CLI::Range(1, kCriterionCount));
  return {sub, [=] {
            const auto results = run_acceptance(*ids, [](const CriterionResult& c) {
              std::cerr << format_result(c) << std::endl;
            });
            json list = json::array();
            int passed = 0;
            for (const auto& c : results) {
              passed += c.pass;
              list.push_back({{"id", c.id}, {"name", c.name}, {"pass", c.pass}, {"detail", c.detail},
                              {"seconds", c.seconds}});
            }
            json r = report_header("accept");
            r["criteria"] = list;
            r["passed"] = passed;
            r["total"] = results.size();
            r["all_pass"] = passed == static_cast<int>(results.size());
            out->emit(r);
            return passed == static_cast<int>(results.size()) ? 0 : 1;
          }};
}

}  // namespace

std::vector<Command> register_commands(CLI::App& app) {
  return {shapes_command(app), energy_command(app), norm_command(app),    check_command(app),  slice_command(app),
          morse_command(app),  chart_command(app),  goodbad_command(app), accept_command(app)};
}

}  // namespace immersia::cli
