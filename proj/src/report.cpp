#include "immersia/report.hpp"

#include <cmath>
#include <cstdio>
#include <map>

#include "immersia/error.hpp"

namespace immersia {

using nlohmann::json;

const char* report_schema_version() { return "1.0.0"; }

namespace {

void write_value(const json& j, std::string& out) {
  switch (j.type()) {
    case json::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        out += json(it.key()).dump();
        out += ':';
        write_value(it.value(), out);
      }
      out += '}';
      break;
    }
    case json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ',';
        write_value(j[i], out);
      }
      out += ']';
      break;
    }
    case json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) {
        out += "null";
        break;
      }
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out += buf;
      break;
    }
    default:
      out += j.dump();
  }
}

enum class FieldType { number, number_or_null, integer, boolean, string, array, object };

struct Field {
  const char* name;
  FieldType type;
  bool required;
};

using Schema = std::vector<Field>;

const std::map<std::string, Schema>& schemas() {
  using T = FieldType;
  static const std::map<std::string, Schema> table = {
      {"shapes",
       {{"shape", T::object, true}, {"n", T::integer, true}, {"d", T::integer, true}, {"charts", T::integer, true},
        {"nodes", T::integer, true}, {"resolution", T::integer, true}, {"manifest", T::string, true},
        {"format", T::string, true}, {"fields_csv", T::string, false}}},
      {"energy",
       {{"total", T::number, true}, {"per_term", T::array, true}, {"resolution", T::integer, true},
        {"region_nodes", T::integer, true}, {"center", T::array, false}, {"radius", T::number, false},
        {"mode", T::string, true}, {"fields_csv", T::string, false}}},
      {"norm",
       {{"p", T::number, true}, {"q", T::number_or_null, true}, {"lorentz", T::number, true},
        {"weak", T::number, true}, {"lebesgue", T::number, true}, {"samples", T::integer, true},
        {"total_weight", T::number, true}}},
      {"inequality",
       {{"inequality", T::string, true}, {"lhs", T::number, true}, {"rhs", T::number, true},
        {"ratio", T::number_or_null, true}, {"margin_ok", T::boolean, true}, {"degenerate", T::boolean, true},
        {"parameters", T::object, true}, {"shape", T::string, false}, {"instance", T::integer, false}}},
      {"slice",
       {{"q", T::array, true}, {"rho", T::number, true}, {"cells", T::integer, true},
        {"components", T::integer, true}, {"area", T::number, true}, {"skipped", T::integer, true},
        {"A_norm", T::number, true}, {"II_norm", T::number, true}, {"majorant_margin", T::number, true},
        {"oscillation", T::number, true}, {"search", T::object, false}, {"plane_fit", T::object, false},
        {"graph", T::object, false}, {"slice_csv", T::string, false}}},
      {"morse",
       {{"count", T::integer, true}, {"nodes", T::array, true}, {"direction", T::array, true},
        {"points", T::array, true}, {"candidate_cells", T::integer, true},
        {"near_critical_fraction", T::number, true}, {"warning", T::boolean, true}, {"attempts", T::integer, true},
        {"invert_center", T::array, true}, {"invert_radius", T::number, true},
        {"total_curvature", T::number, false}}},
      {"chart",
       {{"chart", T::integer, true}, {"boundary", T::string, true}, {"solved", T::boolean, true},
        {"residuals", T::array, true}, {"iterations", T::array, true}, {"used_direct", T::boolean, true},
        {"min_jacobian_det", T::number, true}, {"estimates", T::object, true},
        {"input_estimates", T::object, true}, {"pde", T::object, true}, {"coords_file", T::string, false},
        {"transition", T::object, false}}},
      {"goodbad",
       {{"r", T::number, true}, {"eps0", T::number, true}, {"atoms", T::integer, true},
        {"bad_count", T::integer, true}, {"cover_size", T::integer, true}, {"cover", T::array, true}}},
      {"accept",
       {{"criteria", T::array, true}, {"passed", T::integer, true}, {"total", T::integer, true},
        {"all_pass", T::boolean, true}}},
      {"error", {{"error", T::string, true}, {"message", T::string, true}}},
  };
  return table;
}

bool type_ok(const json& v, FieldType t) {
  switch (t) {
    case FieldType::number: return v.is_number();
    case FieldType::number_or_null: return v.is_number() || v.is_null();
    case FieldType::integer: return v.is_number_integer();
    case FieldType::boolean: return v.is_boolean();
    case FieldType::string: return v.is_string();
    case FieldType::array: return v.is_array();
    case FieldType::object: return v.is_object();
  }
  return false;
}

json vec_json(const std::vector<double>& v) { return json(v); }

json estimates_json(const MetricEstimates& e) {
  return {{"sup_deviation", e.sup_deviation}, {"d1_lorentz", e.d1_lorentz}, {"d2_lorentz", e.d2_lorentz}};
}

}  // namespace

std::string dump_report(const json& j) {
  std::string out;
  write_value(j, out);
  return out;
}

json report_header(const std::string& kind) {
  return {{"report_schema_version", report_schema_version()}, {"report", kind}};
}

json to_json(const EnergyReport& r) {
  json terms = json::array();
  for (const auto& [i, v] : r.per_term) terms.push_back({{"order", i}, {"value", v}});
  return {{"total", r.total}, {"per_term", terms}, {"resolution", r.resolution}, {"region_nodes", r.region_nodes}};
}

json to_json(const InequalityReport& r) {
  json params = json::object();
  for (const auto& [k, v] : r.parameters) params[k] = v;
  return {{"lhs", r.lhs},           {"rhs", r.rhs},
          {"ratio", r.ratio},       {"margin_ok", r.margin_ok},
          {"degenerate", r.degenerate}, {"parameters", params}};
}

json slice_summary(const Slice& s) {
  double margin = -kInfinity;
  if (s.has_second_form)
    for (std::size_t c = 0; c < s.cells; ++c) margin = std::max(margin, s.A_norm[c] - s.A_bound[c]);
  return {{"q", vec_json(s.q)},
          {"rho", s.rho},
          {"cells", s.cells},
          {"components", s.component_count},
          {"area", s.total_area()},
          {"skipped", s.skipped.size()},
          {"A_norm", s.has_second_form ? slice_A_norm(s) : 0.0},
          {"II_norm", slice_II_norm(s)},
          {"majorant_margin", s.cells ? margin : 0.0},
          {"oscillation", s.cells ? gauss_oscillation(s) : 0.0}};
}

json to_json(const SliceSearchResult& r) {
  return {{"q", vec_json(r.q)},
          {"rho", r.rho},
          {"quality", r.quality},
          {"mean_quality", r.mean_quality},
          {"candidates", r.candidates},
          {"admissible", r.admissible},
          {"ball_energy", r.ball_energy},
          {"eps", r.eps},
          {"c_A", r.c_A},
          {"c_II", r.c_II},
          {"c_vol", r.c_vol},
          {"c_mean", r.c_mean}};
}

json to_json(const PlaneFit& f) {
  return {{"q_S", vec_json(f.q_S)}, {"residual", f.residual}, {"offset", f.offset},
          {"mean_norms", vec_json(f.mean_norms)}};
}

json to_json(const SphereGraph& g) {
  return {{"lattice_points", g.lattice_points}, {"covered", g.covered}, {"degree", g.degree},
          {"sup", g.sup},                       {"grad_sup", g.grad_sup}, {"hess_Ln", g.hess_Ln}};
}

json to_json(const CriticalPointReport& r) {
  json nodes = json::array(), points = json::array();
  for (const auto& p : r.points) {
    nodes.push_back(p.label);
    points.push_back({{"chart", p.chart}, {"node", p.node}, {"label", p.label}, {"pos", vec_json(p.pos)},
                      {"h", p.h}, {"index", p.index}});
  }
  return {{"count", r.count},
          {"nodes", nodes},
          {"direction", vec_json(r.e)},
          {"points", points},
          {"candidate_cells", r.candidate_cells},
          {"near_critical_fraction", r.near_critical_fraction},
          {"warning", r.warning},
          {"attempts", r.attempts}};
}

json to_json(const HarmonicChart& hc) {
  const char* kind = hc.boundary == BoundaryKind::plane_fit  ? "plane-fit"
                     : hc.boundary == BoundaryKind::identity ? "identity"
                                                             : "custom";
  return {{"chart", hc.chart},
          {"boundary", kind},
          {"solved", hc.solved},
          {"residuals", vec_json(hc.residuals)},
          {"iterations", json(hc.iterations)},
          {"used_direct", hc.used_direct},
          {"min_jacobian_det", hc.min_jacobian_det},
          {"estimates", estimates_json(hc.estimates)},
          {"input_estimates", estimates_json(hc.input_estimates)}};
}

json to_json(const PdeResidualReport& r) {
  return {{"residual_sup", r.residual_sup}, {"residual_rms", r.residual_rms}, {"lhs_sup", r.lhs_sup},
          {"ricci_sup", r.ricci_sup},       {"Q_sup", r.Q_sup},               {"C_n", r.C_n},
          {"relative", r.relative},         {"flagged", r.flagged},           {"nodes", r.nodes}};
}

json to_json(const TransitionReport& r) {
  return {{"sup", r.sup},
          {"lipschitz", r.lipschitz},
          {"isometry_deviation", r.isometry_deviation},
          {"hess_lorentz", r.hess_lorentz},
          {"third_lorentz", r.third_lorentz},
          {"hess_sup", r.hess_sup},
          {"overlap_nodes", r.overlap_nodes},
          {"overlap_cells", r.overlap_cells},
          {"interp_tol", r.interp_tol}};
}

json to_json(const CompositionReport& r) {
  return {{"max_error", r.max_error}, {"tolerance", r.tolerance}, {"nodes", r.nodes}, {"ok", r.ok}};
}

json to_json(const GoodBadDecomposition& g) {
  json cover = json::array();
  for (const auto& [c, rad] : g.cover) cover.push_back({{"center", vec_json(c)}, {"radius", rad}});
  return {{"r", g.r},
          {"eps0", g.eps0},
          {"atoms", g.bad.size()},
          {"bad_count", g.bad_count()},
          {"cover_size", g.cover_size()},
          {"cover", cover}};
}

std::vector<std::string> report_kinds() {
  std::vector<std::string> out;
  for (const auto& [k, _] : schemas()) out.push_back(k);
  return out;
}

std::string validate_report(const json& j, bool strict) {
  if (!j.is_object()) return "report is not an object";
  if (!j.contains("report_schema_version") || !j["report_schema_version"].is_string())
    return "missing report_schema_version";
  if (j["report_schema_version"].get<std::string>() != report_schema_version())
    return "schema version mismatch: " + j["report_schema_version"].get<std::string>();
  if (!j.contains("report") || !j["report"].is_string()) return "missing report kind";
  const auto kind = j["report"].get<std::string>();
  auto it = schemas().find(kind);
  if (it == schemas().end()) return "unknown report kind: " + kind;
  for (const auto& f : it->second) {
    if (!j.contains(f.name)) {
      if (f.required) return "missing field: " + std::string(f.name);
      continue;
    }
    if (!type_ok(j[f.name], f.type)) return "wrong type for field: " + std::string(f.name);
  }
  if (strict) {
    for (auto e = j.begin(); e != j.end(); ++e) {
      if (e.key() == "report_schema_version" || e.key() == "report") continue;
      bool known = false;
      for (const auto& f : it->second) known = known || e.key() == f.name;
      if (!known) return "unknown field: " + e.key();
    }
  }
  return {};
}

void check_known_keys(const json& params, const std::vector<std::string>& allowed) {
  if (!params.is_object()) throw Error(ErrorCode::invalid_argument, "parameters must be a JSON object");
  for (auto e = params.begin(); e != params.end(); ++e) {
    bool known = false;
    for (const auto& a : allowed) known = known || a == e.key();
    if (!known) throw Error(ErrorCode::invalid_argument, "unknown parameter: " + e.key());
  }
}

}  // namespace immersia
