#include "immersia/chart_io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "immersia/error.hpp"

namespace immersia {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
  return r;
}

std::string read_file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string encode_doubles(const std::vector<double>& v) {
  std::string out(v.size() * 8, '\0');
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(v[i]));
    std::memcpy(out.data() + 8 * i, &bits, 8);
  }
  return out;
}

std::vector<double> decode_doubles(const std::string& bytes) {
  if (bytes.size() % 8 != 0) throw Error(ErrorCode::io, "binary chart size is not a multiple of 8");
  std::vector<double> v(bytes.size() / 8);
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, bytes.data() + 8 * i, 8);
    v[i] = std::bit_cast<double>(to_little(bits));
  }
  return v;
}

void atomic_write(const std::string& path, const std::string& bytes) {
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::io, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw Error(ErrorCode::io, "rename to " + path + " failed: " + ec.message());
}

json shape_spec_to_json(const ShapeSpec& s) {
  json j;
  j["kind"] = shape_kind_name(s.kind);
  j["n"] = s.n;
  j["codim"] = s.codim;
  j["radius"] = s.radius;
  j["semi_axes"] = s.semi_axes;
  j["extent"] = s.extent;
  j["base"] = shape_kind_name(s.base);
  j["amplitude"] = s.amplitude;
  j["frequency"] = s.frequency;
  j["neck_width"] = s.neck_width;
  return j;
}

ShapeSpec shape_spec_from_json(const json& j) {
  ShapeSpec s;
  s.kind = shape_kind_from_name(j.at("kind").get<std::string>());
  s.n = j.value("n", s.n);
  s.codim = j.value("codim", s.codim);
  s.radius = j.value("radius", s.radius);
  s.semi_axes = j.value("semi_axes", s.semi_axes);
  s.extent = j.value("extent", s.extent);
  if (j.contains("base")) s.base = shape_kind_from_name(j.at("base").get<std::string>());
  s.amplitude = j.value("amplitude", s.amplitude);
  s.frequency = j.value("frequency", s.frequency);
  s.neck_width = j.value("neck_width", s.neck_width);
  return s;
}

void write_immersion(const SampledImmersion& imm, const std::string& manifest_path, ChartFormat format) {
  fs::path mpath(manifest_path);
  json m;
  m["n"] = imm.n;
  m["d"] = imm.d;
  if (imm.shape_id) m["shape_id"] = *imm.shape_id;
  if (imm.spec && imm.analytic && !imm.charts.empty()) {
    m["shape"] = shape_spec_to_json(*imm.spec);
    m["resolution"] = imm.charts.front().grid.dims().front();
  }
  if (!imm.overlaps.empty()) {
    json ov = json::array();
    for (const auto& [a, b] : imm.overlaps) ov.push_back({a, b});
    m["overlaps"] = ov;
  }
  json charts = json::array();
  for (std::size_t c = 0; c < imm.charts.size(); ++c) {
    const auto& ch = imm.charts[c];
    json jc;
    jc["dims"] = ch.grid.dims();
    json bounds = json::array();
    for (const auto& b : ch.grid.bounds()) bounds.push_back({b.lo, b.hi});
    jc["bounds"] = bounds;
    if (format == ChartFormat::binary) {
      std::string name = mpath.stem().string() + ".chart" + std::to_string(c) + ".bin";
      atomic_write((mpath.parent_path() / name).string(), encode_doubles(ch.phi));
      jc["data_file"] = name;
    } else {
      jc["data"] = ch.phi;
    }
    charts.push_back(jc);
  }
  m["charts"] = charts;
  atomic_write(manifest_path, m.dump(2) + "\n");
}

SampledImmersion read_immersion(const std::string& manifest_path) {
  fs::path mpath(manifest_path);
  json m;
  try {
    m = json::parse(read_file_bytes(mpath));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::io, std::string("manifest parse error: ") + e.what());
  }
  SampledImmersion imm;
  try {
    imm.n = m.at("n").get<int>();
    imm.d = m.at("d").get<int>();
    if (m.contains("shape_id")) imm.shape_id = m["shape_id"].get<std::string>();
    if (m.contains("overlaps"))
      for (const auto& p : m["overlaps"]) imm.overlaps.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
    for (const auto& jc : m.at("charts")) {
      std::vector<int> dims = jc.at("dims").get<std::vector<int>>();
      std::vector<Interval> bounds;
      for (const auto& b : jc.at("bounds")) bounds.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
      Chart ch{ChartGrid(dims, bounds), {}};
      if (jc.contains("data_file")) {
        ch.phi = decode_doubles(read_file_bytes(mpath.parent_path() / jc["data_file"].get<std::string>()));
      } else {
        ch.phi = jc.at("data").get<std::vector<double>>();
      }
      imm.charts.push_back(std::move(ch));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::io, std::string("manifest field error: ") + e.what());
  }
  imm.validate();
  if (m.contains("shape") && m.contains("resolution")) {
    SampledImmersion ref = build_shape(shape_spec_from_json(m["shape"]), m["resolution"].get<int>());
    bool same = ref.n == imm.n && ref.d == imm.d && ref.charts.size() == imm.charts.size();
    for (std::size_t c = 0; same && c < ref.charts.size(); ++c) {
      const auto& a = ref.charts[c].phi;
      const auto& b = imm.charts[c].phi;
      same = a.size() == b.size() && ref.charts[c].grid.dims() == imm.charts[c].grid.dims();
      for (std::size_t i = 0; same && i < a.size(); ++i) same = std::abs(a[i] - b[i]) <= 1e-12 * (1.0 + std::abs(a[i]));
    }
    if (same) {
      imm.analytic = ref.analytic;
      imm.spec = ref.spec;
    }
  }
  return imm;
}

}  // namespace immersia
