#include <doctest.h>

#include <cmath>
#include <string>

#include "immersia/error.hpp"
#include "immersia/report.hpp"

using namespace immersia;
using nlohmann::json;

TEST_CASE("schema version is fixed") {
  CHECK(std::string(report_schema_version()) == "1.0.0");
}

TEST_CASE("doubles are written with 17 significant digits") {
  json j = {{"x", 0.1}, {"y", 1.0 / 3.0}, {"z", kInfinity}, {"w", std::nan("")}};
  const auto text = dump_report(j);
  CHECK(text.find("\"x\":0.10000000000000001") != std::string::npos);
  CHECK(text.find("\"y\":0.33333333333333331") != std::string::npos);
  CHECK(text.find("\"z\":null") != std::string::npos);
  CHECK(text.find("\"w\":null") != std::string::npos);
  CHECK(json::parse(text)["y"].get<double>() == 1.0 / 3.0);
}

TEST_CASE("emitted reports round-trip through the validator") {
  EnergyReport e;
  e.total = 421.1;
  e.per_term = {{0, 421.0}, {1, 0.1}};
  e.resolution = 9;
  e.region_nodes = 100;
  json r = report_header("energy");
  r.update(to_json(e));
  r["mode"] = "auto";
  const json back = json::parse(dump_report(r));
  CHECK(validate_report(back, true).empty());
  CHECK(back == json::parse(dump_report(back)));

  InequalityReport q;
  q.lhs = 1.0;
  q.rhs = 2.0;
  q.parameters = {{"a", 2.0}};
  q.finish(kInequalityTol);
  json qi = report_header("inequality");
  qi.update(to_json(q));
  qi["inequality"] = "hardy";
  qi["instance"] = 0;
  CHECK(validate_report(json::parse(dump_report(qi)), true).empty());

  GoodBadDecomposition g;
  g.r = 0.1;
  g.eps0 = 0.05;
  g.bad = {0, 1};
  g.cover = {{{0.0, 1.0}, 0.2}};
  json gj = report_header("goodbad");
  gj.update(to_json(g));
  CHECK(validate_report(json::parse(dump_report(gj)), true).empty());
}

TEST_CASE("strict mode rejects unknown fields") {
  json r = report_header("error");
  r["error"] = "io";
  r["message"] = "cannot open";
  CHECK(validate_report(r, true).empty());
  r["extra"] = 1;
  CHECK(validate_report(r, false).empty());
  CHECK(validate_report(r, true) == "unknown field: extra");
}

TEST_CASE("validator catches missing and mistyped fields") {
  json r = report_header("norm");
  CHECK(validate_report(r, false).rfind("missing field", 0) == 0);
  r = {{"report_schema_version", "0.9.0"}, {"report", "norm"}};
  CHECK(validate_report(r, false).rfind("schema version mismatch", 0) == 0);
  r = report_header("goodbad");
  r.update({{"r", "big"}, {"eps0", 0.05}, {"atoms", 1}, {"bad_count", 0}, {"cover_size", 0}, {"cover", json::array()}});
  CHECK(validate_report(r, false) == "wrong type for field: r");
  r = report_header("nonsense");
  CHECK(validate_report(r, false) == "unknown report kind: nonsense");
}

TEST_CASE("every kind is known") {
  const auto kinds = report_kinds();
  for (const char* k : {"shapes", "energy", "norm", "inequality", "slice", "morse", "chart", "goodbad", "accept", "error"})
    CHECK(std::find(kinds.begin(), kinds.end(), k) != kinds.end());
}

TEST_CASE("unknown parameters are rejected by name") {
  CHECK_NOTHROW(check_known_keys(json{{"a", 1}}, {"a", "b"}));
  try {
    check_known_keys(json{{"a", 1}, {"zz", 2}}, {"a"});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_argument);
    CHECK(std::string(e.what()) == "unknown parameter: zz");
  }
}
