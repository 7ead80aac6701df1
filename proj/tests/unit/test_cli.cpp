#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "immersia/report.hpp"

using nlohmann::json;

namespace {

struct Run {
  int status = -1;
  std::string out, err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run run(const std::string& args, const char* env = "") {
  const std::string out = "cli_stdout.txt", err = "cli_stderr.txt";
  const std::string cmd = std::string(env) + " " IMMERSIA_CLI " " + args + " > " + out + " 2> " + err;
  const int raw = std::system(cmd.c_str());
  Run r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

}  // namespace

TEST_CASE("shapes then energy on the manifest") {
  const Run s = run("shapes --kind round_sphere --n 4 --res 9 --out s4.json");
  REQUIRE(s.status == 0);
  const auto rep = json::parse(s.out);
  CHECK(immersia::validate_report(rep, true).empty());
  CHECK(rep["nodes"] == 10 * 9 * 9 * 9 * 9);
  CHECK(std::filesystem::exists("s4.chart0.bin"));

  const Run e = run("energy --input s4.json --dump-fields fields.csv");
  REQUIRE(e.status == 0);
  const auto ej = json::parse(e.out);
  CHECK(immersia::validate_report(ej, true).empty());
  CHECK(ej["total"].get<double>() == doctest::Approx(128.0 * std::numbers::pi * std::numbers::pi / 3.0).epsilon(0.05));
  const std::string csv = slurp("fields.csv");
  CHECK(csv.rfind("chart,node,i0,i1,i2,i3,II_norm,H_norm,cov_II_norm,min_eig_g\n", 0) == 0);
}

TEST_CASE("reports are byte-identical across thread counts") {
  const Run a = run("--threads 1 energy --kind clifford_torus --res 7");
  const Run b = run("energy --kind clifford_torus --res 7", "IMMERSIA_THREADS=3");
  REQUIRE(a.status == 0);
  CHECK(a.out == b.out);
}

TEST_CASE("norm reads value,weight rows") {
  {
    std::ofstream f("samples.csv");
    f << "value,weight\n1,0.5\n1,1.5\n0,3\n";
  }
  const Run r = run("norm --samples samples.csv --p 2 --q inf");
  REQUIRE(r.status == 0);
  const auto j = json::parse(r.out);
  CHECK(j["q"].is_null());
  CHECK(j["lorentz"].get<double>() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(immersia::validate_report(j, true).empty());
}

TEST_CASE("check emits one JSON line per instance") {
  const Run r = run("check --kind round_sphere --res 9 --inequality monotonicity --params '{\"samples\": 3}'");
  REQUIRE(r.status == 0);
  std::istringstream lines(r.out);
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    CHECK(immersia::validate_report(json::parse(line), true).empty());
    ++count;
  }
  CHECK(count == 3);
}

TEST_CASE("module errors exit 1 with a JSON error") {
  const Run r = run("check --kind round_sphere --res 9 --inequality hardy --params '{\"bogus\": 1}'");
  CHECK(r.status == 1);
  const auto j = json::parse(r.err);
  CHECK(j["report"] == "error");
  CHECK(j["error"] == "invalid-argument");
  CHECK(immersia::validate_report(j, true).empty());
  const Run m = run("energy --input missing.json");
  CHECK(m.status == 1);
  CHECK(json::parse(m.err)["error"] == "io");
}

TEST_CASE("usage errors exit 2 with a JSON error") {
  const Run a = run("frobnicate");
  CHECK(a.status == 2);
  CHECK(json::parse(a.err)["error"] == "usage");
  const Run b = run("energy --mode sideways --kind plane");
  CHECK(b.status == 2);
  CHECK(json::parse(b.err)["report"] == "error");
}

TEST_CASE("accept reports selected criteria") {
  const Run r = run("accept --criteria 3");
  CHECK(r.status == 0);
  const auto j = json::parse(r.out);
  CHECK(immersia::validate_report(j, true).empty());
  CHECK(j["criteria"].size() == 1);
  CHECK(r.err.find("[PASS] 03 lorentz-exactness") != std::string::npos);
}
