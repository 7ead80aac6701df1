#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "immersia/chart_io.hpp"
#include "immersia/error.hpp"
#include "immersia/immersion.hpp"

using namespace immersia;

namespace {

ShapeSpec shape(ShapeKind k, int n = 4) {
  ShapeSpec s;
  s.kind = k;
  s.n = n;
  return s;
}

std::filesystem::path scratch_dir(const char* name) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("jet products and quotients match hand derivatives") {
  const auto& L = JetLayout::get(2);
  const Jet x = Jet::variable(L, 0, 0.7), y = Jet::variable(L, 1, -0.4);
  const Jet f = x * x * y + sin(x * y);
  const double a = 0.7, b = -0.4;
  CHECK(f.value() == doctest::Approx(a * a * b + std::sin(a * b)).epsilon(1e-15));
  CHECK(f.derivative({1, 0, 0, 0}) == doctest::Approx(2 * a * b + b * std::cos(a * b)).epsilon(1e-14));
  CHECK(f.derivative({1, 1, 0, 0}) ==
        doctest::Approx(2 * a + std::cos(a * b) - a * b * std::sin(a * b)).epsilon(1e-14));
  CHECK(f.derivative({0, 3, 0, 0}) == doctest::Approx(-a * a * a * std::cos(a * b)).epsilon(1e-14));
  const Jet q = x / (1.0 + y * y);
  CHECK(q.derivative({0, 2, 0, 0}) ==
        doctest::Approx(a * (6 * b * b - 2) / std::pow(1 + b * b, 3)).epsilon(1e-13));
  const Jet r = sqrt(x);
  CHECK(r.derivative({3, 0, 0, 0}) == doctest::Approx(3.0 / 8.0 * std::pow(a, -2.5)).epsilon(1e-14));
}

TEST_CASE("grid weights integrate the box volume") {
  ChartGrid g({5, 7, 9}, {{0.0, 1.0}, {-1.0, 1.0}, {0.0, 0.5}});
  double sum = 0.0;
  for (std::size_t i = 0; i < g.node_count(); ++i) sum += g.cell_weight(g.multi(i));
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(g.index(g.multi(123)) == 123);
  CHECK(g.is_boundary(0));
}

TEST_CASE("round sphere nodes lie on the sphere") {
  const auto imm = build_shape(shape(ShapeKind::round_sphere), 9);
  CHECK(imm.charts.size() == 10);
  double worst = 0.0;
  for (const auto& c : imm.charts)
    for (std::size_t i = 0; i < c.grid.node_count(); ++i) {
      double r2 = 0.0;
      for (int a = 0; a < imm.d; ++a) r2 += c.at(i, imm.d)[a] * c.at(i, imm.d)[a];
      worst = std::max(worst, std::abs(std::sqrt(r2) - 1.0));
    }
  CHECK(worst < 1e-14);
}

TEST_CASE("numeric derivatives converge to exact ones at second order") {
  ShapeSpec s = shape(ShapeKind::ellipsoid);
  s.semi_axes = {1.0, 0.8, 1.2, 0.9, 1.1};
  double prev = 0.0;
  for (int res : {9, 17}) {
    const auto imm = build_shape(s, res);
    const MultiIndex node{res / 2, res / 3, res / 2, res / 4};
    double err = 0.0;
    for (const MultiIndex& ord : {MultiIndex{1, 0, 0, 0}, MultiIndex{1, 1, 0, 0}, MultiIndex{0, 0, 2, 0}}) {
      const Vec e = derivative(imm, 0, node, ord, DerivativeMode::exact);
      const Vec h = derivative(imm, 0, node, ord, DerivativeMode::numeric);
      err = std::max(err, (e - h).norm());
    }
    if (prev > 0) CHECK(prev / err > 3.0);
    prev = err;
  }
}

TEST_CASE("similarity transforms compose with their inverse") {
  const auto imm = build_shape(shape(ShapeKind::clifford_torus), 7);
  auto T = SimilarityTransform::identity(imm.d);
  T.dilation = 2.5;
  T.translation = Vec::LinSpaced(imm.d, -1.0, 1.0);
  const Eigen::HouseholderQR<Mat> qr(Mat::Random(imm.d, imm.d));
  T.rotation = qr.householderQ();
  if (T.rotation.determinant() < 0) T.rotation.col(0) *= -1.0;
  const auto back = apply_transform(apply_transform(imm, T), T.inverse());
  double worst = 0.0;
  for (std::size_t c = 0; c < imm.charts.size(); ++c)
    for (std::size_t i = 0; i < imm.charts[c].phi.size(); ++i)
      worst = std::max(worst, std::abs(back.charts[c].phi[i] - imm.charts[c].phi[i]));
  CHECK(worst < 1e-13);
}

TEST_CASE("manifests round-trip bit for bit in both formats") {
  const auto imm = build_shape(shape(ShapeKind::dumbbell), 5);
  const auto dir = scratch_dir("immersia_io_test");
  for (auto fmt : {ChartFormat::binary, ChartFormat::json}) {
    const auto path = (dir / (fmt == ChartFormat::binary ? "b.json" : "j.json")).string();
    write_immersion(imm, path, fmt);
    const auto back = read_immersion(path);
    REQUIRE(back.charts.size() == imm.charts.size());
    for (std::size_t c = 0; c < imm.charts.size(); ++c) CHECK(back.charts[c].phi == imm.charts[c].phi);
    CHECK(back.exact());
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("binary chart data is little-endian float64") {
  const std::string bytes = encode_doubles({1.0, -2.0});
  REQUIRE(bytes.size() == 16);
  CHECK(static_cast<unsigned char>(bytes[7]) == 0x3f);
  CHECK(static_cast<unsigned char>(bytes[6]) == 0xf0);
  CHECK(static_cast<unsigned char>(bytes[15]) == 0xc0);
  CHECK(decode_doubles(bytes) == std::vector<double>{1.0, -2.0});
}

TEST_CASE("invalid shapes are rejected") {
  ShapeSpec s = shape(ShapeKind::ellipsoid);
  s.semi_axes = {1.0, 1.0};
  CHECK_THROWS_AS(build_shape(s, 9), Error);
  CHECK_THROWS_AS(build_shape(shape(ShapeKind::round_sphere, 5), 9), Error);
  CHECK_THROWS_AS(shape_kind_from_name("klein_bottle"), Error);
}
