#include <doctest.h>

#include <cmath>
#include <numbers>

#include "immersia/error.hpp"
#include "immersia/slicing.hpp"

using namespace immersia;

namespace {

ShapeSpec shape(ShapeKind k, int n = 4) {
  ShapeSpec s;
  s.kind = k;
  s.n = n;
  return s;
}

constexpr double kPi = std::numbers::pi;

// |A| of a round (n-1)-sphere of radius s inside a sphere of radius rho
double round_A(double s, double rho, int n) { return std::sqrt((n - 1) * (1.0 / (s * s) - 1.0 / (rho * rho))); }

}  // namespace

TEST_CASE("plane cut by a sphere is a round sphere") {
  const auto imm = build_shape(shape(ShapeKind::plane), 17);
  Vec q = Vec::Zero(5);
  q[4] = 0.3;
  Slice s = level_set_slice(imm, q, 0.5);
  slice_second_form(s);
  const double radius = 0.4;
  CHECK(s.component_count == 1);
  CHECK(s.total_area() == doctest::Approx(2.0 * kPi * kPi * std::pow(radius, 3)).epsilon(0.02));
  for (std::size_t c = 0; c < s.cells; ++c) {
    CHECK(s.A_norm[c] == doctest::Approx(round_A(radius, 0.5, 4)).epsilon(0.02));
    CHECK(s.A_norm[c] <= s.A_bound[c] + 1e-10);
    CHECK(std::abs(s.H_comp[c]) < 1e-12);
  }
  const auto fit = plane_fit(s);
  CHECK(fit.offset == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(graph_extract(s, fit).degree == 1);
}

TEST_CASE("latitude slices of the sphere match closed forms") {
  const auto imm = build_shape(shape(ShapeKind::round_sphere), 17);
  const double c = 1.2, rho = 0.5;
  Vec q = Vec::Zero(5);
  q[4] = c;
  Slice s = level_set_slice(imm, q, rho);
  slice_second_form(s);
  const double xn = (1.0 + c * c - rho * rho) / (2.0 * c);
  const double sr = std::sqrt(1.0 - xn * xn);
  CHECK(s.total_area() == doctest::Approx(2.0 * kPi * kPi * sr * sr * sr).epsilon(0.03));
  double worst = 0.0;
  for (std::size_t k = 0; k < s.cells; ++k) worst = std::max(worst, std::abs(s.A_norm[k] / round_A(sr, rho, 4) - 1.0));
  CHECK(worst < 0.03);
  CHECK(gauss_oscillation(s) < 2.0);
  CHECK(slice_II_norm(s) > 0.0);
}

TEST_CASE("double cover slices have covering degree 2") {
  const auto imm = build_shape(shape(ShapeKind::double_cover_sphere), 9);
  Vec q = Vec::Zero(5);
  q[4] = 1.2;
  Slice s = level_set_slice(imm, q, 0.5);
  const auto fit = plane_fit(s);
  CHECK(graph_extract(s, fit).degree == 2);
}

TEST_CASE("spheres missing the image give empty slices") {
  const auto imm = build_shape(shape(ShapeKind::round_sphere), 9);
  Vec q = Vec::Zero(5);
  q[0] = 5.0;
  const Slice s = level_set_slice(imm, q, 0.5);
  CHECK(s.empty());
  CHECK(s.total_area() == 0.0);
}

TEST_CASE("search lattices nest") {
  const auto imm = build_shape(shape(ShapeKind::round_sphere), 9);
  Vec p = Vec::Zero(5);
  p[4] = 1.0;
  const auto a = good_slice_search(imm, p, 0.5, 3, 3);
  const auto b = good_slice_search(imm, p, 0.5, 5, 5, a.ball_energy);
  CHECK(a.candidates == 9);
  CHECK(b.candidates == 25);
  CHECK(b.quality <= a.quality + 1e-15);
  CHECK(a.rho >= 0.3 - 1e-12);
  CHECK(a.rho <= 0.45 + 1e-12);
  CHECK_THROWS_AS(good_slice_search(imm, p, -1.0, 3, 3), Error);
}
