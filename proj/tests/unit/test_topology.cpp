#include <doctest.h>

#include <cmath>
#include <numbers>

#include "immersia/error.hpp"
#include "immersia/topology.hpp"

using namespace immersia;

namespace {

ShapeSpec shape(ShapeKind k, int n = 4) {
  ShapeSpec s;
  s.kind = k;
  s.n = n;
  return s;
}

}  // namespace

TEST_CASE("inversion is an involution") {
  const auto imm = build_shape(shape(ShapeKind::round_sphere), 9);
  Vec Q = Vec::Zero(5);
  Q[0] = 3.0;
  Q[1] = 1.0;
  const auto back = sphere_inversion(sphere_inversion(imm, Q, 2.0), Q, 2.0);
  double worst = 0.0;
  for (std::size_t c = 0; c < imm.charts.size(); ++c)
    for (std::size_t i = 0; i < imm.charts[c].phi.size(); ++i)
      worst = std::max(worst, std::abs(back.charts[c].phi[i] - imm.charts[c].phi[i]));
  CHECK(worst < 1e-13);
  Vec on = Vec::Zero(5);
  on[4] = 1.0;
  CHECK_THROWS_AS(sphere_inversion(imm, on, 1.0), Error);
}

TEST_CASE("seeded directions are deterministic unit vectors") {
  const Vec a = seeded_direction(5, 42), b = seeded_direction(5, 42), c = seeded_direction(5, 42, 1);
  CHECK(a.norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK((a - b).norm() == 0.0);
  CHECK((a - c).norm() > 1e-3);
}

TEST_CASE("height functions on the inverted sphere have two critical points") {
  const auto imm = build_shape(shape(ShapeKind::round_sphere), 13);
  Vec Q = Vec::Zero(5);
  Q[0] = 3.0;
  Q[1] = 1.0;
  const auto rep = critical_point_count_seeded(imm, 0, Q, 2.0);
  CHECK(rep.count == 2);
  int minima = 0, maxima = 0;
  for (const auto& p : rep.points) {
    minima += p.index == 0;
    maxima += p.index == 4;
  }
  CHECK(minima == 1);
  CHECK(maxima == 1);
}

TEST_CASE("total curvature of the round sphere is its volume") {
  // |det(g^{-1} II)| = 1 on the unit sphere
  const double vol = 8.0 * std::numbers::pi * std::numbers::pi / 3.0;
  CHECK(total_curvature_integral(build_shape(shape(ShapeKind::round_sphere), 17)) == doctest::Approx(vol).epsilon(6e-3));
  CHECK(total_curvature_integral(build_shape(shape(ShapeKind::plane), 9)) < 1e-20);
  ShapeSpec c2 = shape(ShapeKind::round_sphere);
  c2.codim = 2;
  CHECK_THROWS_AS(total_curvature_integral(build_shape(c2, 5)), Error);
}

TEST_CASE("height field samples e . psi_Q") {
  const auto imm = build_shape(shape(ShapeKind::round_sphere), 5);
  Vec e = Vec::Zero(5), Q = Vec::Zero(5);
  e[2] = 1.0;
  Q[0] = 3.0;
  const auto hf = height_field(imm, e, Q, 2.0);
  const double* x = imm.charts[0].at(7, 5);
  double r2 = 0.0;
  for (int a = 0; a < 5; ++a) r2 += (x[a] - Q[a]) * (x[a] - Q[a]);
  CHECK(hf.h[0][7] == doctest::Approx(Q[2] + 4.0 * (x[2] - Q[2]) / r2).epsilon(1e-14));
}
