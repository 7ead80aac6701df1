#include <doctest.h>

#include <cmath>
#include <numbers>

#include "immersia/error.hpp"
#include "immersia/measure.hpp"
#include "immersia/suites.hpp"

using namespace immersia;

namespace {

ShapeSpec shape(ShapeKind k, int n = 4) {
  ShapeSpec s;
  s.kind = k;
  s.n = n;
  return s;
}

constexpr double kPi = std::numbers::pi;

}  // namespace

TEST_CASE("unit ball volumes") {
  CHECK(unit_ball_volume(1) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(unit_ball_volume(2) == doctest::Approx(kPi).epsilon(1e-15));
  CHECK(unit_ball_volume(3) == doctest::Approx(4.0 * kPi / 3.0).epsilon(1e-15));
  CHECK(unit_ball_volume(4) == doctest::Approx(kPi * kPi / 2.0).epsilon(1e-15));
}

TEST_CASE("pushforward mass is the surface volume") {
  const auto mu = pushforward(build_shape(shape(ShapeKind::round_sphere), 17));
  // trapezoid weights: 0.4% low at res 17
  CHECK(mu.total() == doctest::Approx(8.0 * kPi * kPi / 3.0).epsilon(6e-3));
  const auto plane = pushforward(build_shape(shape(ShapeKind::plane), 9));
  CHECK(plane.total() == doctest::Approx(16.0).epsilon(1e-12));
}

TEST_CASE("fractional ball shares reproduce flat ball volumes") {
  const auto mu = pushforward(build_shape(shape(ShapeKind::plane), 33));
  const double x[5] = {0.013, -0.021, 0.007, 0.017, 0.0};
  for (double r : {0.2, 0.3, 0.45, 0.6}) {
    const double ratio = extrinsic_ball_volume(mu, x, r) / (unit_ball_volume(4) * std::pow(r, 4));
    CHECK(ratio == doctest::Approx(1.0).epsilon(0.005));
  }
  CHECK_FALSE(ball_meets_boundary(mu, x, 0.5));
  CHECK(ball_meets_boundary(mu, x, 1.5));
}

TEST_CASE("ball fraction is a ramp in the volume coordinate") {
  const auto mu = pushforward(build_shape(shape(ShapeKind::plane), 9));
  const std::size_t i = mu.size() / 2;
  CHECK(ball_fraction(mu, i, 0.0, 1.0) == 1.0);
  CHECK(ball_fraction(mu, i, 2.0, 1.0) == 0.0);
  CHECK(ball_fraction(mu, i, 1.0, 1.0) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("density counts preimages") {
  const auto plane = pushforward(build_shape(shape(ShapeKind::plane), 17));
  const double x[5] = {0, 0, 0, 0, 0};
  const double c = plane.cell_max;
  const auto d1 = density_at(plane, x, {8 * c, 6 * c, 4 * c});
  CHECK(d1.rounded == 1);
  CHECK(d1.conclusive);
  const auto cover = pushforward(build_shape(shape(ShapeKind::double_cover_sphere), 17));
  const auto pts = sample_atoms(cover, 3, 0.0, 4);
  for (std::size_t i : pts) {
    const double ci = cover.cell[i];
    const auto d2 = density_at(cover, cover.position(i), {8 * ci, 6 * ci, 4 * ci});
    CHECK(d2.rounded == 2);
  }
}

TEST_CASE("monotonicity is an identity on the flat plane") {
  const auto mu = pushforward(build_shape(shape(ShapeKind::plane), 33));
  const double x[5] = {0.05, 0.0, -0.03, 0.02, 0.0};
  const auto rep = monotonicity_check(mu, x, 0.3, 0.5);
  CHECK(rep.margin_ok);
  CHECK(rep.lhs / rep.param("leading_rhs") == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("Hardy inequality holds on the sphere") {
  const auto mu = pushforward(build_shape(shape(ShapeKind::round_sphere), 9));
  HardySuiteParams p;
  p.bumps = 4;
  for (const auto& r : hardy_suite(mu, p)) CHECK(r.margin_ok);
}

TEST_CASE("bad sets are empty without curvature and grow with r") {
  const auto atoms = energy_atoms(build_shape(shape(ShapeKind::plane), 9));
  const auto th = all_thresholds(atoms, kDefaultEps0);
  CHECK(good_bad_decomposition(atoms, th, kDefaultEps0, 0.01).bad_count() == 0);
  ShapeSpec db = shape(ShapeKind::dumbbell);
  db.neck_width = 0.1;
  const auto datoms = energy_atoms(build_shape(db, 9));
  const auto dth = all_thresholds(datoms, kDefaultEps0);
  const auto lo = good_bad_decomposition(datoms, dth, kDefaultEps0, 0.05);
  const auto hi = good_bad_decomposition(datoms, dth, kDefaultEps0, 0.1);
  CHECK(lo.bad_count() > 0);
  for (std::size_t i = 0; i < lo.bad.size(); ++i)
    if (lo.bad[i]) CHECK(hi.bad[i]);
  // every bad atom lies in a cover ball
  for (std::size_t i = 0; i < lo.bad.size(); ++i) {
    if (!lo.bad[i]) continue;
    bool covered = false;
    for (const auto& [c, rad] : lo.cover) {
      double s = 0.0;
      for (int a = 0; a < datoms.d; ++a) s += (c[a] - datoms.position(i)[a]) * (c[a] - datoms.position(i)[a]);
      covered = covered || std::sqrt(s) <= rad * (1.0 + 1e-12);
    }
    CHECK(covered);
  }
}

TEST_CASE("corpus shapes build") {
  for (const auto& c : analytic_corpus()) {
    CHECK(c.spec.n == 4);
    CHECK_NOTHROW(build_shape(c.spec, 5));
  }
  CHECK_THROWS_AS(corpus_shape("nope"), Error);
}
