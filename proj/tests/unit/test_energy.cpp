#include <doctest.h>

#include <cmath>
#include <numbers>

#include "immersia/energy.hpp"
#include "immersia/error.hpp"
#include "immersia/parallel.hpp"

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

TEST_CASE("sphere energy approaches the umbilic closed form") {
  // |II|^4 = n^2 = 16 on the unit S^4 of volume 8 pi^2 / 3
  const double exact = 128.0 * kPi * kPi / 3.0;
  const auto e9 = energy(build_shape(shape(ShapeKind::round_sphere), 9));
  const auto e17 = energy(build_shape(shape(ShapeKind::round_sphere), 17));
  const double err9 = std::abs(e9.total - exact) / exact, err17 = std::abs(e17.total - exact) / exact;
  CHECK(err17 < 0.02);
  CHECK(err9 / err17 > 3.0);
  REQUIRE(e17.per_term.size() == 2);
  CHECK(e17.per_term[1].second < 1e-10 * e17.total);
}

TEST_CASE("plane carries no energy") {
  const auto e = energy(build_shape(shape(ShapeKind::plane), 9));
  CHECK(e.total < 1e-20);
  const auto atoms = energy_atoms(build_shape(shape(ShapeKind::plane), 9));
  const double x[5] = {0, 0, 0, 0, 0};
  CHECK(radius_threshold(atoms, x, kDefaultEps0) == 1.0);
}

TEST_CASE("energy is scale and rigid-motion invariant") {
  ShapeSpec s = shape(ShapeKind::graph_perturbation);
  s.base = ShapeKind::round_sphere;
  const auto imm = build_shape(s, 9);
  const double base = energy(imm, {}, DerivativeMode::exact).total;
  auto T = SimilarityTransform::identity(imm.d);
  T.dilation = 7.0;
  T.translation = Vec::Constant(imm.d, 3.0);
  T.rotation = Mat::Identity(imm.d, imm.d);
  T.rotation.topLeftCorner(2, 2) << 0.6, -0.8, 0.8, 0.6;
  CHECK(energy(apply_transform(imm, T), {}, DerivativeMode::exact).total == doctest::Approx(base).epsilon(1e-10));
}

TEST_CASE("serial and parallel reductions agree bit for bit") {
  const auto imm = build_shape(shape(ShapeKind::clifford_torus), 9);
  set_thread_count(4);
  const double par = energy(imm, {}, DerivativeMode::automatic, Execution::parallel).total;
  set_thread_count(1);
  const double one = energy(imm, {}, DerivativeMode::automatic, Execution::parallel).total;
  const double ser = energy(imm, {}, DerivativeMode::automatic, Execution::serial).total;
  set_thread_count(0);
  CHECK(par == ser);
  CHECK(one == ser);
}

TEST_CASE("ball energy sums the atoms it contains") {
  const auto imm = build_shape(shape(ShapeKind::round_sphere), 9);
  const auto atoms = energy_atoms(imm);
  const double x[5] = {0, 0, 0, 0, 1};
  CHECK(ball_energy(atoms, x, 10.0) == doctest::Approx(atoms.total()).epsilon(1e-12));
  CHECK(ball_energy(atoms, x, 0.5) < ball_energy(atoms, x, 1.0));
  const double r = radius_threshold(atoms, x, 1.0);
  CHECK(ball_energy(atoms, x, r * (1.0 + 1e-9)) >= 0.5);
  CHECK(ball_energy(atoms, x, r * (1.0 - 1e-9)) < 0.5);
}

TEST_CASE("extrinsic ball energy counts nodes inside") {
  const auto imm = build_shape(shape(ShapeKind::round_sphere), 9);
  Vec c = Vec::Zero(5);
  c[4] = 1.0;
  const auto all = energy(imm);
  const auto ball = energy_in_extrinsic_ball(imm, c, 3.0);
  CHECK(ball.total == doctest::Approx(all.total).epsilon(1e-14));
  CHECK(energy_in_extrinsic_ball(imm, c, 0.5).region_nodes < all.region_nodes);
  CHECK_THROWS_AS(energy_in_extrinsic_ball(imm, c, -1.0), Error);
}

TEST_CASE("energy needs a supported dimension") {
  CHECK_THROWS_AS(energy(build_shape(shape(ShapeKind::round_sphere, 3), 7)), Error);
}
