#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "immersia/error.hpp"
#include "immersia/fixtures.hpp"
#include "immersia/harmonic.hpp"

using namespace immersia;

namespace {

BoundaryMap boundary(BoundaryKind k) {
  BoundaryMap b;
  b.kind = k;
  return b;
}

}  // namespace

TEST_CASE("identity boundary data on a flat chart reproduces the identity") {
  const auto imm = flat_rotated_charts(4, 1, 7);
  const auto H = solve_harmonic_coordinates(imm, 0, boundary(BoundaryKind::identity));
  double err = 0.0;
  for (std::size_t i = 0; i < H.nodes(); ++i) {
    double x[kMaxN];
    H.grid.param(H.grid.multi(i), x);
    for (int a = 0; a < 4; ++a) err = std::max(err, std::abs(H.coords[i * 4 + a] - x[a]));
  }
  CHECK(err < 1e-10);
  const auto pde = harmonic_metric_pde_residual(H);
  CHECK(pde.residual_sup < 1e-8);
  CHECK(pde.ricci_sup < 1e-12);
}

TEST_CASE("solutions obey the discrete maximum principle") {
  const auto imm = sphere_cap_charts(4, 1, 7);
  const auto H = solve_harmonic_coordinates(imm, 0, boundary(BoundaryKind::plane_fit));
  for (double r : H.residuals) CHECK(r <= 1e-10);
  for (int a = 0; a < 4; ++a) {
    double lo = 1e300, hi = -1e300;
    for (std::size_t i = 0; i < H.nodes(); ++i)
      if (H.grid.is_boundary(i)) {
        lo = std::min(lo, H.coords[i * 4 + a]);
        hi = std::max(hi, H.coords[i * 4 + a]);
      }
    for (std::size_t i = 0; i < H.nodes(); ++i) {
      CHECK(H.coords[i * 4 + a] >= lo - 1e-12);
      CHECK(H.coords[i * 4 + a] <= hi + 1e-12);
    }
  }
  CHECK(H.min_jacobian_det > 0.0);
}

TEST_CASE("transition between identical charts is the identity") {
  const auto imm = sphere_cap_charts(4, 1, 7);
  const auto H = solve_harmonic_coordinates(imm, 0, boundary(BoundaryKind::plane_fit));
  const auto T = transition_map(H, H);
  CHECK(T.isometry_deviation <= 1e-8);
  CHECK(T.hess_sup <= 1e-8);
}

TEST_CASE("rigidly moved flat charts have rigid transitions") {
  const auto imm = flat_rotated_charts(4, 2, 9);
  const auto A = solve_harmonic_coordinates(imm, 0, boundary(BoundaryKind::identity));
  const auto B = solve_harmonic_coordinates(imm, 1, boundary(BoundaryKind::identity));
  const auto T = transition_map(A, B);
  CHECK(T.isometry_deviation < 1e-10);
  CHECK(T.hess_sup < 1e-10);
  CHECK(T.lipschitz == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("parameter coordinates of a cap fail the harmonic metric equation") {
  const auto imm = sphere_cap_charts(4, 1, 9);
  const auto P = harmonic_metric_pde_residual(parameter_chart(imm, 0));
  const auto H = harmonic_metric_pde_residual(solve_harmonic_coordinates(imm, 0, boundary(BoundaryKind::plane_fit)));
  CHECK(P.flagged);
  CHECK(H.residual_sup < P.residual_sup);
}

TEST_CASE("charts too far apart do not overlap") {
  const auto imm = flat_rotated_charts(4, 1, 5);
  const auto A = solve_harmonic_coordinates(imm, 0, boundary(BoundaryKind::identity));
  const auto far = sphere_cap_charts(4, 1, 5);
  const auto B = solve_harmonic_coordinates(far, 0, boundary(BoundaryKind::plane_fit));
  CHECK_THROWS_AS(transition_map(A, B), Error);
}
