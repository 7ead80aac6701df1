#include <doctest.h>

#include <cmath>

#include "immersia/geometry.hpp"

using namespace immersia;

namespace {

ShapeSpec shape(ShapeKind k, int n = 4) {
  ShapeSpec s;
  s.kind = k;
  s.n = n;
  return s;
}

}  // namespace

TEST_CASE("plane has vanishing curvature") {
  const auto imm = build_shape(shape(ShapeKind::plane, 2), 7);
  const auto G = node_geometry(imm, 0, {2, 3, 0, 0}, true);
  CHECK(G.II_norm2 < 1e-24);
  CHECK(G.H_norm < 1e-12);
  CHECK(G.covII_norm2 < 1e-24);
  const auto R = riemann_from_gauss(G);
  for (double v : R) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("unit sphere is umbilic with constant sectional curvature") {
  for (int n : {2, 4}) {
    const auto imm = build_shape(shape(ShapeKind::round_sphere, n), 9);
    MultiIndex m{3, 5, 2, 6};
    const auto G = node_geometry(imm, 1, m, true, DerivativeMode::exact);
    CHECK(G.H_norm == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(G.II_norm2 == doctest::Approx(n).epsilon(1e-12));
    CHECK(G.covII_norm2 < 1e-20);
    // II = -g x, so the traceless part vanishes
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int c = 0; c < imm.d; ++c) CHECK(std::abs(G.II[i][j][c] + G.g[i][j] * G.pos[c]) < 1e-12);
    const auto R = riemann_from_gauss(G);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        CHECK(riemann_at(R, i, j, i, j) == doctest::Approx(G.g[i][i] * G.g[j][j] - G.g[i][j] * G.g[i][j]).epsilon(1e-8));
        CHECK(riemann_at(R, i, j, i, j) == -riemann_at(R, j, i, i, j));
      }
  }
}

TEST_CASE("trace of II is n H") {
  ShapeSpec s = shape(ShapeKind::ellipsoid);
  s.semi_axes = {1.0, 0.8, 1.2, 0.9, 1.1};
  const auto imm = build_shape(s, 9);
  for (auto mode : {DerivativeMode::exact, DerivativeMode::numeric}) {
    const auto G = node_geometry(imm, 2, {4, 2, 6, 3}, false, mode);
    for (int c = 0; c < imm.d; ++c) {
      double tr = 0.0;
      for (int i = 0; i < imm.n; ++i)
        for (int j = 0; j < imm.n; ++j) tr += G.ginv[i][j] * G.II[i][j][c];
      CHECK(std::abs(tr - imm.n * G.H[c]) < (mode == DerivativeMode::exact ? 1e-10 : 1e-6));
    }
  }
}

TEST_CASE("norms do not depend on the normal frame") {
  ShapeSpec s = shape(ShapeKind::round_sphere);
  s.codim = 3;
  s.radius = 0.7;
  const auto imm = build_shape(s, 9);
  const auto G = node_geometry(imm, 0, {4, 3, 5, 2}, true, DerivativeMode::exact);
  REQUIRE(G.k == 3);
  // rotate the frame by a fixed orthogonal matrix and recompute the contracted norms by hand
  const double c = std::cos(0.4), sn = std::sin(0.4);
  const double Q[3][3] = {{c, -sn, 0}, {sn, c, 0}, {0, 0, 1}};
  double plain = 0.0, rotated = 0.0;
  for (int i = 0; i < G.n; ++i)
    for (int j = 0; j < G.n; ++j)
      for (int k = 0; k < G.n; ++k)
        for (int l = 0; l < G.n; ++l)
          for (int a = 0; a < 3; ++a) {
            double ra = 0.0, rb = 0.0;
            for (int b = 0; b < 3; ++b) {
              ra += Q[a][b] * G.IIc[b][i][j];
              rb += Q[a][b] * G.IIc[b][k][l];
            }
            plain += G.ginv[i][k] * G.ginv[j][l] * G.IIc[a][i][j] * G.IIc[a][k][l];
            rotated += G.ginv[i][k] * G.ginv[j][l] * ra * rb;
          }
  CHECK(rotated == doctest::Approx(plain).epsilon(1e-12));
  CHECK(plain == doctest::Approx(G.II_norm2).epsilon(1e-12));
  CHECK(G.H_norm == doctest::Approx(1.0 / 0.7).epsilon(1e-12));
}

TEST_CASE("chart fields agree with pointwise geometry") {
  const auto imm = build_shape(shape(ShapeKind::clifford_torus), 7);
  const auto F = compute_geometry(imm, 0, 1);
  const MultiIndex m{2, 3, 4, 1};
  const auto G = node_geometry(imm, 0, m, true);
  const std::size_t i = F.grid.index(m);
  CHECK(F.II_norm[i] == doctest::Approx(std::sqrt(G.II_norm2)).epsilon(1e-12));
  CHECK(F.H_norm[i] == doctest::Approx(G.H_norm).epsilon(1e-12));
  CHECK(F.min_eig_g[i] == doctest::Approx(G.min_eigenvalue()).epsilon(1e-12));
}

TEST_CASE("frame alignment removes the gauge") {
  const double a[2 * 3] = {1, 0, 0, 0, 1, 0};
  const double b[2 * 3] = {0, 1, 0, -1, 0, 0};
  CHECK(frame_distance(a, b, 2, 3) < 1e-12);
  const double c[2 * 3] = {1, 0, 0, 0, 0, 1};
  CHECK(frame_distance(a, c, 2, 3) > 0.5);
}
