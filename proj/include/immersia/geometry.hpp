#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "immersia/immersion.hpp"
#include "immersia/parallel.hpp"

namespace immersia {

inline constexpr int kMaxCodim = kMaxD - 2;

// Differential geometry at a single point, from derivatives up to order 3.
struct PointGeometry {
  int n = 0, d = 0, k = 0;  // k = codimension
  double pos[kMaxD];
  double tangent[kMaxN][kMaxD];
  double g[kMaxN][kMaxN];
  double ginv[kMaxN][kMaxN];
  double sqrt_det = 0.0;
  double cond_bound = 0.0;  // tr(g) tr(g^{-1}), an upper bound for the condition number
  // oriented so that (tangent, normal) is a positive basis of R^d
  double normal[kMaxCodim][kMaxD];
  double gamma[kMaxN][kMaxN][kMaxN];  // gamma[l][i][j] = Christoffel symbol of the second kind
  double II[kMaxN][kMaxN][kMaxD];     // normal-valued, ambient components
  double IIc[kMaxCodim][kMaxN][kMaxN];  // components along the normal frame
  double H[kMaxD];                      // (1/n) trace
  bool has_cov = false;
  double covIIc[kMaxCodim][kMaxN][kMaxN][kMaxN];  // [a][i][j][k] = frame component of (nabla_k II)_ij
  double II_norm2 = 0.0;
  double H_norm = 0.0;
  double covII_norm2 = 0.0;

  double II_comp(int a, int i, int j) const { return IIc[a][i][j]; }
  double min_eigenvalue() const;
  // |v^perp| for an ambient vector
  double normal_part_norm(const double* v) const;
  // P_T v in ambient coordinates
  void tangent_projection(const double* v, double* out) const;
};

// Returns false when the metric is singular (condition bound above 1e12).
bool point_geometry(const NodeDerivatives& D, PointGeometry& G, bool with_cov);

// Gauss-equation curvature; index order [i][j][k][l].
using RiemannTensor = std::array<double, kMaxN * kMaxN * kMaxN * kMaxN>;
RiemannTensor riemann_from_gauss(const PointGeometry& G);
inline double riemann_at(const RiemannTensor& R, int i, int j, int k, int l) {
  return R[((i * kMaxN + j) * kMaxN + k) * kMaxN + l];
}

// Per-node fields on one chart.
struct GeometryFields {
  int n = 0, d = 0, k = 0;
  int K = 0;  // highest covariant derivative order stored
  ChartGrid grid;
  std::vector<double> g, g_inv, sqrt_det_g, min_eig_g;
  std::vector<double> normal_frame;  // k*d per node, sign-propagated within the chart
  std::vector<double> II;            // n*n*k components per node
  std::vector<double> H;             // d per node
  std::vector<double> christoffel;   // n^3 per node
  std::vector<double> cov_II;        // n^3*k per node (K >= 1)
  std::vector<double> II_norm, H_norm, cov_II_norm;

  std::size_t nodes() const { return grid.node_count(); }
  const double* frame(std::size_t node) const { return normal_frame.data() + node * k * d; }
};

GeometryFields compute_geometry(const SampledImmersion& imm, int chart, int K = 1,
                                DerivativeMode mode = DerivativeMode::automatic,
                                Execution exec = Execution::parallel);

// Geometry at one node; throws degenerate-metric naming the node.
PointGeometry node_geometry(const SampledImmersion& imm, int chart, const MultiIndex& node, bool with_cov,
                            DerivativeMode mode = DerivativeMode::automatic);

// Streams per-node geometry in fixed blocks and sums fn over nodes in a thread-count independent order.
using NodeAccum = std::array<double, 4>;
NodeAccum reduce_geometry(const SampledImmersion& imm, int chart, bool with_cov, DerivativeMode mode, Execution exec,
                          const std::function<NodeAccum(std::size_t, const PointGeometry&)>& fn);

// Visits every node; fn must be safe to call concurrently for distinct nodes.
void visit_geometry(const SampledImmersion& imm, int chart, bool with_cov, DerivativeMode mode, Execution exec,
                    const std::function<void(std::size_t, const PointGeometry&)>& fn);

std::string node_label(int chart, const MultiIndex& m, int n);

// Rotation in SO(k) best aligning frame `a` onto frame `b` (rows are vectors), applied to `a` in place.
void align_frame(double* a, const double* b, int k, int d);
// max over columns |a_i - b_i| after aligning a onto b
double frame_distance(const double* a, const double* b, int k, int d);

// Largest aligned frame distance over all pairs of the given frames.
double frame_oscillation(const std::vector<const double*>& frames, int k, int d);

}  // namespace immersia
