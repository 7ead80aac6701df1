#include "immersia/geometry.hpp"

#include <atomic>
#include <cmath>
#include <mutex>

#include "immersia/error.hpp"

namespace immersia {

namespace {

using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxD, kMaxD>;

double dot(const double* a, const double* b, int d) {
  double s = 0.0;
  for (int c = 0; c < d; ++c) s += a[c] * b[c];
  return s;
}

// O in SO(k) maximizing tr(O^T A B^T); rows of A and B are frame vectors.
SmallMat alignment_rotation(const double* a, const double* b, int k, int d) {
  SmallMat M(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) M(i, j) = dot(a + i * d, b + j * d, d);
  if (k == 1) return SmallMat::Identity(1, 1);
  Eigen::JacobiSVD<SmallMat> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  SmallMat U = svd.matrixU();
  const SmallMat V = svd.matrixV();
  if ((U * V.transpose()).determinant() < 0) U.col(k - 1) *= -1.0;
  return U * V.transpose();
}

// a' = O^T a (rows)
void rotate_rows(double* a, const SmallMat& O, int k, int d) {
  double tmp[kMaxCodim][kMaxD];
  for (int b = 0; b < k; ++b)
    for (int c = 0; c < d; ++c) {
      double s = 0.0;
      for (int a2 = 0; a2 < k; ++a2) s += O(a2, b) * a[a2 * d + c];
      tmp[b][c] = s;
    }
  for (int b = 0; b < k; ++b)
    for (int c = 0; c < d; ++c) a[b * d + c] = tmp[b][c];
}

// same change of frame on components stored with stride k
void rotate_components(double* comp, std::size_t count, const SmallMat& O, int k) {
  double tmp[kMaxCodim];
  for (std::size_t t = 0; t < count; ++t) {
    double* v = comp + t * k;
    for (int b = 0; b < k; ++b) {
      double s = 0.0;
      for (int a = 0; a < k; ++a) s += O(a, b) * v[a];
      tmp[b] = s;
    }
    for (int b = 0; b < k; ++b) v[b] = tmp[b];
  }
}

template <class F>
void run_nodes(std::size_t count, Execution exec, F&& body) {
  const std::size_t blocks = (count + kReduceBlock - 1) / kReduceBlock;
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex mu;
  auto run_block = [&](std::size_t b) {
    if (failed.load(std::memory_order_relaxed)) return;
    try {
      body(b, b * kReduceBlock, std::min(count, (b + 1) * kReduceBlock));
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      if (!failed.exchange(true)) error = std::current_exception();
    }
  };
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t b = 0; b < blocks; ++b) run_block(b);
  } else {
    for (std::size_t b = 0; b < blocks; ++b) run_block(b);
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

std::string node_label(int chart, const MultiIndex& m, int n) {
  std::string s = "chart " + std::to_string(chart) + " node (";
  for (int a = 0; a < n; ++a) s += (a ? "," : "") + std::to_string(m[a]);
  return s + ")";
}

double PointGeometry::min_eigenvalue() const {
  SmallMat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = g[i][j];
  Eigen::SelfAdjointEigenSolver<SmallMat> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues()[0];
}

double PointGeometry::normal_part_norm(const double* v) const {
  double s = 0.0;
  for (int a = 0; a < k; ++a) {
    const double c = dot(normal[a], v, d);
    s += c * c;
  }
  return std::sqrt(s);
}

void PointGeometry::tangent_projection(const double* v, double* out) const {
  double t[kMaxN];
  for (int i = 0; i < n; ++i) t[i] = dot(tangent[i], v, d);
  for (int c = 0; c < d; ++c) out[c] = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double w = ginv[i][j] * t[j];
      for (int c = 0; c < d; ++c) out[c] += w * tangent[i][c];
    }
}

namespace {

// Sign of the determinant of a d x d row matrix by elimination with partial pivoting.
int det_sign(double (*m)[kMaxD], int d) {
  int sign = 1;
  for (int c = 0; c < d; ++c) {
    int piv = c;
    for (int r = c + 1; r < d; ++r)
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    if (m[piv][c] == 0.0) return 0;
    if (piv != c) {
      for (int j = 0; j < d; ++j) std::swap(m[c][j], m[piv][j]);
      sign = -sign;
    }
    if (m[c][c] < 0) sign = -sign;
    for (int r = c + 1; r < d; ++r) {
      const double f = m[r][c] / m[c][c];
      for (int j = c; j < d; ++j) m[r][j] -= f * m[c][j];
    }
  }
  return sign;
}

// g^{-1} and sqrt(det g) by Cholesky; false if not positive definite.
bool invert_metric(const double (*g)[kMaxN], int n, double (*gi)[kMaxN], double& sqrt_det) {
  double L[kMaxN][kMaxN] = {};
  sqrt_det = 1.0;
  for (int j = 0; j < n; ++j) {
    double s = g[j][j];
    for (int p = 0; p < j; ++p) s -= L[j][p] * L[j][p];
    if (!(s > 0)) return false;
    L[j][j] = std::sqrt(s);
    sqrt_det *= L[j][j];
    for (int i = j + 1; i < n; ++i) {
      double t = g[i][j];
      for (int p = 0; p < j; ++p) t -= L[i][p] * L[j][p];
      L[i][j] = t / L[j][j];
    }
  }
  double Li[kMaxN][kMaxN] = {};
  for (int j = 0; j < n; ++j) {
    Li[j][j] = 1.0 / L[j][j];
    for (int i = j + 1; i < n; ++i) {
      double t = 0.0;
      for (int p = j; p < i; ++p) t -= L[i][p] * Li[p][j];
      Li[i][j] = t / L[i][i];
    }
  }
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      double t = 0.0;
      for (int p = j; p < n; ++p) t += Li[p][i] * Li[p][j];
      gi[i][j] = gi[j][i] = t;
    }
  return true;
}

// Orthonormal complement of the tangent space, oriented so that (tangent, normal) is positive.
void build_normal_frame(PointGeometry& G) {
  const int n = G.n, d = G.d, k = G.k;
  double P[kMaxD][kMaxD];
  for (int r = 0; r < d; ++r)
    for (int c = r; c < d; ++c) {
      double s = (r == c) ? 1.0 : 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) s -= G.tangent[i][r] * G.ginv[i][j] * G.tangent[j][c];
      P[r][c] = P[c][r] = s;
    }
  bool used[kMaxD] = {};
  for (int a = 0; a < k; ++a) {
    int best = -1;
    double best_norm = -1.0;
    double cand[kMaxD];
    for (int c = 0; c < d; ++c) {
      if (used[c]) continue;
      double v[kMaxD];
      for (int r = 0; r < d; ++r) v[r] = P[r][c];
      for (int b = 0; b < a; ++b) {
        const double t = dot(G.normal[b], v, d);
        for (int r = 0; r < d; ++r) v[r] -= t * G.normal[b][r];
      }
      const double nv = dot(v, v, d);
      if (nv > best_norm) {
        best_norm = nv;
        best = c;
        for (int r = 0; r < d; ++r) cand[r] = v[r];
      }
    }
    used[best] = true;
    // second pass keeps orthogonality at rounding level
    for (int b = 0; b < a; ++b) {
      const double t = dot(G.normal[b], cand, d);
      for (int r = 0; r < d; ++r) cand[r] -= t * G.normal[b][r];
    }
    const double inv = 1.0 / std::sqrt(dot(cand, cand, d));
    for (int r = 0; r < d; ++r) G.normal[a][r] = cand[r] * inv;
  }
  double M[kMaxD][kMaxD];
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) M[i][c] = G.tangent[i][c];
  for (int a = 0; a < k; ++a)
    for (int c = 0; c < d; ++c) M[n + a][c] = G.normal[a][c];
  if (det_sign(M, d) < 0)
    for (int c = 0; c < d; ++c) G.normal[k - 1][c] = -G.normal[k - 1][c];
}

// Squared norm with tangent slots contracted by g^{-1} and the frame slot summed.
double raised_norm2_rank2(const double (*T)[kMaxN][kMaxN], const double (*gi)[kMaxN], int n, int k) {
  double total = 0.0;
  for (int a = 0; a < k; ++a) {
    double up[kMaxN][kMaxN];
    for (int p = 0; p < n; ++p)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += gi[p][i] * T[a][i][j];
        up[p][j] = s;
      }
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += gi[q][j] * up[p][j];
        total += s * T[a][p][q];
      }
  }
  return total;
}

double raised_norm2_rank3(const double (*T)[kMaxN][kMaxN][kMaxN], const double (*gi)[kMaxN], int n, int k) {
  double total = 0.0;
  for (int a = 0; a < k; ++a) {
    double t1[kMaxN][kMaxN][kMaxN], t2[kMaxN][kMaxN][kMaxN];
    for (int p = 0; p < n; ++p)
      for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l) {
          double s = 0.0;
          for (int i = 0; i < n; ++i) s += gi[p][i] * T[a][i][j][l];
          t1[p][j][l] = s;
        }
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q)
        for (int l = 0; l < n; ++l) {
          double s = 0.0;
          for (int j = 0; j < n; ++j) s += gi[q][j] * t1[p][j][l];
          t2[p][q][l] = s;
        }
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q)
        for (int r = 0; r < n; ++r) {
          double s = 0.0;
          for (int l = 0; l < n; ++l) s += gi[r][l] * t2[p][q][l];
          total += s * T[a][p][q][r];
        }
  }
  return total;
}

}  // namespace

bool point_geometry(const NodeDerivatives& D, PointGeometry& G, bool with_cov) {
  const int n = D.n, d = D.d, k = d - n;
  G.n = n;
  G.d = d;
  G.k = k;
  for (int c = 0; c < d; ++c) G.pos[c] = D.phi[c];
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) G.tangent[i][c] = D.d1[i][c];
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) G.g[i][j] = G.g[j][i] = dot(D.d1[i], D.d1[j], d);
  if (!invert_metric(G.g, n, G.ginv, G.sqrt_det)) return false;
  double tr = 0.0, tri = 0.0;
  for (int i = 0; i < n; ++i) {
    tr += G.g[i][i];
    tri += G.ginv[i][i];
  }
  G.cond_bound = tr * tri;
  if (!(G.cond_bound <= 1e12)) return false;

  build_normal_frame(G);

  double proj[kMaxN][kMaxN][kMaxN];  // d1_m . d2_ij
  for (int m = 0; m < n; ++m)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) proj[m][i][j] = proj[m][j][i] = dot(D.d1[m], D.d2[i][j], d);
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double s = 0.0;
        for (int m = 0; m < n; ++m) s += G.ginv[l][m] * proj[m][i][j];
        G.gamma[l][i][j] = G.gamma[l][j][i] = s;
      }
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      for (int c = 0; c < d; ++c) {
        double v = D.d2[i][j][c];
        for (int l = 0; l < n; ++l) v -= G.gamma[l][i][j] * D.d1[l][c];
        G.II[i][j][c] = G.II[j][i][c] = v;
      }
      for (int a = 0; a < k; ++a) G.IIc[a][i][j] = G.IIc[a][j][i] = dot(G.normal[a], D.d2[i][j], d);
    }
  for (int c = 0; c < d; ++c) {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s += G.ginv[i][j] * G.II[i][j][c];
    G.H[c] = s / n;
  }
  G.H_norm = std::sqrt(dot(G.H, G.H, d));
  G.II_norm2 = raised_norm2_rank2(G.IIc, G.ginv, n, k);

  G.has_cov = with_cov;
  G.covII_norm2 = 0.0;
  if (!with_cov) return true;
  for (int a = 0; a < k; ++a)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j)
        for (int kk = 0; kk < n; ++kk) {
          double v = dot(G.normal[a], D.d3[i][j][kk], d);
          for (int l = 0; l < n; ++l)
            v -= G.gamma[l][i][j] * G.IIc[a][kk][l] + G.gamma[l][kk][i] * G.IIc[a][l][j] +
                 G.gamma[l][kk][j] * G.IIc[a][i][l];
          G.covIIc[a][i][j][kk] = G.covIIc[a][j][i][kk] = v;
        }
  G.covII_norm2 = raised_norm2_rank3(G.covIIc, G.ginv, n, k);
  return true;
}

RiemannTensor riemann_from_gauss(const PointGeometry& G) {
  RiemannTensor R{};
  const int n = G.n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          R[((i * kMaxN + j) * kMaxN + k) * kMaxN + l] =
              dot(G.II[i][k], G.II[j][l], G.d) - dot(G.II[i][l], G.II[j][k], G.d);
  return R;
}

PointGeometry node_geometry(const SampledImmersion& imm, int chart, const MultiIndex& node, bool with_cov,
                            DerivativeMode mode) {
  NodeDerivatives D;
  node_derivatives(imm, chart, node, mode, D, with_cov ? 3 : 2);
  PointGeometry G;
  if (!point_geometry(D, G, with_cov))
    throw Error(ErrorCode::degenerate_metric, "singular metric at " + node_label(chart, node, imm.n));
  return G;
}

void visit_geometry(const SampledImmersion& imm, int chart, bool with_cov, DerivativeMode mode, Execution exec,
                    const std::function<void(std::size_t, const PointGeometry&)>& fn) {
  const auto& grid = imm.charts.at(chart).grid;
  run_nodes(grid.node_count(), exec, [&](std::size_t, std::size_t lo, std::size_t hi) {
    PointGeometry G;
    NodeDerivatives D;
    for (std::size_t i = lo; i < hi; ++i) {
      const MultiIndex m = grid.multi(i);
      node_derivatives(imm, chart, m, mode, D, with_cov ? 3 : 2);
      if (!point_geometry(D, G, with_cov))
        throw Error(ErrorCode::degenerate_metric, "singular metric at " + node_label(chart, m, imm.n));
      fn(i, G);
    }
  });
}

NodeAccum reduce_geometry(const SampledImmersion& imm, int chart, bool with_cov, DerivativeMode mode, Execution exec,
                          const std::function<NodeAccum(std::size_t, const PointGeometry&)>& fn) {
  const auto& grid = imm.charts.at(chart).grid;
  const std::size_t count = grid.node_count();
  std::vector<NodeAccum> partial((count + kReduceBlock - 1) / kReduceBlock, NodeAccum{});
  run_nodes(count, exec, [&](std::size_t b, std::size_t lo, std::size_t hi) {
    PointGeometry G;
    NodeDerivatives D;
    NodeAccum acc{};
    for (std::size_t i = lo; i < hi; ++i) {
      const MultiIndex m = grid.multi(i);
      node_derivatives(imm, chart, m, mode, D, with_cov ? 3 : 2);
      if (!point_geometry(D, G, with_cov))
        throw Error(ErrorCode::degenerate_metric, "singular metric at " + node_label(chart, m, imm.n));
      const NodeAccum v = fn(i, G);
      for (int t = 0; t < 4; ++t) acc[t] += v[t];
    }
    partial[b] = acc;
  });
  NodeAccum total{};
  for (const auto& p : partial)
    for (int t = 0; t < 4; ++t) total[t] += p[t];
  return total;
}

GeometryFields compute_geometry(const SampledImmersion& imm, int chart, int K, DerivativeMode mode, Execution exec) {
  const int n = imm.n, d = imm.d, k = d - n;
  if (K < 0) throw Error(ErrorCode::invalid_argument, "K must be >= 0");
  if (K > n / 2 - 1 && K > 0) throw Error(ErrorCode::unsupported, "covariant order above n/2-1 is not supported");
  if (K > 1) throw Error(ErrorCode::unsupported, "covariant order needs derivatives beyond order 3");
  GeometryFields F;
  F.n = n;
  F.d = d;
  F.k = k;
  F.K = K;
  F.grid = imm.charts.at(chart).grid;
  const std::size_t N = F.grid.node_count();
  F.g.resize(N * n * n);
  F.g_inv.resize(N * n * n);
  F.sqrt_det_g.resize(N);
  F.min_eig_g.resize(N);
  F.normal_frame.resize(N * k * d);
  F.II.resize(N * n * n * k);
  F.H.resize(N * d);
  F.christoffel.resize(N * n * n * n);
  F.II_norm.resize(N);
  F.H_norm.resize(N);
  if (K >= 1) {
    F.cov_II.resize(N * n * n * n * k);
    F.cov_II_norm.resize(N);
  }
  visit_geometry(imm, chart, K >= 1, mode, exec, [&](std::size_t i, const PointGeometry& G) {
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        F.g[i * n * n + a * n + b] = G.g[a][b];
        F.g_inv[i * n * n + a * n + b] = G.ginv[a][b];
        for (int c = 0; c < n; ++c) F.christoffel[i * n * n * n + (a * n + b) * n + c] = G.gamma[a][b][c];
        for (int al = 0; al < k; ++al) F.II[i * n * n * k + (a * n + b) * k + al] = G.II_comp(al, a, b);
      }
    F.sqrt_det_g[i] = G.sqrt_det;
    F.min_eig_g[i] = G.min_eigenvalue();
    for (int al = 0; al < k; ++al)
      for (int c = 0; c < d; ++c) F.normal_frame[i * k * d + al * d + c] = G.normal[al][c];
    for (int c = 0; c < d; ++c) F.H[i * d + c] = G.H[c];
    F.II_norm[i] = std::sqrt(std::max(0.0, G.II_norm2));
    F.H_norm[i] = G.H_norm;
    if (K >= 1) {
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          for (int c = 0; c < n; ++c)
            for (int al = 0; al < k; ++al)
              F.cov_II[i * n * n * n * k + ((a * n + b) * n + c) * k + al] = G.covIIc[al][a][b][c];
      F.cov_II_norm[i] = std::sqrt(std::max(0.0, G.covII_norm2));
    }
  });
  // propagate the frame gauge from the first node along the lattice
  if (k > 1) {
    for (std::size_t i = 1; i < N; ++i) {
      const MultiIndex m = F.grid.multi(i);
      int axis = n - 1;
      while (m[axis] == 0) --axis;
      const std::size_t parent = i - F.grid.stride(axis);
      double* fi = F.normal_frame.data() + i * k * d;
      const SmallMat O = alignment_rotation(fi, F.normal_frame.data() + parent * k * d, k, d);
      rotate_rows(fi, O, k, d);
      rotate_components(F.II.data() + i * n * n * k, n * n, O, k);
      if (K >= 1) rotate_components(F.cov_II.data() + i * n * n * n * k, n * n * n, O, k);
    }
  }
  return F;
}

void align_frame(double* a, const double* b, int k, int d) {
  const SmallMat O = alignment_rotation(a, b, k, d);
  rotate_rows(a, O, k, d);
}

double frame_distance(const double* a, const double* b, int k, int d) {
  double tmp[kMaxCodim * kMaxD];
  for (int i = 0; i < k * d; ++i) tmp[i] = a[i];
  align_frame(tmp, b, k, d);
  double worst = 0.0;
  for (int al = 0; al < k; ++al) {
    double s = 0.0;
    for (int c = 0; c < d; ++c) {
      const double e = tmp[al * d + c] - b[al * d + c];
      s += e * e;
    }
    worst = std::max(worst, std::sqrt(s));
  }
  return worst;
}

double frame_oscillation(const std::vector<const double*>& frames, int k, int d) {
  double worst = 0.0;
  const std::size_t N = frames.size();
#pragma omp parallel for schedule(dynamic, 16) reduction(max : worst)
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = i + 1; j < N; ++j) worst = std::max(worst, frame_distance(frames[i], frames[j], k, d));
  return worst;
}

}  // namespace immersia
