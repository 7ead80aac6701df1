#include "immersia/harmonic.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "immersia/error.hpp"
#include "immersia/lorentz.hpp"
#include "immersia/spatial_index.hpp"

namespace immersia {

namespace {

using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxD, kMaxD>;
using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxD, 1>;

constexpr std::size_t kDirectLimit = 200000;

// First derivative along `axis` of an m-component node field: central inside, second-order one-sided at the edge.
void fd_axis(const ChartGrid& grid, const std::vector<double>& F, int m, std::size_t i, const MultiIndex& mi,
             int axis, double* out) {
  const int N = grid.dims()[axis];
  const std::size_t s = grid.stride(axis);
  const double h = grid.spacing()[axis];
  const double* f = F.data();
  if (N < 3) {
    const std::size_t a = mi[axis] == 0 ? i : i - s;
    for (int c = 0; c < m; ++c) out[c] = (f[(a + s) * m + c] - f[a * m + c]) / h;
  } else if (mi[axis] == 0) {
    for (int c = 0; c < m; ++c)
      out[c] = (-3.0 * f[i * m + c] + 4.0 * f[(i + s) * m + c] - f[(i + 2 * s) * m + c]) / (2.0 * h);
  } else if (mi[axis] == N - 1) {
    for (int c = 0; c < m; ++c)
      out[c] = (3.0 * f[i * m + c] - 4.0 * f[(i - s) * m + c] + f[(i - 2 * s) * m + c]) / (2.0 * h);
  } else {
    for (int c = 0; c < m; ++c) out[c] = (f[(i + s) * m + c] - f[(i - s) * m + c]) / (2.0 * h);
  }
}

// Derivatives along u: out[j*m + c] = sum_a Jinv[a][j] dF_c/dx^a, with Jinv = (du/dx)^{-1} stored n*n per node.
std::vector<double> chain_derivative(const ChartGrid& grid, const std::vector<double>& F, int m,
                                     const std::vector<double>& Jinv, Execution exec) {
  const int n = grid.n();
  const std::size_t N = grid.node_count();
  std::vector<double> out(N * n * m, 0.0);
#pragma omp parallel for schedule(static) if (exec == Execution::parallel)
  for (std::size_t i = 0; i < N; ++i) {
    const MultiIndex mi = grid.multi(i);
    std::vector<double> dx(static_cast<std::size_t>(n) * m);
    for (int a = 0; a < n; ++a) fd_axis(grid, F, m, i, mi, a, dx.data() + a * m);
    const double* Ji = Jinv.data() + i * n * n;
    for (int j = 0; j < n; ++j)
      for (int c = 0; c < m; ++c) {
        double s = 0.0;
        for (int a = 0; a < n; ++a) s += Ji[a * n + j] * dx[a * m + c];
        out[(i * n + j) * m + c] = s;
      }
  }
  return out;
}

MetricEstimates metric_estimates(const ChartGrid& grid, const std::vector<double>& gh, const std::vector<double>& Jinv,
                                 const std::vector<double>& vol, Execution exec) {
  const int n = grid.n();
  const std::size_t N = grid.node_count();
  MetricEstimates est;
  for (std::size_t i = 0; i < N; ++i)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        est.sup_deviation = std::max(est.sup_deviation, std::abs(gh[i * n * n + a * n + b] - (a == b ? 1.0 : 0.0)));
  const auto D1 = chain_derivative(grid, gh, n * n, Jinv, exec);
  const auto D2 = chain_derivative(grid, D1, n * n * n, Jinv, exec);
  WeightedSampleSet s1, s2;
  for (std::size_t i = 0; i < N; ++i) {
    double a1 = 0.0, a2 = 0.0;
    for (int t = 0; t < n * n * n; ++t) a1 += D1[i * n * n * n + t] * D1[i * n * n * n + t];
    for (int t = 0; t < n * n * n * n; ++t) a2 += D2[i * n * n * n * n + t] * D2[i * n * n * n * n + t];
    s1.add(std::sqrt(a1), vol[i]);
    s2.add(std::sqrt(a2), vol[i]);
  }
  est.d1_lorentz = lorentz_norm(s1, n, 1.0);
  est.d2_lorentz = lorentz_norm(s2, 0.5 * n, 1.0);
  return est;
}

// Fills phi, metric, sqrt_det for the chart.
void load_chart(const SampledImmersion& imm, int chart, DerivativeMode mode, Execution exec, HarmonicChart& hc) {
  if (chart < 0 || chart >= static_cast<int>(imm.charts.size()))
    throw Error(ErrorCode::invalid_argument, "chart index out of range");
  const int n = imm.n, d = imm.d;
  hc.n = n;
  hc.d = d;
  hc.chart = chart;
  hc.grid = imm.charts[chart].grid;
  hc.phi = imm.charts[chart].phi;
  const std::size_t N = hc.grid.node_count();
  hc.metric.assign(N * n * n, 0.0);
  hc.sqrt_det.assign(N, 0.0);
  std::exception_ptr failure;
  std::mutex mu;
#pragma omp parallel for schedule(static) if (exec == Execution::parallel)
  for (std::size_t i = 0; i < N; ++i) {
    try {
      NodeDerivatives D;
      node_derivatives(imm, chart, hc.grid.multi(i), mode, D, 1);
      SmallMat g(n, n);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          double s = 0.0;
          for (int k = 0; k < d; ++k) s += D.d1[a][k] * D.d1[b][k];
          g(a, b) = s;
          hc.metric[i * n * n + a * n + b] = s;
        }
      Eigen::LLT<SmallMat> llt(g);
      if (llt.info() != Eigen::Success)
        throw Error(ErrorCode::degenerate_metric, "metric not positive definite at " +
                                                      node_label(chart, hc.grid.multi(i), n));
      const double det = g.determinant();
      hc.sqrt_det[i] = std::sqrt(det);
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

std::vector<double> volume_weights(const HarmonicChart& hc) {
  std::vector<double> w(hc.nodes());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = hc.grid.cell_weight(hc.grid.multi(i)) * hc.sqrt_det[i];
  return w;
}

std::vector<double> identity_field(int n, std::size_t N) {
  std::vector<double> I(N * n * n, 0.0);
  for (std::size_t i = 0; i < N; ++i)
    for (int a = 0; a < n; ++a) I[i * n * n + a * n + a] = 1.0;
  return I;
}

// Plane of the boundary images by principal components, rotated onto the parameter box.
void plane_fit_boundary(const HarmonicChart& hc, std::vector<double>& u) {
  const int n = hc.n, d = hc.d;
  const auto& grid = hc.grid;
  const std::size_t N = grid.node_count();
  std::vector<std::size_t> bnd;
  for (std::size_t i = 0; i < N; ++i)
    if (grid.is_boundary(i)) bnd.push_back(i);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(d), xm = Eigen::VectorXd::Zero(n);
  for (std::size_t i : bnd) {
    for (int k = 0; k < d; ++k) c(k) += hc.phi[i * d + k];
    double x[kMaxN];
    grid.param(grid.multi(i), x);
    for (int a = 0; a < n; ++a) xm(a) += x[a];
  }
  c /= static_cast<double>(bnd.size());
  xm /= static_cast<double>(bnd.size());
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i : bnd) {
    Eigen::VectorXd y(d);
    for (int k = 0; k < d; ++k) y(k) = hc.phi[i * d + k] - c(k);
    C += y * y.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  Eigen::MatrixXd F(n, d);  // top n principal directions as rows
  for (int a = 0; a < n; ++a) F.row(a) = es.eigenvectors().col(d - 1 - a).transpose();
  // orthogonal Procrustes from plane coordinates onto centered parameters, so orientation follows the chart
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i : bnd) {
    Eigen::VectorXd y(d);
    for (int k = 0; k < d; ++k) y(k) = hc.phi[i * d + k] - c(k);
    double x[kMaxN];
    grid.param(grid.multi(i), x);
    Eigen::VectorXd xv(n);
    for (int a = 0; a < n; ++a) xv(a) = x[a] - xm(a);
    M += xv * (F * y).transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::MatrixXd P = svd.matrixU() * svd.matrixV().transpose() * F;
  u.assign(N * n, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    Eigen::VectorXd y(d);
    for (int k = 0; k < d; ++k) y(k) = hc.phi[i * d + k] - c(k);
    const Eigen::VectorXd v = P * y + xm;
    for (int a = 0; a < n; ++a) u[i * n + a] = v(a);
  }
}

// K = sum over cells and corners of w B^T A B, B the one-sided corner gradient.
class FluxOperator {
 public:
  FluxOperator(const ChartGrid& grid, const std::vector<double>& A, Execution exec)
      : grid_(grid), A_(A), exec_(exec), n_(grid.n()) {
    const auto& dims = grid.dims();
    corners_ = 1 << n_;
    offsets_.assign(corners_, 0);
    for (int k = 0; k < corners_; ++k)
      for (int a = 0; a < n_; ++a)
        if (k & (1 << a)) offsets_[k] += grid.stride(a);
    weight_ = grid.cell_volume() / corners_;
    colors_.assign(corners_, {});
    for (std::size_t i = 0; i < grid.node_count(); ++i) {
      const MultiIndex m = grid.multi(i);
      bool cell = true;
      int color = 0;
      for (int a = 0; a < n_; ++a) {
        if (m[a] >= dims[a] - 1) cell = false;
        if (m[a] & 1) color |= 1 << a;
      }
      if (cell) colors_[color].push_back(i);
    }
  }

  // Y = K X for m interleaved components
  void apply(const std::vector<double>& X, std::vector<double>& Y, int m) const {
    std::fill(Y.begin(), Y.end(), 0.0);
    const auto& h = grid_.spacing();
    for (const auto& cells : colors_) {
#pragma omp parallel for schedule(static) if (exec_ == Execution::parallel)
      for (std::size_t t = 0; t < cells.size(); ++t) {
        const std::size_t base = cells[t];
        double G[kMaxN][kMaxN], F[kMaxN][kMaxN];
        for (int k = 0; k < corners_; ++k) {
          const std::size_t j = base + offsets_[k];
          const double* Aj = A_.data() + j * n_ * n_;
          for (int b = 0; b < n_; ++b) {
            const std::size_t nb = base + offsets_[k ^ (1 << b)];
            const double sb = (k >> b & 1) ? -1.0 : 1.0;
            for (int c = 0; c < m; ++c) G[b][c] = sb * (X[nb * m + c] - X[j * m + c]) / h[b];
          }
          for (int a = 0; a < n_; ++a)
            for (int c = 0; c < m; ++c) {
              double s = 0.0;
              for (int b = 0; b < n_; ++b) s += Aj[a * n_ + b] * G[b][c];
              F[a][c] = weight_ * s;
            }
          for (int a = 0; a < n_; ++a) {
            const std::size_t na = base + offsets_[k ^ (1 << a)];
            const double sa = (k >> a & 1) ? -1.0 : 1.0;
            for (int c = 0; c < m; ++c) {
              const double coef = F[a][c] * sa / h[a];
              Y[na * m + c] += coef;
              Y[j * m + c] -= coef;
            }
          }
        }
      }
    }
  }

  std::vector<double> diagonal() const {
    std::vector<double> D(grid_.node_count(), 0.0);
    const auto& h = grid_.spacing();
    for (const auto& cells : colors_)
      for (std::size_t base : cells)
        for (int k = 0; k < corners_; ++k) {
          const std::size_t j = base + offsets_[k];
          const double* Aj = A_.data() + j * n_ * n_;
          double s[kMaxN];
          for (int a = 0; a < n_; ++a) s[a] = (k >> a & 1) ? -1.0 : 1.0;
          double dj = 0.0;
          for (int a = 0; a < n_; ++a)
            for (int b = 0; b < n_; ++b) dj += Aj[a * n_ + b] * s[a] * s[b] / (h[a] * h[b]);
          D[j] += weight_ * dj;
          for (int b = 0; b < n_; ++b) D[base + offsets_[k ^ (1 << b)]] += weight_ * Aj[b * n_ + b] / (h[b] * h[b]);
        }
    return D;
  }

  // interior block as a sparse matrix; idx maps nodes to unknowns or -1
  Eigen::SparseMatrix<double> assemble(const std::vector<long>& idx, std::size_t unknowns) const {
    std::vector<Eigen::Triplet<double>> trip;
    const auto& h = grid_.spacing();
    for (const auto& cells : colors_)
      for (std::size_t base : cells)
        for (int k = 0; k < corners_; ++k) {
          const std::size_t j = base + offsets_[k];
          const double* Aj = A_.data() + j * n_ * n_;
          // gradient row b: coefficient -s_b/h_b on j and +s_b/h_b on the neighbour
          std::size_t node[kMaxN + 1];
          double B[kMaxN][kMaxN + 1] = {};
          node[n_] = j;
          for (int b = 0; b < n_; ++b) {
            node[b] = base + offsets_[k ^ (1 << b)];
            const double sb = (k >> b & 1) ? -1.0 : 1.0;
            B[b][b] = sb / h[b];
            B[b][n_] = -sb / h[b];
          }
          for (int p = 0; p <= n_; ++p) {
            if (idx[node[p]] < 0) continue;
            for (int q = 0; q <= n_; ++q) {
              if (idx[node[q]] < 0) continue;
              double v = 0.0;
              for (int a = 0; a < n_; ++a)
                for (int b = 0; b < n_; ++b) v += B[a][p] * Aj[a * n_ + b] * B[b][q];
              trip.emplace_back(idx[node[p]], idx[node[q]], weight_ * v);
            }
          }
        }
    Eigen::SparseMatrix<double> K(unknowns, unknowns);
    K.setFromTriplets(trip.begin(), trip.end());
    return K;
  }

 private:
  const ChartGrid& grid_;
  const std::vector<double>& A_;
  Execution exec_;
  int n_;
  int corners_ = 1;
  std::vector<std::size_t> offsets_;
  double weight_ = 0.0;
  std::vector<std::vector<std::size_t>> colors_;
};

// Jacobian du/dx, its inverse, pulled metric, fold check.
void finish_chart(HarmonicChart& hc, Execution exec) {
  const int n = hc.n;
  const std::size_t N = hc.nodes();
  hc.jacobian.assign(N * n * n, 0.0);
  hc.pulled_metric.assign(N * n * n, 0.0);
  std::vector<double> Jinv(N * n * n, 0.0);
  std::vector<double> det(N, 0.0);
#pragma omp parallel for schedule(static) if (exec == Execution::parallel)
  for (std::size_t i = 0; i < N; ++i) {
    const MultiIndex mi = hc.grid.multi(i);
    double du[kMaxN][kMaxN];
    for (int a = 0; a < n; ++a) fd_axis(hc.grid, hc.coords, n, i, mi, a, du[a]);
    SmallMat J(n, n), g(n, n);
    for (int r = 0; r < n; ++r)
      for (int a = 0; a < n; ++a) {
        J(r, a) = du[a][r];
        hc.jacobian[i * n * n + r * n + a] = du[a][r];
        g(r, a) = hc.metric[i * n * n + r * n + a];
      }
    det[i] = J.determinant();
    if (det[i] == 0.0) continue;
    const SmallMat Ji = J.inverse();
    const SmallMat gh = Ji.transpose() * g * Ji;
    for (int r = 0; r < n; ++r)
      for (int a = 0; a < n; ++a) {
        Jinv[i * n * n + r * n + a] = Ji(r, a);
        hc.pulled_metric[i * n * n + r * n + a] = gh(r, a);
      }
  }
  double lo = std::numeric_limits<double>::infinity();
  std::size_t worst = 0;
  for (std::size_t i = 0; i < N; ++i)
    if (det[i] < lo) {
      lo = det[i];
      worst = i;
    }
  hc.min_jacobian_det = lo;
  if (!(lo > 0)) {
    std::ostringstream os;
    os << "coordinate Jacobian not positive; det " << lo << " at " << node_label(hc.chart, hc.grid.multi(worst), n);
    throw Error(ErrorCode::fold_detected, os.str());
  }
  const auto vol = volume_weights(hc);
  hc.estimates = metric_estimates(hc.grid, hc.pulled_metric, Jinv, vol, exec);
  hc.input_estimates = metric_estimates(hc.grid, hc.metric, identity_field(n, N), vol, exec);
}

// Inverse of (du/dx) per node.
std::vector<double> inverse_jacobian(const HarmonicChart& hc) {
  const int n = hc.n;
  std::vector<double> Jinv(hc.nodes() * n * n);
  for (std::size_t i = 0; i < hc.nodes(); ++i) {
    SmallMat J(n, n);
    for (int r = 0; r < n; ++r)
      for (int a = 0; a < n; ++a) J(r, a) = hc.jacobian[i * n * n + r * n + a];
    const SmallMat Ji = J.inverse();
    for (int r = 0; r < n; ++r)
      for (int a = 0; a < n; ++a) Jinv[i * n * n + r * n + a] = Ji(r, a);
  }
  return Jinv;
}

}  // namespace

HarmonicChart parameter_chart(const SampledImmersion& imm, int chart, DerivativeMode mode, Execution exec) {
  HarmonicChart hc;
  load_chart(imm, chart, mode, exec, hc);
  hc.boundary = BoundaryKind::identity;
  const int n = hc.n;
  hc.coords.resize(hc.nodes() * n);
  for (std::size_t i = 0; i < hc.nodes(); ++i) hc.grid.param(hc.grid.multi(i), hc.coords.data() + i * n);
  hc.residuals.assign(n, 0.0);
  hc.iterations.assign(n, 0);
  finish_chart(hc, exec);
  return hc;
}

HarmonicChart solve_harmonic_coordinates(const SampledImmersion& imm, int chart, const BoundaryMap& boundary,
                                         const HarmonicOptions& opt) {
  if (!(opt.tol > 0) || opt.max_iter < 1) throw Error(ErrorCode::invalid_argument, "solver tolerance and budget must be positive");
  HarmonicChart hc;
  load_chart(imm, chart, opt.mode, opt.exec, hc);
  hc.boundary = boundary.kind;
  hc.solved = true;
  const int n = hc.n;
  const auto& grid = hc.grid;
  const std::size_t N = grid.node_count();

  // boundary data, extended to the interior as the initial guess
  std::vector<double> u0(N * n);
  switch (boundary.kind) {
    case BoundaryKind::identity:
      for (std::size_t i = 0; i < N; ++i) grid.param(grid.multi(i), u0.data() + i * n);
      break;
    case BoundaryKind::plane_fit:
      plane_fit_boundary(hc, u0);
      break;
    case BoundaryKind::custom: {
      if (!boundary.fn) throw Error(ErrorCode::invalid_argument, "custom boundary map without a function");
      for (std::size_t i = 0; i < N; ++i) {
        double x[kMaxN];
        grid.param(grid.multi(i), x);
        boundary.fn(x, hc.phi.data() + i * hc.d, u0.data() + i * n);
      }
      break;
    }
  }

  std::vector<double> A(N * n * n);
  for (std::size_t i = 0; i < N; ++i) {
    SmallMat g(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) g(a, b) = hc.metric[i * n * n + a * n + b];
    const SmallMat gi = g.inverse();
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) A[i * n * n + a * n + b] = hc.sqrt_det[i] * 0.5 * (gi(a, b) + gi(b, a));
  }
  FluxOperator K(grid, A, opt.exec);
  std::vector<char> interior(N);
  for (std::size_t i = 0; i < N; ++i) interior[i] = !grid.is_boundary(i);

  // scale: K applied to the boundary data alone
  std::vector<double> ub(N * n, 0.0), tmp(N * n);
  for (std::size_t i = 0; i < N; ++i)
    if (!interior[i])
      for (int c = 0; c < n; ++c) ub[i * n + c] = u0[i * n + c];
  K.apply(ub, tmp, n);
  std::vector<double> scale(n, 0.0);
  for (std::size_t i = 0; i < N; ++i)
    if (interior[i])
      for (int c = 0; c < n; ++c) scale[c] += tmp[i * n + c] * tmp[i * n + c];
  for (auto& s : scale) s = std::sqrt(s);

  // residual r = -K u on the interior
  std::vector<double> u = u0, r(N * n), z(N * n), p(N * n), q(N * n);
  const std::vector<double> diag = K.diagonal();
  auto residual = [&](std::vector<double>& out) {
    K.apply(u, out, n);
    for (std::size_t i = 0; i < N; ++i)
      for (int c = 0; c < n; ++c) out[i * n + c] = interior[i] ? -out[i * n + c] : 0.0;
  };
  residual(r);
  std::vector<double> rz(n, 0.0), rnorm(n, 0.0);
  std::vector<char> done(n, 0);
  std::vector<std::vector<double>> history(n);
  hc.iterations.assign(n, 0);
  for (std::size_t i = 0; i < N; ++i)
    for (int c = 0; c < n; ++c) {
      z[i * n + c] = interior[i] ? r[i * n + c] / diag[i] : 0.0;
      p[i * n + c] = z[i * n + c];
      rz[c] += r[i * n + c] * z[i * n + c];
      rnorm[c] += r[i * n + c] * r[i * n + c];
    }
  auto converged = [&](int c) { return std::sqrt(rnorm[c]) <= opt.tol * scale[c] || rnorm[c] == 0.0; };
  for (int c = 0; c < n; ++c) {
    history[c].push_back(scale[c] > 0 ? std::sqrt(rnorm[c]) / scale[c] : 0.0);
    done[c] = converged(c);
  }
  for (int it = 0; it < opt.max_iter && std::find(done.begin(), done.end(), 0) != done.end(); ++it) {
    K.apply(p, q, n);
    std::vector<double> pq(n, 0.0);
    for (std::size_t i = 0; i < N; ++i)
      if (interior[i])
        for (int c = 0; c < n; ++c) pq[c] += p[i * n + c] * q[i * n + c];
    std::vector<double> alpha(n, 0.0), rz_new(n, 0.0);
    for (int c = 0; c < n; ++c) alpha[c] = done[c] || pq[c] <= 0 ? 0.0 : rz[c] / pq[c];
    std::fill(rnorm.begin(), rnorm.end(), 0.0);
    for (std::size_t i = 0; i < N; ++i) {
      if (!interior[i]) continue;
      for (int c = 0; c < n; ++c) {
        const std::size_t t = i * n + c;
        u[t] += alpha[c] * p[t];
        r[t] -= alpha[c] * q[t];
        z[t] = r[t] / diag[i];
        rz_new[c] += r[t] * z[t];
        rnorm[c] += r[t] * r[t];
      }
    }
    for (int c = 0; c < n; ++c) {
      if (done[c]) continue;
      ++hc.iterations[c];
      history[c].push_back(scale[c] > 0 ? std::sqrt(rnorm[c]) / scale[c] : 0.0);
      done[c] = converged(c);
    }
    std::vector<double> beta(n, 0.0);
    for (int c = 0; c < n; ++c) beta[c] = rz[c] > 0 ? rz_new[c] / rz[c] : 0.0;
    rz = rz_new;
    for (std::size_t i = 0; i < N; ++i)
      if (interior[i])
        for (int c = 0; c < n; ++c) {
          const std::size_t t = i * n + c;
          p[t] = done[c] ? 0.0 : z[t] + beta[c] * p[t];
        }
  }

  const bool all_done = std::find(done.begin(), done.end(), 0) == done.end();
  std::size_t unknowns = 0;
  for (char f : interior) unknowns += f;
  std::size_t cap = 1;
  for (int a = 0; a < n; ++a) cap *= 50;
  if (!all_done && opt.direct_fallback && N <= cap && unknowns <= kDirectLimit) {
    std::vector<long> idx(N, -1);
    long next = 0;
    for (std::size_t i = 0; i < N; ++i)
      if (interior[i]) idx[i] = next++;
    const Eigen::SparseMatrix<double> Kii = K.assemble(idx, unknowns);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(Kii);
    if (ldlt.info() == Eigen::Success) {
      for (int c = 0; c < n; ++c) {
        Eigen::VectorXd b(unknowns);
        for (std::size_t i = 0; i < N; ++i)
          if (idx[i] >= 0) b(idx[i]) = -tmp[i * n + c];
        const Eigen::VectorXd x = ldlt.solve(b);
        for (std::size_t i = 0; i < N; ++i)
          if (idx[i] >= 0) u[i * n + c] = x(idx[i]);
      }
      hc.used_direct = true;
    }
  }

  // true residuals
  residual(r);
  hc.residuals.assign(n, 0.0);
  for (int c = 0; c < n; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i) s += r[i * n + c] * r[i * n + c];
    hc.residuals[c] = scale[c] > 0 ? std::sqrt(s) / scale[c] : std::sqrt(s);
  }
  for (int c = 0; c < n; ++c)
    if (!(hc.residuals[c] <= opt.tol)) {
      std::ostringstream os;
      os << "coordinate " << c << " did not reach relative residual " << opt.tol << " in " << opt.max_iter
         << " iterations; history";
      const auto& h = history[c];
      const std::size_t step = std::max<std::size_t>(1, h.size() / 16);
      for (std::size_t t = 0; t < h.size(); t += step) os << ' ' << h[t];
      os << ' ' << h.back();
      throw Error(ErrorCode::solver_failure, os.str());
    }
  hc.coords = std::move(u);
  finish_chart(hc, opt.exec);
  return hc;
}

PdeResidualReport harmonic_metric_pde_residual(const HarmonicChart& hc) {
  const int n = hc.n;
  const auto& grid = hc.grid;
  const std::size_t N = grid.node_count();
  if (hc.pulled_metric.size() != N * n * n || hc.jacobian.size() != N * n * n)
    throw Error(ErrorCode::invalid_argument, "chart has no pulled-back metric");
  const Execution exec = Execution::parallel;
  const auto Jinv = inverse_jacobian(hc);
  const auto& G = hc.pulled_metric;
  const auto D1 = chain_derivative(grid, G, n * n, Jinv, exec);       // [i][a][b] = d_i g_ab
  const auto D2 = chain_derivative(grid, D1, n * n * n, Jinv, exec);  // [j][i][a][b] = d_j d_i g_ab
  const int n2 = n * n, n3 = n2 * n, n4 = n3 * n;
  // Christoffel symbols [k][i][j]
  std::vector<double> Gam(N * n3), Ginv(N * n2);
  for (std::size_t t = 0; t < N; ++t) {
    SmallMat g(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) g(a, b) = G[t * n2 + a * n + b];
    const SmallMat gi = g.inverse();
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) Ginv[t * n2 + a * n + b] = gi(a, b);
    const double* d1 = D1.data() + t * n3;
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0.0;
          for (int l = 0; l < n; ++l)
            s += gi(k, l) * (d1[i * n2 + j * n + l] + d1[j * n2 + i * n + l] - d1[l * n2 + i * n + j]);
          Gam[t * n3 + k * n2 + i * n + j] = 0.5 * s;
        }
  }
  const auto DG = chain_derivative(grid, Gam, n3, Jinv, exec);  // [m][k][i][j] = d_m Gamma^k_ij
  const auto vol = volume_weights(hc);

  PdeResidualReport rep;
  double wsum = 0.0, r2sum = 0.0;
  for (std::size_t t = 0; t < N; ++t) {
    if (grid.near_boundary(grid.multi(t), kResidualLayers)) continue;
    const double* gi = Ginv.data() + t * n2;
    const double* d1 = D1.data() + t * n3;
    const double* d2 = D2.data() + t * n4;
    const double* ga = Gam.data() + t * n3;
    const double* dg = DG.data() + t * n4;
    auto GAM = [&](int k, int i, int j) { return ga[k * n2 + i * n + j]; };
    auto DGAM = [&](int m, int k, int i, int j) { return dg[m * n3 + k * n2 + i * n + j]; };
    auto D1g = [&](int i, int a, int b) { return d1[i * n2 + a * n + b]; };
    // d_m g^{kl}
    double dginv[kMaxN][kMaxN][kMaxN];
    for (int m = 0; m < n; ++m)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double s = 0.0;
          for (int p = 0; p < n; ++p)
            for (int q = 0; q < n; ++q) s -= gi[k * n + p] * D1g(m, p, q) * gi[q * n + l];
          dginv[m][k][l] = s;
        }
    double res2 = 0.0, lhs2 = 0.0, ric2 = 0.0, Q2 = 0.0, dg2 = 0.0;
    for (int t1 = 0; t1 < n3; ++t1) dg2 += d1[t1] * d1[t1];
    double Ric[kMaxN][kMaxN], Q[kMaxN][kMaxN], L[kMaxN][kMaxN];
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        double ric = 0.0;
        for (int k = 0; k < n; ++k) {
          ric += DGAM(k, k, a, b) - DGAM(b, k, a, k);
          for (int l = 0; l < n; ++l) ric += GAM(k, k, l) * GAM(l, a, b) - GAM(k, b, l) * GAM(l, a, k);
        }
        Ric[a][b] = ric;
        double lhs = 0.0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            lhs += gi[i * n + j] * 0.5 * (d2[(j * n + i) * n2 + a * n + b] + d2[(i * n + j) * n2 + a * n + b]);
        L[a][b] = -0.5 * lhs;
        // first-order remainder once the second derivatives of g cancel
        double q = 0.0;
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            q += 0.5 * dginv[k][k][l] * (D1g(a, b, l) + D1g(b, a, l) - D1g(l, a, b));
            q -= 0.5 * dginv[b][k][l] * D1g(a, k, l);
            q += GAM(k, k, l) * GAM(l, a, b) - GAM(k, b, l) * GAM(l, a, k);
            q -= 0.5 * (dginv[a][k][l] * D1g(k, l, b) - 0.5 * dginv[a][k][l] * D1g(b, k, l));
            q -= 0.5 * (dginv[b][k][l] * D1g(k, l, a) - 0.5 * dginv[b][k][l] * D1g(a, k, l));
          }
        Q[a][b] = q;
      }
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        const double ric = 0.5 * (Ric[a][b] + Ric[b][a]);
        const double qs = 0.5 * (Q[a][b] + Q[b][a]);
        const double r = ric - L[a][b] - qs;
        res2 += r * r;
        lhs2 += L[a][b] * L[a][b];
        ric2 += ric * ric;
        Q2 += qs * qs;
      }
    rep.residual_sup = std::max(rep.residual_sup, std::sqrt(res2));
    rep.lhs_sup = std::max(rep.lhs_sup, std::sqrt(lhs2));
    rep.ricci_sup = std::max(rep.ricci_sup, std::sqrt(ric2));
    rep.Q_sup = std::max(rep.Q_sup, std::sqrt(Q2));
    if (dg2 > 1e-14) rep.C_n = std::max(rep.C_n, std::sqrt(Q2) / dg2);
    wsum += vol[t];
    r2sum += vol[t] * res2;
    ++rep.nodes;
  }
  if (rep.nodes == 0) throw Error(ErrorCode::invalid_argument, "grid too small for the metric residual");
  rep.residual_rms = std::sqrt(r2sum / wsum);
  const double scale = rep.lhs_sup + rep.ricci_sup;
  rep.relative = scale > 0 ? rep.residual_sup / scale : rep.residual_sup;
  rep.flagged = rep.relative > kPdeFlag;
  return rep;
}

namespace {

// Tensor-product cubic Lagrange interpolation of a node field (linear on axes with fewer than 4 nodes).
class CubicField {
 public:
  CubicField(const ChartGrid& grid, const std::vector<double>& F, int m) : grid_(grid), F_(F), m_(m) {}

  // out: m values; jac: m*n, d out_c / d x^a at [c*n + a]
  void eval(const double* x, double* out, double* jac) const {
    const int n = grid_.n();
    int start[kMaxN], width[kMaxN];
    double w[kMaxN][4], dw[kMaxN][4];
    for (int a = 0; a < n; ++a) {
      const int N = grid_.dims()[a];
      const double h = grid_.spacing()[a];
      const double t = (x[a] - grid_.bounds()[a].lo) / h;
      width[a] = N >= 4 ? 4 : 2;
      const int cell = std::clamp(static_cast<int>(std::floor(t)), 0, N - 2);
      start[a] = width[a] == 4 ? std::clamp(cell - 1, 0, N - 4) : cell;
      const double s = t - start[a];
      if (width[a] == 4) {
        w[a][0] = -(s - 1) * (s - 2) * (s - 3) / 6.0;
        w[a][1] = s * (s - 2) * (s - 3) / 2.0;
        w[a][2] = -s * (s - 1) * (s - 3) / 2.0;
        w[a][3] = s * (s - 1) * (s - 2) / 6.0;
        dw[a][0] = -((s - 2) * (s - 3) + (s - 1) * (s - 3) + (s - 1) * (s - 2)) / 6.0 / h;
        dw[a][1] = ((s - 2) * (s - 3) + s * (s - 3) + s * (s - 2)) / 2.0 / h;
        dw[a][2] = -((s - 1) * (s - 3) + s * (s - 3) + s * (s - 1)) / 2.0 / h;
        dw[a][3] = ((s - 1) * (s - 2) + s * (s - 2) + s * (s - 1)) / 6.0 / h;
      } else {
        w[a][0] = 1.0 - s;
        w[a][1] = s;
        dw[a][0] = -1.0 / h;
        dw[a][1] = 1.0 / h;
      }
    }
    for (int c = 0; c < m_; ++c) out[c] = 0.0;
    if (jac)
      for (int t = 0; t < m_ * n; ++t) jac[t] = 0.0;
    int total = 1;
    for (int a = 0; a < n; ++a) total *= width[a];
    for (int idx = 0; idx < total; ++idx) {
      int rem = idx;
      MultiIndex mi{};
      int loc[kMaxN];
      for (int a = 0; a < n; ++a) {
        loc[a] = rem % width[a];
        rem /= width[a];
        mi[a] = start[a] + loc[a];
      }
      double wt = 1.0;
      for (int a = 0; a < n; ++a) wt *= w[a][loc[a]];
      const double* f = F_.data() + grid_.index(mi) * m_;
      for (int c = 0; c < m_; ++c) out[c] += wt * f[c];
      if (!jac) continue;
      for (int a = 0; a < n; ++a) {
        double wa = dw[a][loc[a]];
        for (int b = 0; b < n; ++b)
          if (b != a) wa *= w[b][loc[b]];
        for (int c = 0; c < m_; ++c) jac[c * n + a] += wa * f[c];
      }
    }
  }

 private:
  const ChartGrid& grid_;
  const std::vector<double>& F_;
  int m_;
};

// Gauss-Newton for F(x) = target over the parameter box; false when the solution leaves the box or misses.
bool invert_field(const ChartGrid& grid, const CubicField& F, int m, const double* target, const double* x0,
                  double miss_tol, double* x) {
  const int n = grid.n();
  for (int a = 0; a < n; ++a) x[a] = x0[a];
  double val[kMaxD], jac[kMaxD * kMaxN];
  for (int it = 0; it < 50; ++it) {
    F.eval(x, val, jac);
    SmallMat J(m, n);
    SmallVec r(m);
    for (int c = 0; c < m; ++c) {
      r(c) = target[c] - val[c];
      for (int a = 0; a < n; ++a) J(c, a) = jac[c * n + a];
    }
    const SmallMat JtJ = J.transpose() * J;
    const SmallVec step = JtJ.ldlt().solve(J.transpose() * r);
    double sn = 0.0, xn = 0.0;
    for (int a = 0; a < n; ++a) {
      x[a] += step(a);
      const double lo = grid.bounds()[a].lo, hi = grid.bounds()[a].hi, h = grid.spacing()[a];
      x[a] = std::clamp(x[a], lo - h, hi + h);
      sn += step(a) * step(a);
      xn += x[a] * x[a];
    }
    if (std::sqrt(sn) <= 1e-14 * (1.0 + std::sqrt(xn))) break;
  }
  for (int a = 0; a < n; ++a) {
    const double lo = grid.bounds()[a].lo, hi = grid.bounds()[a].hi, h = grid.spacing()[a];
    if (x[a] < lo - 1e-9 * h || x[a] > hi + 1e-9 * h) return false;
    x[a] = std::clamp(x[a], lo, hi);
  }
  F.eval(x, val, nullptr);
  double miss = 0.0;
  for (int c = 0; c < m; ++c) miss += (target[c] - val[c]) * (target[c] - val[c]);
  return std::sqrt(miss) <= miss_tol;
}

// One-eighth of the largest second difference: the bilinear interpolation error bound.
double interpolation_tolerance(const HarmonicChart& hc) {
  const int n = hc.n, d = hc.d;
  double best = 0.0;
  for (std::size_t i = 0; i < hc.nodes(); ++i) {
    const MultiIndex mi = hc.grid.multi(i);
    double acc_phi = 0.0, acc_u = 0.0;
    for (int a = 0; a < n; ++a) {
      if (mi[a] == 0 || mi[a] == hc.grid.dims()[a] - 1) continue;
      const std::size_t s = hc.grid.stride(a);
      double mp = 0.0, mu = 0.0;
      for (int k = 0; k < d; ++k)
        mp = std::max(mp, std::abs(hc.phi[(i + s) * d + k] - 2 * hc.phi[i * d + k] + hc.phi[(i - s) * d + k]));
      for (int k = 0; k < n; ++k)
        mu = std::max(mu, std::abs(hc.coords[(i + s) * n + k] - 2 * hc.coords[i * n + k] + hc.coords[(i - s) * n + k]));
      acc_phi += mp;
      acc_u += mu;
    }
    best = std::max({best, acc_phi / 8.0, acc_u / 8.0});
  }
  return best;
}

struct ChartInverse {
  const HarmonicChart& hc;
  CubicField phi, u;
  SpatialIndex phi_index, u_index;
  double miss_tol;

  explicit ChartInverse(const HarmonicChart& c)
      : hc(c), phi(c.grid, c.phi, c.d), u(c.grid, c.coords, c.n), phi_index(c.phi, c.d), u_index(c.coords, c.n),
        miss_tol(10.0 * interpolation_tolerance(c) + 1e-12) {}

  bool from_image(const double* p, double* x) const {
    double x0[kMaxN];
    hc.grid.param(hc.grid.multi(phi_index.nearest(p)), x0);
    return invert_field(hc.grid, phi, hc.d, p, x0, miss_tol, x);
  }
  bool from_coords(const double* v, double* x) const {
    double x0[kMaxN];
    hc.grid.param(hc.grid.multi(u_index.nearest(v)), x0);
    return invert_field(hc.grid, u, hc.n, v, x0, 1e-10 * (1.0 + miss_tol), x);
  }
};

// Masked first derivative along axis: central, one-sided second order, else invalid.
bool masked_fd(const ChartGrid& grid, const std::vector<double>& F, int m, const std::vector<char>& mask,
               std::size_t i, const MultiIndex& mi, int axis, double* out) {
  const int N = grid.dims()[axis];
  const std::size_t s = grid.stride(axis);
  const double h = grid.spacing()[axis];
  auto ok = [&](int off) {
    const int p = mi[axis] + off;
    return p >= 0 && p < N && mask[static_cast<std::size_t>(static_cast<long>(i) + off * static_cast<long>(s))];
  };
  const double* f = F.data();
  if (ok(-1) && ok(1)) {
    for (int c = 0; c < m; ++c) out[c] = (f[(i + s) * m + c] - f[(i - s) * m + c]) / (2 * h);
  } else if (ok(1) && ok(2)) {
    for (int c = 0; c < m; ++c)
      out[c] = (-3 * f[i * m + c] + 4 * f[(i + s) * m + c] - f[(i + 2 * s) * m + c]) / (2 * h);
  } else if (ok(-1) && ok(-2)) {
    for (int c = 0; c < m; ++c)
      out[c] = (3 * f[i * m + c] - 4 * f[(i - s) * m + c] + f[(i - 2 * s) * m + c]) / (2 * h);
  } else {
    return false;
  }
  return true;
}

// Derivatives along u of a masked field; valid where every axis has a stencil.
std::vector<double> masked_chain(const ChartGrid& grid, const std::vector<double>& F, int m,
                                 const std::vector<char>& mask, const std::vector<double>& Jinv,
                                 std::vector<char>& valid) {
  const int n = grid.n();
  const std::size_t N = grid.node_count();
  std::vector<double> out(N * n * m, 0.0);
  valid.assign(N, 0);
  std::vector<double> dx(static_cast<std::size_t>(n) * m);
  for (std::size_t i = 0; i < N; ++i) {
    if (!mask[i]) continue;
    const MultiIndex mi = grid.multi(i);
    bool ok = true;
    for (int a = 0; a < n && ok; ++a) ok = masked_fd(grid, F, m, mask, i, mi, a, dx.data() + a * m);
    if (!ok) continue;
    valid[i] = 1;
    const double* Ji = Jinv.data() + i * n * n;
    for (int j = 0; j < n; ++j)
      for (int c = 0; c < m; ++c) {
        double s = 0.0;
        for (int a = 0; a < n; ++a) s += Ji[a * n + j] * dx[a * m + c];
        out[(i * n + j) * m + c] = s;
      }
  }
  return out;
}

}  // namespace

TransitionReport transition_map(const HarmonicChart& A, const HarmonicChart& B) {
  if (A.n != B.n || A.d != B.d) throw Error(ErrorCode::invalid_argument, "charts of different dimensions");
  if (A.coords.empty() || B.coords.empty()) throw Error(ErrorCode::invalid_argument, "chart without coordinates");
  const int n = A.n, d = A.d;
  const auto& grid = A.grid;
  const std::size_t N = A.nodes();
  const ChartInverse inv(B);
  TransitionReport rep;
  rep.interp_tol = std::max(interpolation_tolerance(A), interpolation_tolerance(B));

  std::vector<char> mask(N, 0);
  std::vector<double> V(N * n, 0.0);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::size_t i = 0; i < N; ++i) {
    double x[kMaxN];
    if (!inv.from_image(A.phi.data() + i * d, x)) continue;
    inv.u.eval(x, V.data() + i * n, nullptr);
    mask[i] = 1;
  }
  for (char f : mask) rep.overlap_nodes += f;
  // thinnest axis: longest run of overlap nodes along each axis
  int thin = std::numeric_limits<int>::max();
  for (int a = 0; a < n; ++a) {
    int best = 0;
    const std::size_t s = grid.stride(a);
    for (std::size_t i = 0; i < N; ++i) {
      if (!mask[i]) continue;
      const MultiIndex mi = grid.multi(i);
      if (mi[a] > 0 && mask[i - s]) continue;  // not a run start
      int len = 0;
      for (int p = mi[a]; p < grid.dims()[a] && mask[i + (p - mi[a]) * s]; ++p) ++len;
      best = std::max(best, len - 1);
    }
    thin = std::min(thin, best);
  }
  rep.overlap_cells = rep.overlap_nodes ? thin : 0;
  if (rep.overlap_cells < 3)
    throw Error(ErrorCode::insufficient_overlap,
                "chart overlap is " + std::to_string(rep.overlap_cells) + " cells thick, need 3");

  const auto Jinv = inverse_jacobian(A);
  std::vector<char> v1, v2, v3;
  const auto D1 = masked_chain(grid, V, n, mask, Jinv, v1);        // [j][k] = d phi^k / d u^j
  const auto D2 = masked_chain(grid, D1, n * n, v1, Jinv, v2);
  const auto D3 = masked_chain(grid, D2, n * n * n, v2, Jinv, v3);
  WeightedSampleSet s2, s3;
  for (std::size_t i = 0; i < N; ++i) {
    if (!mask[i]) continue;
    double vn = 0.0;
    for (int k = 0; k < n; ++k) vn += V[i * n + k] * V[i * n + k];
    rep.sup = std::max(rep.sup, std::sqrt(vn));
    SmallMat J(n, n);
    for (int r = 0; r < n; ++r)
      for (int a = 0; a < n; ++a) J(r, a) = A.jacobian[i * n * n + r * n + a];
    const double w = A.grid.cell_weight(A.grid.multi(i)) * std::abs(J.determinant());
    if (v1[i]) {
      SmallMat P(n, n);  // P(k, j) = d phi^k / d u^j
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) P(k, j) = D1[i * n * n + j * n + k];
      Eigen::JacobiSVD<SmallMat> svd(P);
      rep.lipschitz = std::max(rep.lipschitz, svd.singularValues()(0));
      const SmallMat PtP = P.transpose() * P;
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          rep.isometry_deviation = std::max(rep.isometry_deviation, std::abs(PtP(a, b) - (a == b ? 1.0 : 0.0)));
    }
    if (v2[i]) {
      double s = 0.0;
      for (int t = 0; t < n * n * n; ++t) s += D2[i * n * n * n + t] * D2[i * n * n * n + t];
      rep.hess_sup = std::max(rep.hess_sup, std::sqrt(s));
      s2.add(std::sqrt(s), w);
    }
    if (v3[i]) {
      double s = 0.0;
      for (int t = 0; t < n * n * n * n; ++t) s += D3[i * n * n * n * n + t] * D3[i * n * n * n * n + t];
      s3.add(std::sqrt(s), w);
    }
  }
  rep.hess_lorentz = s2.size() ? lorentz_norm(s2, n, 1.0) : 0.0;
  rep.third_lorentz = s3.size() ? lorentz_norm(s3, 0.5 * n, 1.0) : 0.0;
  return rep;
}

CompositionReport transition_composition(const HarmonicChart& A, const HarmonicChart& B, const HarmonicChart& C) {
  if (A.n != B.n || A.n != C.n || A.d != B.d || A.d != C.d)
    throw Error(ErrorCode::invalid_argument, "charts of different dimensions");
  const int n = A.n, d = A.d;
  const ChartInverse ib(B), ic(C);
  CompositionReport rep;
  rep.tolerance = std::max({interpolation_tolerance(A), interpolation_tolerance(B), interpolation_tolerance(C)});
  const std::size_t N = A.nodes();
  std::vector<double> err(N, -1.0);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::size_t i = 0; i < N; ++i) {
    const double* p = A.phi.data() + i * d;
    double xc[kMaxN], xb[kMaxN], xb2[kMaxN], xc2[kMaxN], direct[kMaxN], vb[kMaxN], via[kMaxN], p2[kMaxD];
    if (!ic.from_image(p, xc) || !ib.from_image(p, xb)) continue;
    ic.u.eval(xc, direct, nullptr);
    ib.u.eval(xb, vb, nullptr);       // phi_AB at u_A(node)
    if (!ib.from_coords(vb, xb2)) continue;  // phi_BC: back through the coordinates of B
    ib.phi.eval(xb2, p2, nullptr);
    if (!ic.from_image(p2, xc2)) continue;
    ic.u.eval(xc2, via, nullptr);
    double e = 0.0;
    for (int k = 0; k < n; ++k) e += (direct[k] - via[k]) * (direct[k] - via[k]);
    err[i] = std::sqrt(e);
  }
  for (double e : err)
    if (e >= 0) {
      ++rep.nodes;
      rep.max_error = std::max(rep.max_error, e);
    }
  if (rep.nodes == 0) throw Error(ErrorCode::insufficient_overlap, "charts have no common overlap");
  rep.ok = rep.max_error <= rep.tolerance;
  return rep;
}

}  // namespace immersia
