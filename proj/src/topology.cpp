#include "immersia/topology.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "immersia/error.hpp"
#include "immersia/spatial_index.hpp"

namespace immersia {

namespace {

using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxN, kMaxN>;

class InversionMap : public AnalyticMap {
 public:
  InversionMap(std::shared_ptr<const AnalyticMap> base, std::vector<double> Q, double R)
      : base_(std::move(base)), Q_(std::move(Q)), R2_(R * R) {}
  int n() const override { return base_->n(); }
  int d() const override { return base_->d(); }
  void eval(int chart, const double* u, Jet* out) const override {
    const int d = base_->d();
    const auto& L = JetLayout::get(base_->n());
    Jet x[kMaxD];
    for (int k = 0; k < d; ++k) x[k] = Jet(L, 0.0);
    base_->eval(chart, u, x);
    Jet s(L, 0.0);
    for (int k = 0; k < d; ++k) {
      x[k] -= Jet(L, Q_[k]);
      s += x[k] * x[k];
    }
    const Jet f = R2_ * inv(s);
    for (int k = 0; k < d; ++k) out[k] = Q_[k] + x[k] * f;
  }

 private:
  std::shared_ptr<const AnalyticMap> base_;
  std::vector<double> Q_;
  double R2_;
};

struct DisjointSet {
  std::vector<std::size_t> parent;
  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

struct NodeHeight {
  double grad[kMaxN];
  double hess[kMaxN][kMaxN];
  double grad_g = 0.0;  // |grad h|_g
};

struct Candidate {
  int chart = 0;
  std::size_t corner = 0;
  double pos[kMaxD];
  double diam = 0.0;
  double hess[kMaxN][kMaxN];
  double grad_sum = 0.0;
  double h = 0.0;
};

}  // namespace

SampledImmersion sphere_inversion(const SampledImmersion& imm, const Vec& Q, double R_inv) {
  const int d = imm.d;
  if (Q.size() != d) throw Error(ErrorCode::invalid_argument, "inversion center dimension mismatch");
  if (!(R_inv > 0)) throw Error(ErrorCode::invalid_argument, "inversion radius must be > 0");
  double min_dist = std::numeric_limits<double>::infinity();
  for (const auto& ch : imm.charts)
    for (std::size_t i = 0; i < ch.grid.node_count(); ++i) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += (ch.phi[i * d + k] - Q[k]) * (ch.phi[i * d + k] - Q[k]);
      min_dist = std::min(min_dist, std::sqrt(s));
    }
  if (!(min_dist >= 1e-6 * R_inv))
    throw Error(ErrorCode::inversion_singular, "inversion center lies on the immersion");
  std::vector<double> q(Q.data(), Q.data() + d);
  if (imm.exact()) {
    std::vector<ChartGrid> grids;
    for (const auto& ch : imm.charts) grids.push_back(ch.grid);
    SampledImmersion out = sample_analytic(std::make_shared<InversionMap>(imm.analytic, q, R_inv), grids);
    out.overlaps = imm.overlaps;
    return out;
  }
  SampledImmersion out = imm;
  out.shape_id.reset();
  out.spec.reset();
  const double R2 = R_inv * R_inv;
  for (auto& ch : out.charts)
    for (std::size_t i = 0; i < ch.grid.node_count(); ++i) {
      double* p = ch.phi.data() + i * d;
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += (p[k] - q[k]) * (p[k] - q[k]);
      for (int k = 0; k < d; ++k) p[k] = q[k] + R2 * (p[k] - q[k]) / s;
    }
  return out;
}

HeightField height_field(const SampledImmersion& imm, const Vec& e, const Vec& Q, double R_inv) {
  const int d = imm.d;
  if (e.size() != d) throw Error(ErrorCode::invalid_argument, "direction dimension mismatch");
  const double en = e.norm();
  if (!(en > 0)) throw Error(ErrorCode::invalid_argument, "direction must be nonzero");
  HeightField hf;
  hf.e.resize(d);
  for (int k = 0; k < d; ++k) hf.e[k] = e[k] / en;
  hf.Q.assign(Q.data(), Q.data() + d);
  hf.R_inv = R_inv;
  const SampledImmersion psi = sphere_inversion(imm, Q, R_inv);
  for (const auto& ch : psi.charts) {
    std::vector<double> h(ch.grid.node_count());
    for (std::size_t i = 0; i < h.size(); ++i) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += hf.e[k] * ch.phi[i * d + k];
      h[i] = s;
    }
    hf.h.push_back(std::move(h));
  }
  return hf;
}

CriticalPointReport critical_point_count(const SampledImmersion& imm, const Vec& e, const Vec& Q, double R_inv,
                                         DerivativeMode mode, Execution exec) {
  const int n = imm.n, d = imm.d;
  if (e.size() != d) throw Error(ErrorCode::invalid_argument, "direction dimension mismatch");
  const double en = e.norm();
  if (!(en > 0)) throw Error(ErrorCode::invalid_argument, "direction must be nonzero");
  CriticalPointReport rep;
  rep.e.resize(d);
  for (int k = 0; k < d; ++k) rep.e[k] = e[k] / en;
  const double* ev = rep.e.data();
  const SampledImmersion psi = sphere_inversion(imm, Q, R_inv);
  const int corners = 1 << n;

  std::vector<Candidate> cands;
  double grad_max = 0.0;
  std::vector<std::vector<double>> grad_g(psi.charts.size());
  for (int c = 0; c < static_cast<int>(psi.charts.size()); ++c) {
    const auto& grid = psi.charts[c].grid;
    const std::size_t N = grid.node_count();
    std::vector<NodeHeight> nh(N);
    std::exception_ptr failure;
    std::mutex fail_mu;
#pragma omp parallel for schedule(static) if (exec == Execution::parallel)
    for (std::size_t i = 0; i < N; ++i) {
      try {
        NodeDerivatives D;
        node_derivatives(psi, c, grid.multi(i), mode, D, 2);
        NodeHeight& H = nh[i];
        SmallMat g(n, n);
        Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxN, 1> gr(n);
        for (int a = 0; a < n; ++a) {
          double s = 0.0;
          for (int k = 0; k < d; ++k) s += ev[k] * D.d1[a][k];
          H.grad[a] = gr(a) = s;
          for (int b = 0; b < n; ++b) {
            double t = 0.0, m = 0.0;
            for (int k = 0; k < d; ++k) {
              t += ev[k] * D.d2[a][b][k];
              m += D.d1[a][k] * D.d1[b][k];
            }
            H.hess[a][b] = t;
            g(a, b) = m;
          }
        }
        H.grad_g = std::sqrt(std::max(0.0, gr.dot(g.ldlt().solve(gr))));
      } catch (...) {
        std::lock_guard<std::mutex> lock(fail_mu);
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
    grad_g[c].resize(N);
    for (std::size_t i = 0; i < N; ++i) {
      grad_g[c][i] = nh[i].grad_g;
      grad_max = std::max(grad_max, nh[i].grad_g);
    }

    // cells by lowest corner
    const auto& dims = grid.dims();
    std::vector<std::size_t> offsets(corners, 0);
    for (int m = 0; m < corners; ++m)
      for (int a = 0; a < n; ++a)
        if (m & (1 << a)) offsets[m] += grid.stride(a);
    std::vector<std::vector<Candidate>> found(N > 0 ? (N + kReduceBlock - 1) / kReduceBlock : 0);
#pragma omp parallel for schedule(dynamic) if (exec == Execution::parallel)
    for (std::size_t blk = 0; blk < found.size(); ++blk) {
      const std::size_t end = std::min(N, (blk + 1) * kReduceBlock);
      for (std::size_t i = blk * kReduceBlock; i < end; ++i) {
        const MultiIndex m = grid.multi(i);
        bool interior = true;
        for (int a = 0; a < n; ++a)
          if (m[a] >= dims[a] - 1) interior = false;
        if (!interior) continue;
        bool straddles = true;
        for (int a = 0; a < n && straddles; ++a) {
          double lo = std::numeric_limits<double>::infinity(), hi = -lo;
          for (int k = 0; k < corners; ++k) {
            const double v = nh[i + offsets[k]].grad[a];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
          }
          straddles = lo <= 0.0 && hi >= 0.0;
        }
        if (!straddles) continue;
        Candidate cd;
        cd.chart = c;
        cd.corner = i;
        for (int k = 0; k < d; ++k) cd.pos[k] = 0.0;
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) cd.hess[a][b] = 0.0;
        for (int k = 0; k < corners; ++k) {
          const std::size_t j = i + offsets[k];
          const double* p = psi.charts[c].phi.data() + j * d;
          for (int t = 0; t < d; ++t) cd.pos[t] += p[t] / corners;
          for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) cd.hess[a][b] += nh[j].hess[a][b] / corners;
          cd.grad_sum += nh[j].grad_g;
          const double* q = psi.charts[c].phi.data() + (i + offsets[corners - 1 - k]) * d;
          double s = 0.0;
          for (int t = 0; t < d; ++t) s += (p[t] - q[t]) * (p[t] - q[t]);
          cd.diam = std::max(cd.diam, std::sqrt(s));
        }
        double h = 0.0;
        for (int t = 0; t < d; ++t) h += ev[t] * cd.pos[t];
        cd.h = h;
        found[blk].push_back(cd);
      }
    }
    for (auto& f : found) cands.insert(cands.end(), f.begin(), f.end());
  }
  rep.candidate_cells = cands.size();

  std::size_t total = 0, near = 0;
  for (const auto& gc : grad_g)
    for (double v : gc) {
      ++total;
      if (v <= kNearCriticalRel * grad_max) ++near;
    }
  rep.near_critical_fraction = total > 0 ? static_cast<double>(near) / total : 0.0;
  rep.warning = rep.near_critical_fraction > kNearCriticalFraction;

  // clusters within 2 cells
  const std::size_t C = cands.size();
  DisjointSet ds(C);
  if (C > 0) {
    std::vector<double> pts(C * d);
    double diam_max = 0.0;
    for (std::size_t a = 0; a < C; ++a) {
      std::copy(cands[a].pos, cands[a].pos + d, pts.begin() + a * d);
      diam_max = std::max(diam_max, cands[a].diam);
    }
    SpatialIndex index(pts, d);
    for (std::size_t a = 0; a < C; ++a)
      index.ball(cands[a].pos, 2.0 * diam_max * (1.0 + 1e-12), [&](std::size_t b, double dist2) {
        const double reach = 2.0 * std::max(cands[a].diam, cands[b].diam);
        if (dist2 <= reach * reach) ds.unite(a, b);
      });
  }
  std::vector<std::size_t> best(C, SIZE_MAX);
  for (std::size_t a = 0; a < C; ++a) {
    const std::size_t r = ds.find(a);
    if (best[r] == SIZE_MAX || cands[a].grad_sum < cands[best[r]].grad_sum) best[r] = a;
  }
  for (std::size_t a = 0; a < C; ++a) {
    if (ds.find(a) != a) continue;
    const Candidate& cd = cands[best[a]];
    CriticalPoint cp;
    cp.chart = cd.chart;
    cp.node = cd.corner;
    cp.label = node_label(cd.chart, psi.charts[cd.chart].grid.multi(cd.corner), n);
    cp.pos.assign(cd.pos, cd.pos + d);
    cp.h = cd.h;
    SmallMat Hm(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) Hm(i, j) = 0.5 * (cd.hess[i][j] + cd.hess[j][i]);
    Eigen::SelfAdjointEigenSolver<SmallMat> es(Hm, Eigen::EigenvaluesOnly);
    for (int i = 0; i < n; ++i)
      if (es.eigenvalues()(i) < 0) ++cp.index;
    rep.points.push_back(std::move(cp));
  }
  rep.count = static_cast<int>(rep.points.size());
  return rep;
}

Vec seeded_direction(int d, std::uint64_t seed, int attempt) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vec e(d);
  for (int a = 0; a <= attempt; ++a) {
    do {
      for (int k = 0; k < d; ++k) e(k) = normal(rng);
    } while (!(e.norm() > 1e-3));
  }
  return e / e.norm();
}

CriticalPointReport critical_point_count_seeded(const SampledImmersion& imm, std::uint64_t seed, const Vec& Q,
                                                double R_inv, int max_attempts, DerivativeMode mode,
                                                Execution exec) {
  if (max_attempts < 1) throw Error(ErrorCode::invalid_argument, "max_attempts must be >= 1");
  CriticalPointReport rep;
  for (int a = 0; a < max_attempts; ++a) {
    rep = critical_point_count(imm, seeded_direction(imm.d, seed, a), Q, R_inv, mode, exec);
    rep.attempts = a + 1;
    if (!rep.warning) break;
  }
  return rep;
}

double total_curvature_integral(const SampledImmersion& imm, DerivativeMode mode, Execution exec) {
  const int n = imm.n;
  if (imm.d - imm.n != 1)
    throw Error(ErrorCode::unsupported_codimension, "total curvature integral needs codimension 1");
  double total = 0.0;
  for (int c = 0; c < static_cast<int>(imm.charts.size()); ++c) {
    const auto& grid = imm.charts[c].grid;
    const NodeAccum acc = reduce_geometry(imm, c, false, mode, exec, [&](std::size_t i, const PointGeometry& G) {
      SmallMat II(n, n), g(n, n);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          II(a, b) = G.IIc[0][a][b];
          g(a, b) = G.g[a][b];
        }
      const double shape_det = II.determinant() / g.determinant();
      return NodeAccum{grid.cell_weight(grid.multi(i)) * G.sqrt_det * std::abs(shape_det), 0.0, 0.0, 0.0};
    });
    total += acc[0];
  }
  return total;
}

}  // namespace immersia
