#include "immersia/immersion.hpp"

#include <cmath>
#include <string>

#include "immersia/error.hpp"

namespace immersia {

namespace {

// Weights of the derivative of order m at offset `at` from nodes start..start+p-1 (unit spacing).
void fd_weights(int start, int p, int at, int m, double* w) {
  double A[6][7];
  for (int k = 0; k < p; ++k) {
    double fact = 1.0;
    for (int j = 2; j <= k; ++j) fact *= j;
    for (int j = 0; j < p; ++j) {
      double x = static_cast<double>(start + j - at);
      A[k][j] = std::pow(x, k) / fact;
    }
    A[k][p] = (k == m) ? 1.0 : 0.0;
  }
  for (int c = 0; c < p; ++c) {
    int piv = c;
    for (int r = c + 1; r < p; ++r)
      if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
    for (int j = 0; j <= p; ++j) std::swap(A[c][j], A[piv][j]);
    for (int r = 0; r < p; ++r) {
      if (r == c) continue;
      double f = A[r][c] / A[c][c];
      for (int j = c; j <= p; ++j) A[r][j] -= f * A[c][j];
    }
  }
  for (int j = 0; j < p; ++j) w[j] = A[j][p] / A[j][j];
}

struct Stencil1D {
  int start = 0;  // offset of the first node relative to the evaluation node
  int size = 0;
  double w[5];
};

// Central second-order stencil in the interior, one-sided second-order within two layers of the boundary.
Stencil1D make_stencil(int i, int N, int m, double h) {
  Stencil1D s;
  int first;
  if (i >= 2 && i <= N - 3) {
    s.size = (m == 3) ? 5 : 3;
    first = i - s.size / 2;
  } else {
    s.size = m + 2;
    first = (i <= 1) ? std::min(i, N - s.size) : std::max(i - s.size + 1, 0);
  }
  double w[6];
  fd_weights(first, s.size, i, m, w);
  const double scale = std::pow(h, -m);
  for (int j = 0; j < s.size; ++j) s.w[j] = w[j] * scale;
  s.start = first - i;
  return s;
}

struct MonomialSlots {
  int deg;
  int idx[3];
};

// Index triples addressed by each jet monomial.
const std::vector<MonomialSlots>& monomial_slots(int n) {
  static std::array<std::vector<MonomialSlots>, kMaxN + 1> cache = [] {
    std::array<std::vector<MonomialSlots>, kMaxN + 1> all;
    for (int nn = 1; nn <= kMaxN; ++nn) {
      const auto& L = JetLayout::get(nn);
      for (int k = 0; k < L.size; ++k) {
        MonomialSlots s{L.degree[k], {0, 0, 0}};
        int p = 0;
        for (int a = 0; a < nn; ++a)
          for (int r = 0; r < L.exps[k][a]; ++r) s.idx[p++] = a;
        all[nn].push_back(s);
      }
    }
    return all;
  }();
  return cache[n];
}

void fill_from_jets(const JetLayout& L, const Jet* jets, int n, int d, NodeDerivatives& out) {
  out.n = n;
  out.d = d;
  const auto& slots = monomial_slots(n);
  for (int c = 0; c < d; ++c) {
    const Jet& J = jets[c];
    out.phi[c] = J.c[0];
    for (int k = 1; k < L.size; ++k) {
      const double v = J.c[k] * L.factorial[k];
      const auto& s = slots[k];
      if (s.deg == 1) {
        out.d1[s.idx[0]][c] = v;
      } else if (s.deg == 2) {
        out.d2[s.idx[0]][s.idx[1]][c] = v;
        out.d2[s.idx[1]][s.idx[0]][c] = v;
      } else {
        const int a = s.idx[0], b = s.idx[1], e = s.idx[2];
        out.d3[a][b][e][c] = v;
        out.d3[a][e][b][c] = v;
        out.d3[b][a][e][c] = v;
        out.d3[b][e][a][c] = v;
        out.d3[e][a][b][c] = v;
        out.d3[e][b][a][c] = v;
      }
    }
  }
}

class TransformedMap : public AnalyticMap {
 public:
  TransformedMap(std::shared_ptr<const AnalyticMap> base, SimilarityTransform T) : base_(std::move(base)), T_(std::move(T)) {}
  int n() const override { return base_->n(); }
  int d() const override { return base_->d(); }
  void eval(int chart, const double* u, Jet* out) const override {
    const int d = base_->d();
    Jet tmp[kMaxD];
    base_->eval(chart, u, tmp);
    const auto& L = *tmp[0].layout;
    for (int i = 0; i < d; ++i) {
      Jet acc(L, T_.translation[i]);
      for (int j = 0; j < d; ++j) {
        const double r = T_.dilation * T_.rotation(i, j);
        if (r != 0.0) acc += tmp[j] * r;
      }
      out[i] = acc;
    }
  }

 private:
  std::shared_ptr<const AnalyticMap> base_;
  SimilarityTransform T_;
};

}  // namespace

bool SampledImmersion::glued(int a, int b) const {
  if (a == b || overlaps.empty()) return true;
  for (const auto& [x, y] : overlaps)
    if ((x == a && y == b) || (x == b && y == a)) return true;
  return false;
}

std::size_t SampledImmersion::node_count() const {
  std::size_t total = 0;
  for (const auto& c : charts) total += c.grid.node_count();
  return total;
}

Vec SampledImmersion::phi(int chart, const MultiIndex& m) const {
  const auto& c = charts.at(chart);
  const double* p = c.at(c.grid.index(m), d);
  return Eigen::Map<const Vec>(p, d);
}

void SampledImmersion::validate() const {
  if (n < 2 || n > kMaxN) throw Error(ErrorCode::unsupported_dimension, "intrinsic dimension out of range");
  if (d <= n || d > kMaxD) throw Error(ErrorCode::unsupported_dimension, "ambient dimension out of range");
  for (const auto& c : charts) {
    if (c.grid.n() != n) throw Error(ErrorCode::invalid_argument, "chart dimension mismatch");
    if (c.phi.size() != c.grid.node_count() * static_cast<std::size_t>(d))
      throw Error(ErrorCode::invalid_argument, "chart value count mismatch");
    for (double v : c.phi)
      if (!std::isfinite(v)) throw Error(ErrorCode::invalid_argument, "non-finite immersion value");
  }
}

SampledImmersion sample_analytic(std::shared_ptr<const AnalyticMap> map, const std::vector<ChartGrid>& grids,
                                 std::optional<std::string> shape_id) {
  SampledImmersion imm;
  imm.n = map->n();
  imm.d = map->d();
  imm.shape_id = std::move(shape_id);
  imm.analytic = map;
  const auto& L = JetLayout::get(imm.n);
  for (std::size_t c = 0; c < grids.size(); ++c) {
    Chart ch{grids[c], {}};
    ch.phi.resize(ch.grid.node_count() * imm.d);
    const std::size_t count = ch.grid.node_count();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < count; ++i) {
      double u[kMaxN];
      ch.grid.param(ch.grid.multi(i), u);
      Jet out[kMaxD];
      for (int k = 0; k < imm.d; ++k) out[k] = Jet(L, 0.0);
      map->eval(static_cast<int>(c), u, out);
      for (int k = 0; k < imm.d; ++k) ch.phi[i * imm.d + k] = out[k].c[0];
    }
    imm.charts.push_back(std::move(ch));
  }
  return imm;
}

void point_derivatives(const SampledImmersion& imm, int chart, const double* u, NodeDerivatives& out) {
  if (!imm.analytic) throw Error(ErrorCode::unsupported, "exact derivatives need an analytic immersion");
  const auto& L = JetLayout::get(imm.n);
  Jet jets[kMaxD];
  for (int k = 0; k < imm.d; ++k) jets[k] = Jet(L, 0.0);
  imm.analytic->eval(chart, u, jets);
  fill_from_jets(L, jets, imm.n, imm.d, out);
}

void node_derivatives(const SampledImmersion& imm, int chart, const MultiIndex& node, DerivativeMode mode,
                      NodeDerivatives& out, int max_order) {
  const auto& ch = imm.charts.at(chart);
  const int n = imm.n, d = imm.d;
  const bool exact = mode == DerivativeMode::exact || (mode == DerivativeMode::automatic && imm.analytic);
  if (exact) {
    double u[kMaxN];
    ch.grid.param(node, u);
    point_derivatives(imm, chart, u, out);
    // order 0 is the stored sample
    const double* p = ch.at(ch.grid.index(node), d);
    for (int k = 0; k < d; ++k) out.phi[k] = p[k];
    return;
  }
  out.n = n;
  out.d = d;
  const double* base = ch.at(ch.grid.index(node), d);
  for (int k = 0; k < d; ++k) out.phi[k] = base[k];
  Stencil1D st[kMaxN][4];
  for (int a = 0; a < n; ++a)
    for (int m = 1; m <= max_order; ++m)
      st[a][m] = make_stencil(node[a], ch.grid.dims()[a], m, ch.grid.spacing()[a]);

  auto apply = [&](const int* axes, const int* orders, int count, double* res) {
    for (int k = 0; k < d; ++k) res[k] = 0.0;
    int sizes[3] = {1, 1, 1};
    for (int t = 0; t < count; ++t) sizes[t] = st[axes[t]][orders[t]].size;
    for (int i0 = 0; i0 < sizes[0]; ++i0)
      for (int i1 = 0; i1 < sizes[1]; ++i1)
        for (int i2 = 0; i2 < sizes[2]; ++i2) {
          const int idx[3] = {i0, i1, i2};
          MultiIndex m = node;
          double w = 1.0;
          for (int t = 0; t < count; ++t) {
            const auto& s = st[axes[t]][orders[t]];
            m[axes[t]] += s.start + idx[t];
            w *= s.w[idx[t]];
          }
          const double* p = ch.at(ch.grid.index(m), d);
          for (int k = 0; k < d; ++k) res[k] += w * p[k];
        }
  };

  for (int a = 0; a < n; ++a) {
    int ax[1] = {a}, or1[1] = {1};
    apply(ax, or1, 1, out.d1[a]);
  }
  if (max_order < 2) return;
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) {
      double r[kMaxD];
      if (a == b) {
        int ax[1] = {a}, o[1] = {2};
        apply(ax, o, 1, r);
      } else {
        int ax[2] = {a, b}, o[2] = {1, 1};
        apply(ax, o, 2, r);
      }
      for (int k = 0; k < d; ++k) out.d2[a][b][k] = out.d2[b][a][k] = r[k];
    }
  if (max_order < 3) return;
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b)
      for (int c = b; c < n; ++c) {
        double r[kMaxD];
        if (a == b && b == c) {
          int ax[1] = {a}, o[1] = {3};
          apply(ax, o, 1, r);
        } else if (a == b) {
          int ax[2] = {a, c}, o[2] = {2, 1};
          apply(ax, o, 2, r);
        } else if (b == c) {
          int ax[2] = {a, b}, o[2] = {1, 2};
          apply(ax, o, 2, r);
        } else {
          int ax[3] = {a, b, c}, o[3] = {1, 1, 1};
          apply(ax, o, 3, r);
        }
        const int p[6][3] = {{a, b, c}, {a, c, b}, {b, a, c}, {b, c, a}, {c, a, b}, {c, b, a}};
        for (const auto& q : p)
          for (int k = 0; k < d; ++k) out.d3[q[0]][q[1]][q[2]][k] = r[k];
      }
}

Vec derivative(const SampledImmersion& imm, int chart, const MultiIndex& node, const MultiIndex& order,
               DerivativeMode mode) {
  int total = 0;
  int idx[3] = {0, 0, 0};
  for (int a = 0; a < imm.n; ++a) {
    if (order[a] < 0) throw Error(ErrorCode::invalid_argument, "negative derivative order");
    for (int r = 0; r < order[a]; ++r) {
      if (total >= 3) throw Error(ErrorCode::unsupported_order, "derivative order above 3 is not supported");
      idx[total++] = a;
    }
  }
  if (!imm.charts.at(chart).grid.contains(node)) throw Error(ErrorCode::invalid_argument, "node outside grid");
  if (total == 0) return imm.phi(chart, node);
  NodeDerivatives D;
  node_derivatives(imm, chart, node, mode, D, total);
  Vec v(imm.d);
  for (int k = 0; k < imm.d; ++k) {
    if (total == 1) v[k] = D.d1[idx[0]][k];
    else if (total == 2) v[k] = D.d2[idx[0]][idx[1]][k];
    else v[k] = D.d3[idx[0]][idx[1]][idx[2]][k];
  }
  return v;
}

SimilarityTransform SimilarityTransform::identity(int d) {
  return SimilarityTransform{Vec::Zero(d), Mat::Identity(d, d), 1.0};
}

SimilarityTransform SimilarityTransform::inverse() const {
  SimilarityTransform inv;
  inv.dilation = 1.0 / dilation;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.dilation * (inv.rotation * translation));
  return inv;
}

void SimilarityTransform::validate(int d) const {
  if (translation.size() != d || rotation.rows() != d || rotation.cols() != d)
    throw Error(ErrorCode::invalid_argument, "transform dimension mismatch");
  if (!(dilation > 0)) throw Error(ErrorCode::invalid_argument, "dilation must be > 0");
  if ((rotation.transpose() * rotation - Mat::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-12)
    throw Error(ErrorCode::invalid_argument, "rotation is not orthogonal to 1e-12");
}

SampledImmersion apply_transform(const SampledImmersion& imm, const SimilarityTransform& T) {
  T.validate(imm.d);
  SampledImmersion out = imm;
  const int d = imm.d;
  for (auto& ch : out.charts) {
    const std::size_t count = ch.grid.node_count();
    for (std::size_t i = 0; i < count; ++i) {
      double* p = ch.phi.data() + i * d;
      double q[kMaxD];
      for (int r = 0; r < d; ++r) {
        double acc = 0.0;
        for (int c = 0; c < d; ++c) acc += T.rotation(r, c) * p[c];
        q[r] = T.dilation * acc + T.translation[r];
      }
      for (int r = 0; r < d; ++r) p[r] = q[r];
    }
  }
  if (imm.analytic) out.analytic = std::make_shared<TransformedMap>(imm.analytic, T);
  out.spec.reset();
  return out;
}

SampledImmersion as_numeric(const SampledImmersion& imm) {
  SampledImmersion out = imm;
  out.analytic.reset();
  out.shape_id.reset();
  out.spec.reset();
  return out;
}

SampledImmersion refine(const SampledImmersion& imm, int factor) {
  if (factor < 2) throw Error(ErrorCode::invalid_argument, "refine factor must be >= 2");
  if (imm.analytic) {
    std::vector<ChartGrid> grids;
    for (const auto& c : imm.charts) grids.push_back(c.grid.refined(factor));
    SampledImmersion out = sample_analytic(imm.analytic, grids, imm.shape_id);
    out.spec = imm.spec;
    out.overlaps = imm.overlaps;
    return out;
  }
  // tensor-product cubic Lagrange interpolation of the samples
  SampledImmersion out = imm;
  const int n = imm.n, d = imm.d;
  for (std::size_t c = 0; c < imm.charts.size(); ++c) {
    const auto& coarse = imm.charts[c];
    Chart fine{coarse.grid.refined(factor), {}};
    fine.phi.assign(fine.grid.node_count() * d, 0.0);
    const std::size_t count = fine.grid.node_count();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < count; ++i) {
      MultiIndex f = fine.grid.multi(i);
      int start[kMaxN];
      double w[kMaxN][4];
      for (int a = 0; a < n; ++a) {
        const int N = coarse.grid.dims()[a];
        const int j = f[a] / factor;
        const double t = static_cast<double>(f[a] % factor) / factor;
        start[a] = std::clamp(j - 1, 0, N - 4);
        const double x = j + t - start[a];
        for (int k = 0; k < 4; ++k) {
          double l = 1.0;
          for (int m = 0; m < 4; ++m)
            if (m != k) l *= (x - m) / static_cast<double>(k - m);
          w[a][k] = l;
        }
      }
      double acc[kMaxD] = {};
      int total = 1;
      for (int a = 0; a < n; ++a) total *= 4;
      for (int t = 0; t < total; ++t) {
        MultiIndex m{};
        double weight = 1.0;
        int r = t;
        for (int a = 0; a < n; ++a) {
          const int k = r % 4;
          r /= 4;
          m[a] = start[a] + k;
          weight *= w[a][k];
        }
        if (weight == 0.0) continue;
        const double* p = coarse.at(coarse.grid.index(m), d);
        for (int k = 0; k < d; ++k) acc[k] += weight * p[k];
      }
      for (int k = 0; k < d; ++k) fine.phi[i * d + k] = acc[k];
    }
    out.charts[c] = std::move(fine);
  }
  return out;
}

}  // namespace immersia
