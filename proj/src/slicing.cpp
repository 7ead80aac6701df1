#include "immersia/slicing.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <unordered_map>

#include "immersia/error.hpp"
#include "immersia/spatial_index.hpp"

namespace immersia {

namespace {

double dot(const double* a, const double* b, int d) {
  double s = 0.0;
  for (int c = 0; c < d; ++c) s += a[c] * b[c];
  return s;
}

double norm(const double* a, int d) { return std::sqrt(dot(a, a, d)); }

// Gram determinant volume of the simplex spanned by m+1 points in R^d.
double simplex_volume(const double* const* v, int m, int d) {
  Eigen::MatrixXd E(d, m);
  for (int j = 0; j < m; ++j)
    for (int c = 0; c < d; ++c) E(c, j) = v[j + 1][c] - v[0][c];
  const double det = (E.transpose() * E).determinant();
  double fact = 1.0;
  for (int j = 2; j <= m; ++j) fact *= j;
  return std::sqrt(std::max(0.0, det)) / fact;
}

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

// monotone lattice paths from (0,0) to (a-1,b-1)
void staircase_paths(int a, int b, std::vector<std::vector<std::pair<int, int>>>& out) {
  std::vector<std::pair<int, int>> path{{0, 0}};
  auto rec = [&](auto&& self, int i, int j) -> void {
    if (i == a - 1 && j == b - 1) {
      out.push_back(path);
      return;
    }
    if (i + 1 < a) {
      path.emplace_back(i + 1, j);
      self(self, i + 1, j);
      path.pop_back();
    }
    if (j + 1 < b) {
      path.emplace_back(i, j + 1);
      self(self, i, j + 1);
      path.pop_back();
    }
  };
  rec(rec, 0, 0);
}

// Parameter t in [0,1] where the segment a + t (b - a) meets the sphere, entering from a outside.
double edge_crossing(const double* a, const double* b, const double* q, double rho, int d) {
  double aa = 0.0, ae = 0.0, ee = 0.0;
  for (int c = 0; c < d; ++c) {
    const double x = a[c] - q[c], e = b[c] - a[c];
    aa += x * x;
    ae += x * e;
    ee += e * e;
  }
  const double cst = aa - rho * rho;
  const double disc = std::sqrt(std::max(0.0, ae * ae - ee * cst));
  // smaller root, in the cancellation-free form
  const double t = (ae <= 0) ? cst / (-ae + disc) : (-ae - disc) / ee;
  return std::clamp(t, 0.0, 1.0);
}

struct Piece {
  int chart = 0;
  double u[kMaxN];
  double pos[kMaxD];
  double area = 0.0;
  double grad = 0.0;
  double frame[kMaxCodim][kMaxD];
  double tangent[kMaxN][kMaxD];
  double IIs[kMaxCodim][kMaxN][kMaxN];
  double Hc[kMaxCodim];
  double II_norm = 0.0;
  std::vector<double> simplices;                  // n*d per sub-simplex
  std::vector<std::uint64_t> edges;               // chart-local edge keys
  std::vector<double> seam_points;                // d per point on a chart-boundary edge
  std::string label;
  bool tangential = false;
};

// Orthonormal slice tangents and II restricted to them.
void slice_frame(const PointGeometry& G, const double* x, Piece& P) {
  const int n = G.n, d = G.d, k = G.k;
  double T[kMaxN][kMaxD];
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < d; ++c) T[i][c] = G.tangent[i][c];
    for (int pass = 0; pass < 2; ++pass)
      for (int j = 0; j < i; ++j) {
        const double s = dot(T[j], T[i], d);
        for (int c = 0; c < d; ++c) T[i][c] -= s * T[j][c];
      }
    const double nt = norm(T[i], d);
    for (int c = 0; c < d; ++c) T[i][c] /= nt;
  }
  // radial direction within the tangent space
  double e0[kMaxD] = {};
  for (int i = 0; i < n; ++i) {
    const double s = dot(T[i], x, d);
    for (int c = 0; c < d; ++c) e0[c] += s * T[i][c];
  }
  const double ne0 = norm(e0, d);
  for (int c = 0; c < d; ++c) e0[c] /= ne0;
  // greedy Gram-Schmidt of the tangent basis against e0
  double cand[kMaxN][kMaxD];
  bool used[kMaxN] = {};
  for (int i = 0; i < n; ++i) {
    const double s = dot(T[i], e0, d);
    for (int c = 0; c < d; ++c) cand[i][c] = T[i][c] - s * e0[c];
  }
  for (int out = 0; out < n - 1; ++out) {
    int best = -1;
    double best_norm = -1.0;
    for (int i = 0; i < n; ++i) {
      if (used[i]) continue;
      double v[kMaxD];
      for (int c = 0; c < d; ++c) v[c] = cand[i][c];
      for (int j = 0; j < out; ++j) {
        const double s = dot(P.tangent[j], v, d);
        for (int c = 0; c < d; ++c) v[c] -= s * P.tangent[j][c];
      }
      const double nv = norm(v, d);
      if (nv > best_norm) {
        best_norm = nv;
        best = i;
      }
    }
    used[best] = true;
    double v[kMaxD];
    for (int c = 0; c < d; ++c) v[c] = cand[best][c];
    for (int pass = 0; pass < 2; ++pass)
      for (int j = 0; j < out; ++j) {
        const double s = dot(P.tangent[j], v, d);
        for (int c = 0; c < d; ++c) v[c] -= s * P.tangent[j][c];
      }
    const double nv = norm(v, d);
    for (int c = 0; c < d; ++c) P.tangent[out][c] = v[c] / nv;
  }
  // parameter components of each slice tangent
  double coef[kMaxN][kMaxN];
  for (int i = 0; i < n - 1; ++i) {
    double proj[kMaxN];
    for (int a = 0; a < n; ++a) proj[a] = dot(P.tangent[i], G.tangent[a], d);
    for (int a = 0; a < n; ++a) {
      double s = 0.0;
      for (int b = 0; b < n; ++b) s += G.ginv[a][b] * proj[b];
      coef[i][a] = s;
    }
  }
  for (int al = 0; al < k; ++al) {
    double tr = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) tr += G.ginv[a][b] * G.IIc[al][a][b];
    P.Hc[al] = tr / n;
    for (int i = 0; i < n - 1; ++i)
      for (int j = 0; j < n - 1; ++j) {
        double s = 0.0;
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) s += G.IIc[al][a][b] * coef[i][a] * coef[j][b];
        P.IIs[al][i][j] = s;
      }
  }
  for (int al = 0; al < k; ++al)
    for (int c = 0; c < d; ++c) P.frame[al][c] = G.normal[al][c];
  P.II_norm = std::sqrt(std::max(0.0, G.II_norm2));
}

// Geometry at parameter point u; exact maps are first pulled onto the level set.
bool piece_geometry(const SampledImmersion& imm, int chart, double* u, const double* q, double rho, bool exact,
                    const MultiIndex* verts, const double* bary, PointGeometry& G) {
  const int n = imm.n, d = imm.d;
  NodeDerivatives D;
  if (exact) {
    for (int it = 0; it < 3; ++it) {
      point_derivatives(imm, chart, u, D);
      if (it == 2) break;
      double x[kMaxD];
      for (int c = 0; c < d; ++c) x[c] = D.phi[c] - q[c];
      const double r = norm(x, d);
      const double f = r - rho;
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxN, kMaxN> g(n, n);
      Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxN, 1> df(n);
      for (int a = 0; a < n; ++a) {
        df(a) = dot(x, D.d1[a], d) / r;
        for (int b = 0; b < n; ++b) g(a, b) = dot(D.d1[a], D.d1[b], d);
      }
      const auto step = g.ldlt().solve(df).eval();
      const double denom = df.dot(step);
      if (!(denom > 0)) break;
      for (int a = 0; a < n; ++a) u[a] -= f * step(a) / denom;
    }
  } else {
    NodeDerivatives acc{};
    acc.n = n;
    acc.d = d;
    for (int v = 0; v <= n; ++v) {
      NodeDerivatives Dv;
      node_derivatives(imm, chart, verts[v], DerivativeMode::numeric, Dv);
      const double w = bary[v];
      for (int c = 0; c < d; ++c) acc.phi[c] += w * Dv.phi[c];
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < d; ++c) acc.d1[i][c] += w * Dv.d1[i][c];
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int c = 0; c < d; ++c) acc.d2[i][j][c] += w * Dv.d2[i][j][c];
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int l = 0; l < n; ++l)
            for (int c = 0; c < d; ++c) acc.d3[i][j][l][c] += w * Dv.d3[i][j][l][c];
    }
    D = acc;
  }
  return point_geometry(D, G, false);
}

}  // namespace

double Slice::total_area(int comp) const {
  double s = 0.0;
  for (std::size_t c = 0; c < cells; ++c)
    if (in_component(c, comp)) s += area[c];
  return s;
}

Slice level_set_slice(const SampledImmersion& imm, const Vec& q, double rho, TangencyPolicy policy, double trans_tol,
                      DerivativeMode mode, Execution exec) {
  if (!(rho > 0)) throw Error(ErrorCode::invalid_argument, "slice radius must be > 0");
  if (q.size() != imm.d) throw Error(ErrorCode::invalid_argument, "slice center has the wrong dimension");
  const int n = imm.n, d = imm.d, k = d - n;
  if (n < 2) throw Error(ErrorCode::unsupported_dimension, "slicing needs n >= 2");
  const bool exact = mode == DerivativeMode::exact || (mode == DerivativeMode::automatic && imm.analytic);
  if (exact && !imm.analytic) throw Error(ErrorCode::unsupported, "exact derivatives need an analytic immersion");

  Slice s;
  s.n = n;
  s.d = d;
  s.k = k;
  s.q.assign(q.data(), q.data() + d);
  s.rho = rho;

  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::vector<int>> perms;
  do perms.push_back(perm);
  while (std::next_permutation(perm.begin(), perm.end()));

  std::vector<Piece> pieces;
  std::vector<std::size_t> chart_begin;
  for (int ch = 0; ch < static_cast<int>(imm.charts.size()); ++ch) {
    chart_begin.push_back(pieces.size());
    const auto& chart = imm.charts[ch];
    const auto& grid = chart.grid;
    const std::size_t N = grid.node_count();
    std::vector<double> f(N);
    bool pos_any = false, neg_any = false;
    for (std::size_t i = 0; i < N; ++i) {
      double r2 = 0.0;
      for (int c = 0; c < d; ++c) {
        const double e = chart.phi[i * d + c] - q[c];
        r2 += e * e;
      }
      f[i] = std::sqrt(r2) - rho;
      (f[i] >= 0 ? pos_any : neg_any) = true;
    }
    if (!pos_any || !neg_any) continue;

    std::vector<int> cdims(n);
    std::size_t cell_count = 1;
    for (int a = 0; a < n; ++a) {
      cdims[a] = grid.dims()[a] - 1;
      cell_count *= cdims[a];
    }
    const std::size_t blocks = (cell_count + kReduceBlock - 1) / kReduceBlock;
    std::vector<std::vector<Piece>> out(blocks);
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex mu;

    auto run_block = [&](std::size_t b) {
      std::vector<Piece>& local = out[b];
      const std::size_t hi = std::min(cell_count, (b + 1) * kReduceBlock);
      for (std::size_t cell = b * kReduceBlock; cell < hi; ++cell) {
        MultiIndex base{};
        std::size_t rem = cell;
        for (int a = n - 1; a >= 0; --a) {
          base[a] = static_cast<int>(rem % cdims[a]);
          rem /= cdims[a];
        }
        // quick corner test
        bool cp = false, cn = false;
        for (int corner = 0; corner < (1 << n); ++corner) {
          MultiIndex m = base;
          for (int a = 0; a < n; ++a) m[a] += (corner >> a) & 1;
          (f[grid.index(m)] >= 0 ? cp : cn) = true;
        }
        if (!cp || !cn) continue;
        for (std::size_t pi = 0; pi < perms.size(); ++pi) {
          const auto& pm = perms[pi];
          MultiIndex verts[kMaxN + 1];
          std::size_t vidx[kMaxN + 1];
          verts[0] = base;
          for (int j = 1; j <= n; ++j) {
            verts[j] = verts[j - 1];
            verts[j][pm[j - 1]] += 1;
          }
          int P[kMaxN + 1], Nn[kMaxN + 1], np = 0, nn = 0;
          for (int j = 0; j <= n; ++j) {
            vidx[j] = grid.index(verts[j]);
            if (f[vidx[j]] >= 0) P[np++] = j;
            else Nn[nn++] = j;
          }
          if (np == 0 || nn == 0) continue;

          Piece piece;
          piece.chart = ch;
          // edge points w(i,j) between positive vertex P[i] and negative vertex N[j]
          double wpos[kMaxN + 1][kMaxN + 1][kMaxD];
          double wpar[kMaxN + 1][kMaxN + 1][kMaxN];
          for (int i = 0; i < np; ++i)
            for (int j = 0; j < nn; ++j) {
              const std::size_t A = vidx[P[i]], B = vidx[Nn[j]];
              const double t = edge_crossing(chart.phi.data() + A * d, chart.phi.data() + B * d, q.data(), rho, d);
              double ua[kMaxN], ub[kMaxN];
              grid.param(verts[P[i]], ua);
              grid.param(verts[Nn[j]], ub);
              for (int a = 0; a < n; ++a) wpar[i][j][a] = ua[a] + t * (ub[a] - ua[a]);
              for (int c = 0; c < d; ++c)
                wpos[i][j][c] = chart.phi[A * d + c] + t * (chart.phi[B * d + c] - chart.phi[A * d + c]);
              const std::size_t lo = std::min(A, B), hiN = std::max(A, B);
              piece.edges.push_back(static_cast<std::uint64_t>(lo) * N + hiN);
              if (grid.is_boundary(verts[P[i]]) && grid.is_boundary(verts[Nn[j]]))
                piece.seam_points.insert(piece.seam_points.end(), wpos[i][j], wpos[i][j] + d);
            }
          std::vector<std::vector<std::pair<int, int>>> paths;
          staircase_paths(np, nn, paths);
          double ucent[kMaxN] = {};
          for (const auto& path : paths) {
            const double* vp[kMaxN];
            for (int j = 0; j < n; ++j) vp[j] = wpos[path[j].first][path[j].second];
            const double vol = simplex_volume(vp, n - 1, d);
            for (int j = 0; j < n; ++j) {
              piece.simplices.insert(piece.simplices.end(), vp[j], vp[j] + d);
              for (int a = 0; a < n; ++a) ucent[a] += vol * wpar[path[j].first][path[j].second][a] / n;
            }
            piece.area += vol;
          }
          if (!(piece.area > 0)) continue;
          for (int a = 0; a < n; ++a) piece.u[a] = ucent[a] / piece.area;

          // barycentric coordinates of the centroid in the Kuhn simplex
          double bary[kMaxN + 1];
          {
            double u0[kMaxN], sfrac[kMaxN];
            grid.param(base, u0);
            for (int j = 0; j < n; ++j) {
              const int a = pm[j];
              sfrac[j] = std::clamp((piece.u[a] - u0[a]) / grid.spacing()[a], 0.0, 1.0);
            }
            bary[0] = 1.0 - sfrac[0];
            for (int j = 1; j < n; ++j) bary[j] = sfrac[j - 1] - sfrac[j];
            bary[n] = sfrac[n - 1];
          }
          PointGeometry G;
          if (!piece_geometry(imm, ch, piece.u, s.q.data(), rho, exact, verts, bary, G)) {
            MultiIndex mm = base;
            throw Error(ErrorCode::degenerate_metric, "degenerate metric in slice cell " + node_label(ch, mm, n));
          }
          for (int c = 0; c < d; ++c) piece.pos[c] = G.pos[c];
          double x[kMaxD];
          for (int c = 0; c < d; ++c) x[c] = G.pos[c] - s.q[c];
          const double r = norm(x, d);
          double dfa[kMaxN];
          for (int a = 0; a < n; ++a) dfa[a] = dot(x, G.tangent[a], d) / r;
          double gn = 0.0;
          for (int a = 0; a < n; ++a)
            for (int bb = 0; bb < n; ++bb) gn += G.ginv[a][bb] * dfa[a] * dfa[bb];
          piece.grad = std::sqrt(std::max(0.0, gn));
          piece.label = node_label(ch, base, n) + "/" + std::to_string(pi);
          if (piece.grad < trans_tol) {
            piece.tangential = true;
          } else {
            slice_frame(G, x, piece);
          }
          local.push_back(std::move(piece));
        }
      }
    };
    auto guarded = [&](std::size_t b) {
      if (failed.load(std::memory_order_relaxed)) return;
      try {
        run_block(b);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failed.exchange(true)) error = std::current_exception();
      }
    };
    if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
      for (std::size_t b = 0; b < blocks; ++b) guarded(b);
    } else {
      for (std::size_t b = 0; b < blocks; ++b) guarded(b);
    }
    if (error) std::rethrow_exception(error);
    for (auto& blk : out)
      for (auto& p : blk) pieces.push_back(std::move(p));
  }

  // transversality filter
  std::vector<std::string> bad;
  std::vector<Piece> kept;
  kept.reserve(pieces.size());
  for (auto& p : pieces) {
    if (p.tangential) bad.push_back(p.label);
    else kept.push_back(std::move(p));
  }
  if (!bad.empty() && policy == TangencyPolicy::error) {
    std::string names;
    for (std::size_t i = 0; i < bad.size() && i < 8; ++i) names += (i ? ", " : "") + bad[i];
    if (bad.size() > 8) names += ", ...";
    throw Error(ErrorCode::tangency,
                "slice is tangential in " + std::to_string(bad.size()) + " cells: " + names);
  }
  s.skipped = std::move(bad);

  const std::size_t C = kept.size();
  s.cells = C;
  const int m = n - 1;
  s.chart.resize(C);
  s.u.resize(C * n);
  s.pos.resize(C * d);
  s.area.resize(C);
  s.grad.resize(C);
  s.frame.resize(C * k * d);
  s.tangent.resize(C * m * d);
  s.II_slice.resize(C * k * m * m);
  s.H_comp.resize(C * k);
  s.II_norm.resize(C);
  s.component.assign(C, 0);
  for (std::size_t c = 0; c < C; ++c) {
    const Piece& p = kept[c];
    s.chart[c] = p.chart;
    for (int a = 0; a < n; ++a) s.u[c * n + a] = p.u[a];
    for (int e = 0; e < d; ++e) s.pos[c * d + e] = p.pos[e];
    s.area[c] = p.area;
    s.grad[c] = p.grad;
    for (int al = 0; al < k; ++al)
      for (int e = 0; e < d; ++e) s.frame[(c * k + al) * d + e] = p.frame[al][e];
    for (int i = 0; i < m; ++i)
      for (int e = 0; e < d; ++e) s.tangent[(c * m + i) * d + e] = p.tangent[i][e];
    for (int al = 0; al < k; ++al) {
      s.H_comp[c * k + al] = p.Hc[al];
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) s.II_slice[((c * k + al) * m + i) * m + j] = p.IIs[al][i][j];
    }
    s.II_norm[c] = p.II_norm;
    const std::size_t ns = p.simplices.size() / (static_cast<std::size_t>(n) * d);
    s.simplex.insert(s.simplex.end(), p.simplices.begin(), p.simplices.end());
    for (std::size_t t = 0; t < ns; ++t) s.simplex_cell.push_back(c);
  }

  // components: shared lattice edges within a chart, coincident seam points across glued charts
  DisjointSet ds(C);
  {
    std::unordered_map<std::uint64_t, std::size_t> first;
    int cur_chart = -1;
    for (std::size_t c = 0; c < C; ++c) {
      if (kept[c].chart != cur_chart) {
        first.clear();
        cur_chart = kept[c].chart;
      }
      for (std::uint64_t e : kept[c].edges) {
        auto [it, inserted] = first.emplace(e, c);
        if (!inserted) ds.unite(it->second, c);
      }
    }
    std::vector<double> pts;
    std::vector<std::size_t> owner;
    for (std::size_t c = 0; c < C; ++c) {
      const auto& sp = kept[c].seam_points;
      for (std::size_t t = 0; t < sp.size() / d; ++t) {
        pts.insert(pts.end(), sp.begin() + t * d, sp.begin() + (t + 1) * d);
        owner.push_back(c);
      }
    }
    if (!owner.empty()) {
      SpatialIndex idx(pts, d);
      const double tol = 1e-9 * (1.0 + rho);
      for (std::size_t t = 0; t < owner.size(); ++t) {
        idx.ball(pts.data() + t * d, tol, [&](std::size_t j, double) {
          const int ca = kept[owner[t]].chart, cb = kept[owner[j]].chart;
          if (ca != cb && imm.glued(ca, cb)) ds.unite(owner[t], owner[j]);
        });
      }
    }
  }
  std::unordered_map<std::size_t, int> comp_id;
  for (std::size_t c = 0; c < C; ++c) {
    auto [it, inserted] = comp_id.emplace(ds.find(c), static_cast<int>(comp_id.size()));
    s.component[c] = it->second;
  }
  s.component_count = static_cast<int>(comp_id.size());
  return s;
}

void slice_second_form(Slice& s) {
  const int n = s.n, d = s.d, k = s.k, m = n - 1;
  s.A_trace_free.assign(s.cells * k * m * m, 0.0);
  s.A_mean.assign(s.cells * k, 0.0);
  s.A_norm.assign(s.cells, 0.0);
  s.A_bound.assign(s.cells, 0.0);
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  for (std::size_t c = 0; c < s.cells; ++c) {
    double x[kMaxD];
    for (int e = 0; e < d; ++e) x[e] = s.pos[c * d + e] - s.q[e];
    const double r2 = dot(x, x, d);
    double perp2 = 0.0, a2 = 0.0;
    for (int al = 0; al < k; ++al) {
      const double* na = s.frame.data() + (c * k + al) * d;
      const double nx = dot(na, x, d);
      perp2 += nx * nx;
      double v[kMaxD];
      for (int e = 0; e < d; ++e) v[e] = r2 * na[e] - nx * x[e];
      const double D = norm(v, d);
      if (!(D >= 1e-12 * s.rho * s.rho))
        throw Error(ErrorCode::singular_configuration,
                    "slice cell " + std::to_string(c) + " of chart " + std::to_string(s.chart[c]) +
                        " is tangent to the normal direction");
      const double H = s.H_comp[c * k + al];
      const double h = (r2 * H + nx) / D;
      s.A_mean[c * k + al] = h;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
          const double II = s.II_slice[((c * k + al) * m + i) * m + j];
          const double ring = r2 / D * (II - (i == j ? H : 0.0));
          s.A_trace_free[((c * k + al) * m + i) * m + j] = ring;
          const double A = ring + (i == j ? h : 0.0);
          a2 += A * A;
        }
    }
    const double W = std::sqrt(std::max(0.0, r2 - perp2) * r2);
    s.A_norm[c] = std::sqrt(a2);
    s.A_bound[c] = W > 0 ? (2.0 + sqrt_n) * r2 * s.II_norm[c] / W + sqrt_n * std::sqrt(perp2) / W : INFINITY;
  }
  s.has_second_form = true;
}

double slice_quality(const Slice& s, double ball_energy, double r, int comp) {
  if (!(r > 0)) throw Error(ErrorCode::invalid_argument, "scale must be > 0");
  const int n = s.n, d = s.d, k = s.k;
  double total = 0.0;
  for (std::size_t c = 0; c < s.cells; ++c) {
    if (!s.in_component(c, comp)) continue;
    double x[kMaxD];
    for (int e = 0; e < d; ++e) x[e] = s.pos[c * d + e] - s.q[e];
    const double r2 = dot(x, x, d);
    double perp2 = 0.0;
    for (int al = 0; al < k; ++al) {
      const double nx = dot(s.frame.data() + (c * k + al) * d, x, d);
      perp2 += nx * nx;
    }
    const double W = std::sqrt(std::max(0.0, r2 - perp2) * r2);
    if (!(W >= 1e-12 * s.rho * s.rho))
      throw Error(ErrorCode::singular_configuration, "slice cell " + std::to_string(c) + " has a singular denominator");
    const double lead = std::pow(std::sqrt(r2) / W, n);  // |x|^n / W^n
    double bend = 0.0;
    if (s.II_norm[c] > 0) bend = std::pow(r2, n) * std::pow(s.II_norm[c], n) / (std::pow(W, n) * ball_energy);
    total += s.area[c] * (bend + lead + 1.0 / std::pow(r, n));
  }
  return total;
}

double slice_A_norm(const Slice& s, int comp) {
  if (!s.has_second_form) throw Error(ErrorCode::precondition, "slice second form not computed");
  double acc = 0.0;
  for (std::size_t c = 0; c < s.cells; ++c)
    if (s.in_component(c, comp)) acc += s.area[c] * std::pow(s.A_norm[c], s.n);
  return std::pow(acc, 1.0 / s.n);
}

double slice_II_norm(const Slice& s, int comp) {
  double acc = 0.0;
  for (std::size_t c = 0; c < s.cells; ++c)
    if (s.in_component(c, comp)) acc += s.area[c] * std::pow(s.II_norm[c], s.n);
  return std::pow(acc, 1.0 / s.n);
}

SliceSearchResult good_slice_search(const SampledImmersion& imm, const Vec& p, double r, int q_count, int rho_count,
                                    double ball_energy, DerivativeMode mode, Execution exec) {
  if (q_count < 3 || rho_count < 3) throw Error(ErrorCode::invalid_argument, "search grid counts must be >= 3");
  if (!(r > 0)) throw Error(ErrorCode::invalid_argument, "scale must be > 0");
  const int d = imm.d, n = imm.n;
  SliceSearchResult res;
  res.ball_energy = ball_energy >= 0 ? ball_energy : energy_in_extrinsic_ball(imm, p, 2.0 * r, mode, exec).total;
  res.eps = std::pow(res.ball_energy, 1.0 / n);

  // q lattice: samples t = i/(q_count-1) of a curve from p outwards; refining to 2 q_count - 1 keeps the old points
  std::vector<Vec> qs;
  for (int i = 0; i < q_count; ++i) {
    const double t = static_cast<double>(i) / (q_count - 1);
    Vec dir(d);
    for (int c = 0; c < d; ++c) dir(c) = std::sin(std::numbers::pi * (c + 1) * t + 0.6180339887498949 * (c + 1));
    dir /= dir.norm();
    qs.push_back(p + (r / 100.0) * 0.9 * t * dir);
  }
  std::vector<double> rhos;
  for (int j = 0; j < rho_count; ++j) rhos.push_back(r * (0.6 + 0.3 * j / (rho_count - 1)));

  bool have = false;
  double sum = 0.0;
  for (const auto& q : qs)
    for (double rho : rhos) {
      ++res.candidates;
      Slice sl = level_set_slice(imm, q, rho, TangencyPolicy::skip, kTransTol, mode, exec);
      if (sl.empty() || !sl.skipped.empty()) continue;
      double qual;
      try {
        slice_second_form(sl);
        qual = slice_quality(sl, res.ball_energy, r);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::singular_configuration) continue;
        throw;
      }
      if (!std::isfinite(qual)) continue;
      ++res.admissible;
      sum += qual;
      bool better = !have;
      if (have) {
        const double tol = 1e-12 * std::max(std::abs(qual), std::abs(res.quality));
        if (qual < res.quality - tol) better = true;
        else if (std::abs(qual - res.quality) <= tol) {
          if (rho < res.rho) better = true;
          else if (rho == res.rho)
            better = std::lexicographical_compare(q.data(), q.data() + d, res.q.data(), res.q.data() + d);
        }
      }
      if (better) {
        have = true;
        res.quality = qual;
        res.rho = rho;
        res.q.assign(q.data(), q.data() + d);
        res.slice = std::move(sl);
      }
    }
  if (!have) throw Error(ErrorCode::search_failure, "every candidate slice is tangential or empty");
  res.mean_quality = sum / res.admissible;
  const double rn = std::pow(r, 1.0 / n);
  res.c_A = rn * slice_A_norm(res.slice);
  res.c_II = res.eps > 0 ? rn * slice_II_norm(res.slice) / res.eps : 0.0;
  res.c_vol = res.slice.total_area() / std::pow(r, n - 1);
  res.c_mean = res.mean_quality * r;
  return res;
}

namespace {

// Exact diameter of a point set: bucket boxes prune pairs that cannot beat the current best.
double point_set_diameter(const std::vector<const double*>& pts, int d) {
  const std::size_t N = pts.size();
  if (N < 2) return 0.0;
  auto dist2 = [&](const double* a, const double* b) {
    double s = 0.0;
    for (int c = 0; c < d; ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
    return s;
  };
  // lower bound from repeated farthest-point sweeps
  double best = 0.0;
  std::size_t from = 0;
  for (int sweep = 0; sweep < 4; ++sweep) {
    std::size_t far = from;
    double fd = -1.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double e = dist2(pts[from], pts[i]);
      if (e > fd) {
        fd = e;
        far = i;
      }
    }
    best = std::max(best, fd);
    from = far;
  }
  if (best == 0.0) return 0.0;
  const double cell = std::max(std::sqrt(best) / 16.0, 1e-9);
  std::map<std::vector<long long>, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < N; ++i) {
    std::vector<long long> key(d);
    for (int c = 0; c < d; ++c) key[c] = static_cast<long long>(std::floor(pts[i][c] / cell));
    buckets[key].push_back(i);
  }
  struct Box {
    std::vector<double> lo, hi;
    std::vector<std::size_t> members;
  };
  std::vector<Box> boxes;
  for (auto& [key, members] : buckets) {
    Box b{std::vector<double>(d, INFINITY), std::vector<double>(d, -INFINITY), std::move(members)};
    for (std::size_t i : b.members)
      for (int c = 0; c < d; ++c) {
        b.lo[c] = std::min(b.lo[c], pts[i][c]);
        b.hi[c] = std::max(b.hi[c], pts[i][c]);
      }
    boxes.push_back(std::move(b));
  }
  const std::ptrdiff_t B = static_cast<std::ptrdiff_t>(boxes.size());
  const double lower = best;
#pragma omp parallel for schedule(dynamic, 8) reduction(max : best)
  for (std::ptrdiff_t a = 0; a < B; ++a)
    for (std::ptrdiff_t b = a; b < B; ++b) {
      double ub = 0.0;
      for (int c = 0; c < d; ++c) {
        const double e = std::max(boxes[b].hi[c] - boxes[a].lo[c], boxes[a].hi[c] - boxes[b].lo[c]);
        ub += e * e;
      }
      if (ub <= std::max(best, lower)) continue;
      for (std::size_t i : boxes[a].members)
        for (std::size_t j : boxes[b].members) best = std::max(best, dist2(pts[i], pts[j]));
    }
  return std::sqrt(best);
}

}  // namespace

double gauss_oscillation(const Slice& s, int comp) {
  std::vector<const double*> frames;
  for (std::size_t c = 0; c < s.cells; ++c)
    if (s.in_component(c, comp)) frames.push_back(s.cell_frame(c));
  // in codimension one the aligned frame distance is the plain distance of unit normals
  if (s.k == 1) return point_set_diameter(frames, s.d);
  return frame_oscillation(frames, s.k, s.d);
}

PlaneFit plane_fit(const Slice& s, int comp) {
  const int n = s.n, d = s.d, k = s.k;
  PlaneFit fit;
  std::vector<double> mean(k * d, 0.0);
  double total = 0.0;
  const double* ref = nullptr;
  for (std::size_t c = 0; c < s.cells; ++c) {
    if (!s.in_component(c, comp)) continue;
    double fr[kMaxCodim * kMaxD];
    std::copy(s.cell_frame(c), s.cell_frame(c) + k * d, fr);
    if (!ref) ref = s.cell_frame(c);
    else if (k > 1) align_frame(fr, ref, k, d);
    for (int i = 0; i < k * d; ++i) mean[i] += s.area[c] * fr[i];
    total += s.area[c];
  }
  if (!(total > 0)) throw Error(ErrorCode::precondition, "plane fit needs a nonempty slice");
  for (double& v : mean) v /= total;
  for (int al = 0; al < k; ++al) {
    const double nm = norm(mean.data() + al * d, d);
    fit.mean_norms.push_back(nm);
    if (nm < 0.5)
      throw Error(ErrorCode::oscillation_too_large,
                  "average normal " + std::to_string(al) + " has length " + std::to_string(nm) + " < 1/2");
  }
  fit.normals = mean;
  for (int al = 0; al < k; ++al) {
    double* v = fit.normals.data() + al * d;
    for (int pass = 0; pass < 2; ++pass)
      for (int b = 0; b < al; ++b) {
        const double sb = dot(fit.normals.data() + b * d, v, d);
        for (int c = 0; c < d; ++c) v[c] -= sb * fit.normals[b * d + c];
      }
    const double nv = norm(v, d);
    for (int c = 0; c < d; ++c) v[c] /= nv;
  }
  // plane basis: greedy completion of the normals
  std::vector<double> basis = fit.normals;
  for (int out = 0; out < n; ++out) {
    int best = -1;
    double best_norm = -1.0;
    double best_v[kMaxD];
    for (int e = 0; e < d; ++e) {
      double v[kMaxD] = {};
      v[e] = 1.0;
      const int have = static_cast<int>(basis.size()) / d;
      for (int pass = 0; pass < 2; ++pass)
        for (int b = 0; b < have; ++b) {
          const double sb = dot(basis.data() + b * d, v, d);
          for (int c = 0; c < d; ++c) v[c] -= sb * basis[b * d + c];
        }
      const double nv = norm(v, d);
      if (nv > best_norm) {
        best_norm = nv;
        best = e;
        for (int c = 0; c < d; ++c) best_v[c] = v[c] / nv;
      }
    }
    (void)best;
    basis.insert(basis.end(), best_v, best_v + d);
    fit.frame.insert(fit.frame.end(), best_v, best_v + d);
  }
  fit.q_S = s.q;
  for (int al = 0; al < k; ++al) {
    const double* N = fit.normals.data() + al * d;
    double avg = 0.0;
    for (std::size_t c = 0; c < s.cells; ++c) {
      if (!s.in_component(c, comp)) continue;
      double x[kMaxD];
      for (int e = 0; e < d; ++e) x[e] = s.pos[c * d + e] - s.q[e];
      avg += s.area[c] * dot(x, N, d);
    }
    avg /= total;
    for (int e = 0; e < d; ++e) fit.q_S[e] += avg * N[e];
  }
  for (std::size_t c = 0; c < s.cells; ++c) {
    if (!s.in_component(c, comp)) continue;
    double x[kMaxD];
    for (int e = 0; e < d; ++e) x[e] = s.pos[c * d + e] - fit.q_S[e];
    double r2 = 0.0;
    for (int al = 0; al < k; ++al) {
      const double t = dot(x, fit.normals.data() + al * d, d);
      r2 += t * t;
    }
    fit.residual = std::max(fit.residual, std::sqrt(r2));
  }
  double off2 = 0.0;
  for (int e = 0; e < d; ++e) off2 += (fit.q_S[e] - s.q[e]) * (fit.q_S[e] - s.q[e]);
  fit.offset = std::sqrt(off2);
  return fit;
}

SphereGraph graph_extract(const Slice& s, const PlaneFit& fit, int comp, int lattice_m) {
  const int n = s.n, d = s.d;
  if (lattice_m < 2) throw Error(ErrorCode::invalid_argument, "lattice needs at least 2 points per edge");
  SphereGraph out;
  // projected simplices: unit directions in plane coordinates and graph values
  std::vector<std::size_t> simp;
  for (std::size_t t = 0; t < s.simplex_count(); ++t)
    if (s.in_component(s.simplex_cell[t], comp)) simp.push_back(t);
  const std::size_t S = simp.size();
  std::vector<double> dir(S * n * n), val(S * n * d), cent(S * n), sphere_pt(S * n * n);
  double reach = 0.0;
  std::vector<double> extent(S, 0.0);
  for (std::size_t a = 0; a < S; ++a) {
    const double* V = s.simplex.data() + simp[a] * n * d;
    double c[kMaxN] = {};
    for (int v = 0; v < n; ++v) {
      double y[kMaxD], z[kMaxN];
      for (int e = 0; e < d; ++e) y[e] = V[v * d + e] - fit.q_S[e];
      for (int i = 0; i < n; ++i) z[i] = dot(fit.frame.data() + i * d, y, d);
      const double nz = norm(z, n);
      if (!(nz >= 1e-12)) throw Error(ErrorCode::projection_singular, "slice point projects onto the plane center");
      for (int i = 0; i < n; ++i) {
        dir[(a * n + v) * n + i] = z[i] / nz;
        sphere_pt[(a * n + v) * n + i] = s.rho * z[i] / nz;
        c[i] += z[i] / nz;
      }
      // phi = y - rho * theta, theta in ambient coordinates
      for (int e = 0; e < d; ++e) {
        double th = 0.0;
        for (int i = 0; i < n; ++i) th += fit.frame[i * d + e] * z[i] / nz;
        val[(a * n + v) * d + e] = V[v * d + e] - (fit.q_S[e] + s.rho * th);
      }
      double pv = 0.0;
      for (int e = 0; e < d; ++e) pv += val[(a * n + v) * d + e] * val[(a * n + v) * d + e];
      out.sup = std::max(out.sup, std::sqrt(pv));
    }
    const double nc = norm(c, n);
    for (int i = 0; i < n; ++i) cent[a * n + i] = c[i] / nc;
    for (int v = 0; v < n; ++v) {
      double e2 = 0.0;
      for (int i = 0; i < n; ++i) {
        const double e = dir[(a * n + v) * n + i] - cent[a * n + i];
        e2 += e * e;
      }
      extent[a] = std::max(extent[a], std::sqrt(e2));
    }
    reach = std::max(reach, extent[a]);
  }
  if (S == 0) return out;
  SpatialIndex index(cent, n);

  // per-simplex tangential gradient of the graph map
  std::vector<double> grads(S * d * n, 0.0), sarea(S, 0.0);
  for (std::size_t a = 0; a < S; ++a) {
    Eigen::MatrixXd E(n, n - 1), Dv(d, n - 1);
    for (int j = 1; j < n; ++j) {
      for (int i = 0; i < n; ++i) E(i, j - 1) = sphere_pt[(a * n + j) * n + i] - sphere_pt[(a * n) * n + i];
      for (int e = 0; e < d; ++e) Dv(e, j - 1) = val[(a * n + j) * d + e] - val[(a * n) * d + e];
    }
    const Eigen::MatrixXd EtE = E.transpose() * E;
    const double det = EtE.determinant();
    double fact = 1.0;
    for (int j = 2; j <= n - 1; ++j) fact *= j;
    sarea[a] = std::sqrt(std::max(0.0, det)) / fact;
    if (!(det > 0)) continue;
    const Eigen::MatrixXd G = Dv * EtE.inverse() * E.transpose();
    for (int e = 0; e < d; ++e)
      for (int i = 0; i < n; ++i) grads[(a * d + e) * n + i] = G(e, i);
  }
  // Hessian from gradient differences between nearby cells, gradients averaged over each cell
  {
    std::vector<std::size_t> slot(s.cells, SIZE_MAX);
    std::vector<double> cgrad, cdir, carea;
    for (std::size_t a = 0; a < S; ++a) {
      const std::size_t c = s.simplex_cell[simp[a]];
      if (slot[c] == SIZE_MAX) {
        slot[c] = carea.size();
        carea.push_back(0.0);
        cgrad.resize(cgrad.size() + d * n, 0.0);
        cdir.resize(cdir.size() + n, 0.0);
      }
      const std::size_t k = slot[c];
      carea[k] += sarea[a];
      for (int t = 0; t < d * n; ++t) cgrad[k * d * n + t] += sarea[a] * grads[a * d * n + t];
      for (int i = 0; i < n; ++i) cdir[k * n + i] += sarea[a] * cent[a * n + i];
    }
    const std::size_t C = carea.size();
    for (std::size_t k = 0; k < C; ++k) {
      if (carea[k] > 0)
        for (int t = 0; t < d * n; ++t) cgrad[k * d * n + t] /= carea[k];
      out.grad_sup = std::max(out.grad_sup, norm(cgrad.data() + k * d * n, d * n));
      const double nc = norm(cdir.data() + k * n, n);
      if (nc > 0)
        for (int i = 0; i < n; ++i) cdir[k * n + i] /= nc;
    }
    std::vector<double> cext(C, 0.0);
    for (std::size_t a = 0; a < S; ++a) {
      const std::size_t k = slot[s.simplex_cell[simp[a]]];
      for (int v = 0; v < n; ++v) {
        double e2 = 0.0;
        for (int i = 0; i < n; ++i) {
          const double e = dir[(a * n + v) * n + i] - cdir[k * n + i];
          e2 += e * e;
        }
        cext[k] = std::max(cext[k], std::sqrt(e2));
      }
    }
    SpatialIndex cindex(cdir, n);
    double acc = 0.0;
    for (std::size_t k = 0; k < C; ++k) {
      double worst = 0.0;
      const double lo2 = 0.0625 * cext[k] * cext[k];
      cindex.ball(cdir.data() + k * n, 1.5 * cext[k], [&](std::size_t b, double dist2) {
        if (b == k || dist2 <= lo2) return;
        double e2 = 0.0;
        for (int t = 0; t < d * n; ++t) {
          const double e = cgrad[k * d * n + t] - cgrad[b * d * n + t];
          e2 += e * e;
        }
        worst = std::max(worst, std::sqrt(e2) / (s.rho * std::sqrt(dist2)));
      });
      acc += carea[k] * std::pow(worst, n - 1);
    }
    out.hess_Ln = std::pow(acc, 1.0 / (n - 1));
  }

  // lattice on the unit sphere of the plane: normalized cube faces with an irrational offset
  const int m = lattice_m;
  std::vector<double> lattice;
  for (int axis = 0; axis < n; ++axis)
    for (int sign = -1; sign <= 1; sign += 2) {
      int total = 1;
      for (int i = 0; i < n - 1; ++i) total *= m;
      for (int idx = 0; idx < total; ++idx) {
        double z[kMaxN];
        int rem = idx, slot = 0;
        for (int i = 0; i < n; ++i) {
          if (i == axis) {
            z[i] = sign;
            continue;
          }
          const int j = rem % m;
          rem /= m;
          const double off = std::fmod(0.6180339887498949 * (slot + 1), 1.0) * 0.5;
          z[i] = -1.0 + 2.0 * (j + 0.25 + off) / m;
          ++slot;
        }
        const double nz = norm(z, n);
        for (int i = 0; i < n; ++i) lattice.push_back(z[i] / nz);
      }
    }
  // inverse vertex matrices for the cone containment test
  std::vector<double> inv(S * n * n, 0.0);
  std::vector<char> usable(S, 0);
  for (std::size_t a = 0; a < S; ++a) {
    Eigen::MatrixXd M(n, n);
    for (int v = 0; v < n; ++v)
      for (int i = 0; i < n; ++i) M(i, v) = dir[(a * n + v) * n + i];
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    if (!lu.isInvertible()) continue;
    const Eigen::MatrixXd Mi = lu.inverse();
    for (int v = 0; v < n; ++v)
      for (int i = 0; i < n; ++i) inv[(a * n + v) * n + i] = Mi(v, i);
    usable[a] = 1;
  }
  out.lattice_points = static_cast<int>(lattice.size() / n);
  out.multiplicity.assign(out.lattice_points, 0);
  for (int L = 0; L < out.lattice_points; ++L) {
    const double* th = lattice.data() + L * n;
    int count = 0;
    index.ball(th, reach + 1e-9, [&](std::size_t a, double dist2) {
      if (!usable[a] || dist2 > (extent[a] + 1e-9) * (extent[a] + 1e-9)) return;
      double lam[kMaxN], sum = 0.0;
      for (int v = 0; v < n; ++v) {
        lam[v] = 0.0;
        for (int i = 0; i < n; ++i) lam[v] += inv[(a * n + v) * n + i] * th[i];
        sum += lam[v];
      }
      if (!(sum > 0)) return;
      for (int v = 0; v < n; ++v)
        if (!(lam[v] > 1e-14 * sum)) return;
      ++count;
    });
    out.multiplicity[L] = count;
    if (count > 0) ++out.covered;
    out.degree = std::max(out.degree, count);
  }
  return out;
}

InequalityReport graph_second_form_bound(const SphereGraphSamples& g, double tol) {
  const int m = g.m, c = g.c, D = m + c;
  if (m < 1 || c < 1 || g.grid.n() != m) throw Error(ErrorCode::invalid_argument, "graph samples: bad dimensions");
  if (g.u.size() != g.grid.node_count() * c) throw Error(ErrorCode::invalid_argument, "graph samples: size mismatch");
  const auto& grid = g.grid;
  const auto& h = grid.spacing();
  const int n = m + 1;
  InequalityReport rep;
  double worst = -1.0, sum_hess = 0.0, sum_A = 0.0, grad_inf = 0.0, literal_fail = 0.0;
  bool ok = true, corrected_ok = true;
  auto U = [&](const MultiIndex& mi, int comp) { return g.u[grid.index(mi) * c + comp]; };
  for (std::size_t idx = 0; idx < grid.node_count(); ++idx) {
    const MultiIndex mi = grid.multi(idx);
    if (grid.near_boundary(mi, 0)) continue;
    double x[kMaxN];
    grid.param(mi, x);
    if (norm(x, m) >= g.s) continue;
    Eigen::MatrixXd du(c, m);
    std::vector<Eigen::MatrixXd> ddu(c, Eigen::MatrixXd(m, m));
    for (int a = 0; a < m; ++a) {
      MultiIndex p = mi, q = mi;
      p[a] += 1;
      q[a] -= 1;
      for (int k = 0; k < c; ++k) {
        du(k, a) = (U(p, k) - U(q, k)) / (2 * h[a]);
        ddu[k](a, a) = (U(p, k) - 2 * U(mi, k) + U(q, k)) / (h[a] * h[a]);
      }
      for (int b = a + 1; b < m; ++b) {
        MultiIndex pp = mi, pm = mi, mp = mi, mm = mi;
        pp[a] += 1, pp[b] += 1;
        pm[a] += 1, pm[b] -= 1;
        mp[a] -= 1, mp[b] += 1;
        mm[a] -= 1, mm[b] -= 1;
        for (int k = 0; k < c; ++k)
          ddu[k](a, b) = ddu[k](b, a) = (U(pp, k) - U(pm, k) - U(mp, k) + U(mm, k)) / (4 * h[a] * h[b]);
      }
    }
    // f = (x, u), df and d2f in R^{m+c}
    Eigen::VectorXd f(D);
    for (int a = 0; a < m; ++a) f(a) = x[a];
    for (int k = 0; k < c; ++k) f(m + k) = U(mi, k);
    Eigen::MatrixXd df = Eigen::MatrixXd::Zero(D, m);
    for (int a = 0; a < m; ++a) {
      df(a, a) = 1.0;
      for (int k = 0; k < c; ++k) df(m + k, a) = du(k, a);
    }
    const Eigen::MatrixXd gm = df.transpose() * df;
    const Eigen::MatrixXd gi = gm.inverse();
    const double rho2 = g.rho * g.rho;
    std::vector<Eigen::VectorXd> A(m * m);
    double hess2 = 0.0;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        Eigen::VectorXd d2 = Eigen::VectorXd::Zero(D);
        for (int k = 0; k < c; ++k) {
          d2(m + k) = ddu[k](i, j);
          hess2 += ddu[k](i, j) * ddu[k](i, j);
        }
        const Eigen::VectorXd tang = df * (gi * (df.transpose() * d2));
        A[i * m + j] = d2 - tang - (d2.dot(f) / rho2) * f;
      }
    double A2 = 0.0;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k)
          for (int l = 0; l < m; ++l) A2 += gi(i, k) * gi(j, l) * A[i * m + j].dot(A[k * m + l]);
    const double An = std::sqrt(std::max(0.0, A2));
    const double grad2 = du.squaredNorm();
    const double lhs = std::sqrt(hess2);
    const double rhs = std::pow(1.0 + grad2, 1.5) * An + grad2 / g.rho;
    // with the full metric term of d2f . f = -g
    const double rhs_corr = std::pow(1.0 + grad2, 1.5) * An + std::sqrt(1.0 + grad2) * std::sqrt(gm.squaredNorm()) / g.rho;
    const double ratio = rhs > 0 ? lhs / rhs : (lhs > 0 ? INFINITY : 0.0);
    if (!(lhs <= rhs * (1.0 + tol) + 1e-12)) {
      ok = false;
      literal_fail += 1.0;
    }
    if (!(lhs <= rhs_corr * (1.0 + tol) + 1e-12)) corrected_ok = false;
    if (ratio > worst) {
      worst = ratio;
      rep.lhs = lhs;
      rep.rhs = rhs;
    }
    const double cellv = grid.cell_volume();
    sum_hess += cellv * std::pow(lhs, n);
    sum_A += cellv * std::sqrt(gm.determinant()) * std::pow(An, n);
    grad_inf = std::max(grad_inf, std::sqrt(grad2));
  }
  rep.ratio = std::max(worst, 0.0);
  rep.margin_ok = ok;
  const double hess_Ln = std::pow(sum_hess, 1.0 / n);
  const double A_Ln = std::pow(sum_A, 1.0 / n);
  const double denom = (1.0 + std::pow(grad_inf, 3)) * A_Ln + std::pow(g.s, (n - 1.0) / n) * grad_inf * grad_inf / g.rho;
  rep.parameters = {{"worst_ratio", rep.ratio},
                    {"failing_nodes", literal_fail},
                    {"corrected_bound_ok", corrected_ok ? 1.0 : 0.0},
                    {"hessian_Ln", hess_Ln},
                    {"A_Ln", A_Ln},
                    {"grad_sup", grad_inf},
                    {"Ln_constant", denom > 0 ? hess_Ln / denom : (hess_Ln > 0 ? INFINITY : 0.0)}};
  return rep;
}

}  // namespace immersia
