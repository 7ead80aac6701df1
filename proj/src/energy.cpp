#include "immersia/energy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "immersia/error.hpp"

namespace immersia {

namespace {

void require_energy_dimension(const SampledImmersion& imm) {
  if (imm.n % 2 != 0 || imm.n < 4)
    throw Error(ErrorCode::unsupported_dimension, "energy needs even n >= 4");
  if (imm.n > kMaxN) throw Error(ErrorCode::unsupported_dimension, "energy needs derivatives beyond order 3");
}

}  // namespace

std::array<double, 2> energy_density_terms(const PointGeometry& G) {
  // n = 4: |II|^4 and |nabla II|^2
  const double ii2 = std::max(0.0, G.II_norm2);
  return {ii2 * ii2, std::max(0.0, G.covII_norm2)};
}

EnergyReport energy(const SampledImmersion& imm, const NodeMask& mask, DerivativeMode mode, Execution exec) {
  require_energy_dimension(imm);
  EnergyReport rep;
  rep.resolution = imm.charts.empty() ? 0 : imm.charts.front().grid.dims().front();
  double t0 = 0.0, t1 = 0.0, count = 0.0;
  for (int c = 0; c < static_cast<int>(imm.charts.size()); ++c) {
    const auto& grid = imm.charts[c].grid;
    const NodeAccum acc = reduce_geometry(imm, c, true, mode, exec, [&](std::size_t i, const PointGeometry& G) {
      if (mask && !mask(c, i, G.pos)) return NodeAccum{};
      const double w = grid.cell_weight(grid.multi(i)) * G.sqrt_det;
      const auto t = energy_density_terms(G);
      return NodeAccum{t[0] * w, t[1] * w, 1.0, 0.0};
    });
    t0 += acc[0];
    t1 += acc[1];
    count += acc[2];
  }
  rep.per_term = {{0, t0}, {1, t1}};
  rep.total = t0 + t1;
  rep.region_nodes = static_cast<std::size_t>(count);
  return rep;
}

EnergyReport energy_in_extrinsic_ball(const SampledImmersion& imm, const Vec& center, double r, DerivativeMode mode,
                                      Execution exec) {
  if (!(r > 0)) throw Error(ErrorCode::invalid_argument, "radius must be > 0");
  if (center.size() != imm.d) throw Error(ErrorCode::invalid_argument, "center dimension mismatch");
  const int d = imm.d;
  return energy(
      imm,
      [&](int, std::size_t, const double* pos) {
        double s = 0.0;
        for (int k = 0; k < d; ++k) s += (pos[k] - center[k]) * (pos[k] - center[k]);
        return s < r * r;
      },
      mode, exec);
}

double EnergyAtoms::total() const {
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i) s += term0[i] + term1[i];
  return s;
}

EnergyAtoms energy_atoms(const SampledImmersion& imm, DerivativeMode mode, Execution exec) {
  require_energy_dimension(imm);
  EnergyAtoms A;
  A.n = imm.n;
  A.d = imm.d;
  const std::size_t total = imm.node_count();
  A.pos.resize(total * imm.d);
  A.term0.resize(total);
  A.term1.resize(total);
  A.chart.resize(total);
  A.node.resize(total);
  A.spacing = INFINITY;
  std::size_t offset = 0;
  for (int c = 0; c < static_cast<int>(imm.charts.size()); ++c) {
    const auto& grid = imm.charts[c].grid;
    A.chart_offset.push_back(offset);
    visit_geometry(imm, c, true, mode, exec, [&](std::size_t i, const PointGeometry& G) {
      const std::size_t a = offset + i;
      for (int k = 0; k < imm.d; ++k) A.pos[a * imm.d + k] = G.pos[k];
      const double w = grid.cell_weight(grid.multi(i)) * G.sqrt_det;
      const auto t = energy_density_terms(G);
      A.term0[a] = t[0] * w;
      A.term1[a] = t[1] * w;
      A.chart[a] = c;
      A.node[a] = i;
    });
    // image distance between the central node and its axis neighbours
    MultiIndex mid{};
    for (int a = 0; a < imm.n; ++a) mid[a] = grid.dims()[a] / 2;
    const Vec p = imm.phi(c, mid);
    for (int a = 0; a < imm.n; ++a) {
      MultiIndex nb = mid;
      nb[a] += 1;
      A.spacing = std::min(A.spacing, (imm.phi(c, nb) - p).norm());
    }
    offset += grid.node_count();
  }
  A.index = SpatialIndex(A.pos, imm.d);
  return A;
}

double ball_energy(const EnergyAtoms& atoms, const double* center, double r) {
  // sum in atom order for reproducibility
  std::vector<std::size_t> idx = atoms.index.ball_indices(center, r);
  double s = 0.0;
  for (std::size_t i : idx) s += atoms.term0[i] + atoms.term1[i];
  return s;
}

double radius_threshold(const EnergyAtoms& atoms, const double* x, double eps0, double r_max) {
  if (!(eps0 > 0)) throw Error(ErrorCode::invalid_argument, "eps0 must be > 0");
  const double target = 0.5 * eps0;
  struct Hit {
    double dist;
    std::size_t idx;
  };
  std::vector<Hit> hits;
  double r = std::min(std::max(0.5 * atoms.spacing, 1e-9), r_max);
  for (;;) {
    hits.clear();
    double sum = 0.0;
    atoms.index.ball(x, r, [&](std::size_t i, double d2) {
      hits.push_back({std::sqrt(d2), i});
      sum += atoms.term0[i] + atoms.term1[i];
    });
    if (sum >= target || r >= r_max) break;
    r = std::min(std::numbers::sqrt2 * r, r_max);
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    return a.dist < b.dist || (a.dist == b.dist && a.idx < b.idx);
  });
  double cum = 0.0;
  for (const auto& h : hits) {
    cum += atoms.term0[h.idx] + atoms.term1[h.idx];
    if (cum >= target) return std::min(h.dist, r_max);
  }
  return r_max;
}

}  // namespace immersia
