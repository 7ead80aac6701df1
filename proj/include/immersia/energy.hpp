#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "immersia/geometry.hpp"
#include "immersia/spatial_index.hpp"

namespace immersia {

inline constexpr double kDefaultEps0 = 0.05;

struct EnergyReport {
  double total = 0.0;
  std::vector<std::pair<int, double>> per_term;  // (i, integral of |nabla^i II|^{n/(1+i)})
  std::size_t region_nodes = 0;                  // nodes inside the region
  int resolution = 0;
};

// Keeps a node when it returns true; empty means the whole immersion.
using NodeMask = std::function<bool(int chart, std::size_t node, const double* pos)>;

// Energy terms at one point, without the volume weight.
std::array<double, 2> energy_density_terms(const PointGeometry& G);

EnergyReport energy(const SampledImmersion& imm, const NodeMask& mask = {},
                    DerivativeMode mode = DerivativeMode::automatic, Execution exec = Execution::parallel);
EnergyReport energy_in_extrinsic_ball(const SampledImmersion& imm, const Vec& center, double r,
                                      DerivativeMode mode = DerivativeMode::automatic,
                                      Execution exec = Execution::parallel);

// Weighted energy contributions per node, indexed in space.
struct EnergyAtoms {
  int n = 0, d = 0;
  std::vector<double> pos;          // d per atom
  std::vector<double> term0, term1;  // weighted contributions
  std::vector<int> chart;
  std::vector<std::size_t> node;
  std::vector<std::size_t> chart_offset;  // first atom of each chart
  double spacing = 0.0;                   // smallest parameter step, mapped to image scale
  SpatialIndex index;

  std::size_t size() const { return chart.size(); }
  double total() const;
  const double* position(std::size_t i) const { return pos.data() + i * d; }
};

EnergyAtoms energy_atoms(const SampledImmersion& imm, DerivativeMode mode = DerivativeMode::automatic,
                         Execution exec = Execution::parallel);
double ball_energy(const EnergyAtoms& atoms, const double* center, double r);

// Smallest r with energy of the open ball B(x, r) >= eps0/2; r_max when never reached.
double radius_threshold(const EnergyAtoms& atoms, const double* x, double eps0, double r_max = 1.0);

}  // namespace immersia
