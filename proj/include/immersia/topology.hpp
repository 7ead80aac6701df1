#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "immersia/geometry.hpp"

namespace immersia {

// psi_Q = Q + R^2 (phi - Q) / |phi - Q|^2 on every node; analytic maps stay analytic.
SampledImmersion sphere_inversion(const SampledImmersion& imm, const Vec& Q, double R_inv);

// h = e . psi_Q per node.
struct HeightField {
  std::vector<double> e;
  std::vector<double> Q;
  double R_inv = 1.0;
  std::vector<std::vector<double>> h;  // per chart, per node
};

HeightField height_field(const SampledImmersion& imm, const Vec& e, const Vec& Q, double R_inv);

struct CriticalPoint {
  int chart = 0;
  std::size_t node = 0;  // lowest corner of the detecting cell
  std::string label;
  std::vector<double> pos;  // in the inverted image
  double h = 0.0;
  int index = 0;  // negative eigenvalues of the Hessian of h
};

inline constexpr double kNearCriticalRel = 1e-3;
inline constexpr double kNearCriticalFraction = 0.1;

struct CriticalPointReport {
  std::vector<double> e;
  int count = 0;
  std::vector<CriticalPoint> points;
  std::size_t candidate_cells = 0;
  double near_critical_fraction = 0.0;
  bool warning = false;  // non-Morse direction: too many near-critical nodes
  int attempts = 1;
};

// Cells where every coordinate derivative of h changes sign, merged within 2 cells.
CriticalPointReport critical_point_count(const SampledImmersion& imm, const Vec& e, const Vec& Q, double R_inv,
                                         DerivativeMode mode = DerivativeMode::automatic,
                                         Execution exec = Execution::parallel);

// Unit vector from normal samples of mt19937_64(seed); attempt k skips the first k draws of d samples.
Vec seeded_direction(int d, std::uint64_t seed, int attempt = 0);

// Seeded direction, redrawn while the non-Morse warning is raised.
CriticalPointReport critical_point_count_seeded(const SampledImmersion& imm, std::uint64_t seed, const Vec& Q,
                                                double R_inv, int max_attempts = 5,
                                                DerivativeMode mode = DerivativeMode::automatic,
                                                Execution exec = Execution::parallel);

// int |det(g^{-1} II)| dvol_g; hypersurfaces only.
double total_curvature_integral(const SampledImmersion& imm, DerivativeMode mode = DerivativeMode::automatic,
                                Execution exec = Execution::parallel);

}  // namespace immersia
