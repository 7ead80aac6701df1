#pragma once

#include <functional>
#include <string>
#include <vector>

#include "immersia/geometry.hpp"

namespace immersia {

enum class BoundaryKind { plane_fit, identity, custom };

// Dirichlet data for the coordinate functions. custom: fn(param, image, out) writes n values.
struct BoundaryMap {
  BoundaryKind kind = BoundaryKind::plane_fit;
  std::function<void(const double* param, const double* image, double* out)> fn;
};

struct HarmonicOptions {
  double tol = 1e-10;  // relative residual of the linear solve
  int max_iter = 20000;
  bool direct_fallback = true;
  DerivativeMode mode = DerivativeMode::automatic;
  Execution exec = Execution::parallel;
};

// sup|g - delta|, ||dg||_(n,1), ||d^2 g||_(n/2,1) in the given coordinates
struct MetricEstimates {
  double sup_deviation = 0.0;
  double d1_lorentz = 0.0;
  double d2_lorentz = 0.0;
};

struct HarmonicChart {
  int n = 0, d = 0;
  int chart = 0;
  ChartGrid grid;
  BoundaryKind boundary = BoundaryKind::identity;
  bool solved = false;               // false for the parameter coordinates themselves
  std::vector<double> phi;           // image, d per node
  std::vector<double> metric;        // g in parameter coordinates, n*n per node
  std::vector<double> sqrt_det;      // of g
  std::vector<double> coords;        // u^1..u^n, n per node
  std::vector<double> jacobian;      // du^i/dx^a at [i*n + a], n*n per node
  std::vector<double> pulled_metric; // g in u coordinates, n*n per node
  std::vector<double> residuals;     // relative residual per coordinate function
  std::vector<int> iterations;
  bool used_direct = false;
  double min_jacobian_det = 0.0;
  MetricEstimates estimates;        // in u coordinates
  MetricEstimates input_estimates;  // in parameter coordinates

  std::size_t nodes() const { return grid.node_count(); }
  const double* u(std::size_t node) const { return coords.data() + node * n; }
};

// Solves d_a(sqrt(g) g^{ab} d_b u^i) = 0 with the boundary map; throws solver-failure or fold-detected.
HarmonicChart solve_harmonic_coordinates(const SampledImmersion& imm, int chart, const BoundaryMap& boundary = {},
                                         const HarmonicOptions& opt = {});

// The parameter coordinates wrapped as a chart, for comparison and negative controls.
HarmonicChart parameter_chart(const SampledImmersion& imm, int chart,
                              DerivativeMode mode = DerivativeMode::automatic,
                              Execution exec = Execution::parallel);

// Residual of -1/2 g^{ij} d_ij g_ab = Ric_ab + Q_ab(g, dg) away from the boundary layers.
struct PdeResidualReport {
  double residual_sup = 0.0;
  double residual_rms = 0.0;  // volume weighted
  double lhs_sup = 0.0;
  double ricci_sup = 0.0;
  double Q_sup = 0.0;
  double C_n = 0.0;           // max |Q| / sum |dg|^2
  double relative = 0.0;      // residual_sup / (lhs_sup + ricci_sup)
  bool flagged = false;       // relative above kPdeFlag: coordinates are not harmonic
  std::size_t nodes = 0;
};

inline constexpr double kPdeFlag = 0.1;
// nodes within this many layers of the boundary are left out of the residual
inline constexpr int kResidualLayers = 2;

PdeResidualReport harmonic_metric_pde_residual(const HarmonicChart& hc);

struct TransitionReport {
  double sup = 0.0;                 // sup |phi_ab|
  double lipschitz = 0.0;           // sup of the operator norm of d phi_ab
  double isometry_deviation = 0.0;  // sup |d_i phi . d_j phi - delta_ij|
  double hess_lorentz = 0.0;        // ||d^2 phi||_(n,1)
  double third_lorentz = 0.0;       // ||d^3 phi||_(n/2,1)
  double hess_sup = 0.0;
  std::size_t overlap_nodes = 0;
  int overlap_cells = 0;            // thinnest overlap extent in cells
  double interp_tol = 0.0;
};

// Transition u_B as a function of u_A over the nodes of A whose image lies in B.
TransitionReport transition_map(const HarmonicChart& A, const HarmonicChart& B);

struct CompositionReport {
  double max_error = 0.0;  // |phi_AC - phi_BC o phi_AB| over the triple overlap
  double tolerance = 0.0;  // interpolation tolerance of the three charts
  std::size_t nodes = 0;
  bool ok = false;
};

CompositionReport transition_composition(const HarmonicChart& A, const HarmonicChart& B, const HarmonicChart& C);

}  // namespace immersia
