#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "immersia/geometry.hpp"
#include "immersia/measure.hpp"

namespace immersia {

inline constexpr double kTransTol = 0.05;
inline constexpr double kInterpTol = 1e-2;

enum class TangencyPolicy { skip, error };

// Level set |phi - q| = rho, one cell per crossed Kuhn simplex of a chart lattice.
// Per-cell blocks are stored flat with the strides below.
struct Slice {
  int n = 0, d = 0, k = 0;
  std::vector<double> q;
  double rho = 0.0;

  std::size_t cells = 0;
  std::vector<int> chart;
  std::vector<double> u;        // parameter point, n per cell
  std::vector<double> pos;      // image point, d per cell
  std::vector<double> area;     // image volume of the piecewise linear facet
  std::vector<double> grad;     // |d|phi - q||_g
  std::vector<double> frame;    // normal frame of the immersion, k*d per cell
  std::vector<double> tangent;  // orthonormal slice tangents, (n-1)*d per cell
  std::vector<double> II_slice; // II^a on slice tangents, k*(n-1)^2 per cell
  std::vector<double> H_comp;   // n_a . H, k per cell
  std::vector<double> II_norm;  // |II|_g of the immersion
  std::vector<int> component;

  // spherical second form, filled by slice_second_form
  bool has_second_form = false;
  std::vector<double> A_trace_free;  // k*(n-1)^2 per cell
  std::vector<double> A_mean;        // h^a, k per cell
  std::vector<double> A_norm;
  std::vector<double> A_bound;       // algebraic majorant of |A|

  // (n-1)-simplices of the facets, n vertices of d coordinates each
  std::vector<double> simplex;
  std::vector<std::size_t> simplex_cell;

  int component_count = 0;
  std::vector<std::string> skipped;  // labels of cells rejected by the transversality filter

  bool empty() const { return cells == 0; }
  std::size_t simplex_count() const { return simplex_cell.size(); }
  const double* cell_frame(std::size_t c) const { return frame.data() + c * k * d; }
  const double* cell_pos(std::size_t c) const { return pos.data() + c * d; }
  double total_area(int comp = -1) const;
  bool in_component(std::size_t c, int comp) const { return comp < 0 || component[c] == comp; }
};

Slice level_set_slice(const SampledImmersion& imm, const Vec& q, double rho,
                      TangencyPolicy policy = TangencyPolicy::skip, double trans_tol = kTransTol,
                      DerivativeMode mode = DerivativeMode::automatic, Execution exec = Execution::parallel);

// Fills the A fields; throws singular-configuration when a denominator drops below 1e-12 rho^2.
void slice_second_form(Slice& s);

// Co-area integrand integrated over the slice.
double slice_quality(const Slice& s, double ball_energy, double r, int comp = -1);

// ||A||_{L^n} and ||II||_{L^n} over the slice.
double slice_A_norm(const Slice& s, int comp = -1);
double slice_II_norm(const Slice& s, int comp = -1);

struct SliceSearchResult {
  std::vector<double> q;
  double rho = 0.0;
  Slice slice;
  double quality = 0.0;
  double mean_quality = 0.0;  // over admissible candidates
  int candidates = 0;
  int admissible = 0;
  double ball_energy = 0.0;  // E(B(p, 2r))
  double eps = 0.0;          // ball_energy^{1/n}
  // observed constants
  double c_A = 0.0;    // r^{1/n} ||A||_{L^n}
  double c_II = 0.0;   // r^{1/n} ||II||_{L^n} / eps
  double c_vol = 0.0;  // vol / r^{n-1}
  double c_mean = 0.0; // mean quality * r
};

// Lattice search over q in B(p, r/100) and rho in [0.6 r, 0.9 r]; both lattices nest under N -> 2N - 1.
SliceSearchResult good_slice_search(const SampledImmersion& imm, const Vec& p, double r, int q_count, int rho_count,
                                    double ball_energy = -1.0, DerivativeMode mode = DerivativeMode::automatic,
                                    Execution exec = Execution::parallel);

// max over cell pairs of the aligned frame distance
double gauss_oscillation(const Slice& s, int comp = -1);

struct PlaneFit {
  std::vector<double> q_S;
  std::vector<double> normals;  // k*d, orthonormal, spanning the complement of the plane
  std::vector<double> frame;    // n*d orthonormal basis of the plane
  double residual = 0.0;
  double offset = 0.0;          // |q - q_S|
  std::vector<double> mean_norms;  // |average n_a| before orthonormalization
};

PlaneFit plane_fit(const Slice& s, int comp = -1);

struct SphereGraph {
  int lattice_points = 0;
  int covered = 0;
  int degree = 0;
  std::vector<int> multiplicity;  // per lattice point
  double sup = 0.0;
  double grad_sup = 0.0;
  double hess_Ln = 0.0;
};

// Projects the slice onto the reference sphere of the plane fit; lattice_m points per face edge.
SphereGraph graph_extract(const Slice& s, const PlaneFit& fit, int comp = -1, int lattice_m = 8);

// Samples of u on a lattice over [-s, s]^m, with f(x) = (x, u(x)) on the sphere of radius rho in R^{m+c}.
struct SphereGraphSamples {
  int m = 0;  // domain dimension
  int c = 0;  // codomain dimension
  double s = 1.0;
  double rho = 1.0;
  ChartGrid grid;
  std::vector<double> u;  // c per node
};

InequalityReport graph_second_form_bound(const SphereGraphSamples& g, double tol = kInequalityTol);

}  // namespace immersia
