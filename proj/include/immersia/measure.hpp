#pragma once

#include <string>
#include <utility>
#include <vector>

#include "immersia/energy.hpp"
#include "immersia/lorentz.hpp"
#include "immersia/spatial_index.hpp"

namespace immersia {

// Volume of the unit n-ball.
double unit_ball_volume(int n);

// One atom per node at its image, weighted by the local volume element.
struct PushforwardMeasure {
  int n = 0, d = 0;
  std::vector<double> pos;      // d per atom
  std::vector<double> weight;
  std::vector<double> cell;     // image edge length of the atom's cell
  double cell_max = 0.0;
  std::vector<double> tangent;  // orthonormal tangent basis, n*d per atom
  std::vector<double> H;        // mean curvature vector (1/n trace), d per atom
  std::vector<double> II_norm;
  std::vector<char> boundary;   // atom sits on a chart boundary that is not glued away
  std::vector<int> chart;
  std::vector<std::size_t> node;
  double spacing = 0.0;  // image distance between neighbouring nodes
  SpatialIndex index;

  std::size_t size() const { return weight.size(); }
  double total() const;
  const double* position(std::size_t i) const { return pos.data() + i * d; }
  // |v^perp| at atom i
  double normal_norm(std::size_t i, const double* v) const;
  // tangential projection of v at atom i
  void tangent_part(std::size_t i, const double* v, double* out) const;
};

// Closed shapes have no boundary atoms; planes and other open charts do.
PushforwardMeasure pushforward(const SampledImmersion& imm, DerivativeMode mode = DerivativeMode::automatic,
                               Execution exec = Execution::parallel);

// Share of atom i counted in B(center, r): a ramp about one cell length wide across the sphere.
double ball_fraction(const PushforwardMeasure& mu, std::size_t i, double dist, double r);
// Atoms with a positive share of B(center, r), ascending
std::vector<std::size_t> ball_support(const PushforwardMeasure& mu, const double* center, double r);

double extrinsic_ball_volume(const PushforwardMeasure& mu, const double* center, double r);
// true when a boundary atom lies in B(center, r)
bool ball_meets_boundary(const PushforwardMeasure& mu, const double* center, double r);

struct DensityResult {
  double raw = 0.0;  // extrapolated ratio
  int rounded = 0;
  bool conclusive = true;
  std::vector<double> ratios;  // mu(B(p,r)) / (omega_n r^n) per radius
};
// radii decreasing; the last two feed a quadratic extrapolation to r = 0
DensityResult density_at(const PushforwardMeasure& mu, const double* p, const std::vector<double>& radii);

struct InequalityReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  bool margin_ok = false;
  bool degenerate = false;
  std::vector<std::pair<std::string, double>> parameters;

  void finish(double tol);
  double param(const std::string& key) const;
};

inline constexpr double kInequalityTol = 0.02;

InequalityReport monotonicity_check(const PushforwardMeasure& mu, const double* p, double sigma, double rho,
                                    double tol = kInequalityTol);

// Smooth bump exp(1 - 1/(1 - t^2)), t = |x - center| / radius.
struct Bump {
  std::vector<double> center;
  double radius = 1.0;
  double value(const double* x, int d) const;
  // ambient gradient
  void gradient(const double* x, int d, double* out) const;
};

// Weighted Hardy inequality about `origin`, mean curvature taken as the trace of II.
InequalityReport hardy_check(const PushforwardMeasure& mu, double a, const Bump& phi, const double* origin,
                             double tol = kInequalityTol);

// Observed constants of int |II|^2/|x|^{n-2} <= C1 E and int |x^perp|^2/|x|^{n+2} <= C2 sqrt(E).
InequalityReport hardy_iterated_check(const PushforwardMeasure& mu, double total_energy);

// Lower ratio mu(B)/r^n and the observed constant of the upper bound r^n (2 mu(B(x,2)) + C E(B(x,2))).
std::vector<InequalityReport> volume_growth_check(const PushforwardMeasure& mu, const EnergyAtoms& energy,
                                                  const std::vector<std::vector<double>>& centers,
                                                  const std::vector<double>& radii);

// ||phi||_(np/(n-p), q) / ||d phi||_(p,q) per bump; weak norm of H reported as "H_weak_n".
std::vector<InequalityReport> sobolev_ratio_probe(const PushforwardMeasure& mu, const std::vector<Bump>& bumps,
                                                  double p, double q);

struct GoodBadDecomposition {
  double r = 0.0;
  double eps0 = 0.0;
  std::vector<double> threshold;  // per atom of the energy atoms
  std::vector<char> bad;          // 1 for bad atoms
  std::vector<std::pair<std::vector<double>, double>> cover;  // (center, radius)
  std::size_t bad_count() const;
  std::size_t cover_size() const { return cover.size(); }
};

std::vector<double> all_thresholds(const EnergyAtoms& atoms, double eps0, Execution exec = Execution::parallel);
GoodBadDecomposition good_bad_decomposition(const EnergyAtoms& atoms, const std::vector<double>& thresholds,
                                            double eps0, double r);

}  // namespace immersia
