#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "immersia/measure.hpp"

namespace immersia {

struct CorpusShape {
  std::string name;
  ShapeSpec spec;
  int resolution = 17;
  int multiplicity = 1;  // image density away from self-intersections
  bool open = false;     // has a chart boundary
};

// Analytic test shapes for the inequality suites, n = 4.
std::vector<CorpusShape> analytic_corpus();
const CorpusShape& corpus_shape(const std::string& name);

// Distance to the nearest boundary atom; infinite on closed shapes.
class BoundaryDistance {
 public:
  explicit BoundaryDistance(const PushforwardMeasure& mu);
  double operator()(const double* x) const;

 private:
  SpatialIndex index_;
  bool empty_ = true;
};

struct HardySuiteParams {
  std::vector<double> a;  // empty means {0, n - 2}
  int bumps = 20;
  double radius_lo = 0.3, radius_hi = 0.7;
  std::uint64_t seed = 0;
  double tol = kInequalityTol;
};

struct MonotonicitySuiteParams {
  int samples = 50;
  double rho_lo = 0.45, rho_hi = 0.8;
  double sigma_lo = 0.55, sigma_hi = 0.95;  // as fractions of rho
  std::uint64_t seed = 0;
  double tol = kInequalityTol;
};

struct GrowthSuiteParams {
  int points = 20;
  std::vector<double> radii{0.1, 0.2, 0.4};
  std::uint64_t seed = 0;
};

struct SobolevSuiteParams {
  int bumps = 10;
  double p = 2.0, q = 2.0;
  double radius_lo = 0.2, radius_hi = 0.6;
  std::uint64_t seed = 0;
};

// Bumps and origins drawn from atoms; supports keep clear of the boundary.
std::vector<InequalityReport> hardy_suite(const PushforwardMeasure& mu, const HardySuiteParams& p);
// Balls B(x, rho) around atoms, clear of the boundary.
std::vector<InequalityReport> monotonicity_suite(const PushforwardMeasure& mu, const MonotonicitySuiteParams& p);

struct GrowthSuiteResult {
  std::vector<InequalityReport> reports;
  double c_lo = 0.0, c_hi = 0.0;  // extreme mu(B(x,r)) / r^n
  double spread = 0.0;            // c_hi / c_lo
};
GrowthSuiteResult growth_suite(const PushforwardMeasure& mu, const EnergyAtoms& energy, const GrowthSuiteParams& p);

std::vector<InequalityReport> sobolev_suite(const PushforwardMeasure& mu, const SobolevSuiteParams& p);

// Atom indices at least `clearance` away from the boundary, drawn with mt19937_64(seed).
std::vector<std::size_t> sample_atoms(const PushforwardMeasure& mu, int count, double clearance, std::uint64_t seed);

}  // namespace immersia
