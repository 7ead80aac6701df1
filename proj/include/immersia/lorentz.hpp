#pragma once

#include <limits>
#include <vector>

namespace immersia {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// (|f| sample, measure of its cell) pairs.
struct WeightedSampleSet {
  std::vector<double> values;
  std::vector<double> weights;

  void add(double value, double weight) {
    values.push_back(value);
    weights.push_back(weight);
  }
  std::size_t size() const { return values.size(); }
  double total_weight() const;
  void validate() const;
};

// Measure of {|f| > lambda}.
double distribution_function(const WeightedSampleSet& s, double lambda);

// Exact L^(p,q) norm of a step function; q may be kInfinity.
double lorentz_norm(const WeightedSampleSet& s, double p, double q);
double weak_norm(const WeightedSampleSet& s, double p);
// Plain L^p norm by direct summation.
double lebesgue_norm(const WeightedSampleSet& s, double p);

// ||f||_(p,r) / ||f||_(p,q) for q < r; 0 for the zero function.
double lorentz_embedding_ratio(const WeightedSampleSet& s, double p, double q, double r);

// Sum of lorentz_norm over the pointwise norms |nabla^j f|, j = 0..k.
double sobolev_lorentz_norm(const std::vector<WeightedSampleSet>& derivative_norms, double p, double q);

}  // namespace immersia
