#include "immersia/lorentz.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "immersia/error.hpp"

namespace immersia {

namespace {

void check_exponents(double p, double q) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw Error(ErrorCode::invalid_exponent, "p must lie in [1, inf)");
  if (!(q >= 1.0)) throw Error(ErrorCode::invalid_exponent, "q must lie in [1, inf]");
}

// Distinct values ascending with the weight of samples at or above each value.
struct Steps {
  std::vector<double> value;
  std::vector<double> tail;
};

Steps steps_of(const WeightedSampleSet& s) {
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(s.values[a]) < std::abs(s.values[b]); });
  Steps st;
  for (std::size_t idx : order) {
    const double v = std::abs(s.values[idx]);
    if (v == 0.0) continue;
    if (!st.value.empty() && st.value.back() == v) {
      st.tail.back() += s.weights[idx];
    } else {
      st.value.push_back(v);
      st.tail.push_back(s.weights[idx]);
    }
  }
  for (std::size_t i = st.tail.size(); i-- > 1;) st.tail[i - 1] += st.tail[i];
  return st;
}

}  // namespace

double WeightedSampleSet::total_weight() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

void WeightedSampleSet::validate() const {
  if (values.size() != weights.size()) throw Error(ErrorCode::invalid_argument, "values and weights differ in length");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]) || values[i] < 0) throw Error(ErrorCode::invalid_argument, "values must be finite and >= 0");
    if (!(weights[i] > 0) || !std::isfinite(weights[i])) throw Error(ErrorCode::invalid_argument, "weights must be finite and > 0");
  }
}

double distribution_function(const WeightedSampleSet& s, double lambda) {
  if (!(lambda >= 0)) throw Error(ErrorCode::invalid_argument, "lambda must be >= 0");
  double m = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (std::abs(s.values[i]) > lambda) m += s.weights[i];
  return m;
}

double lorentz_norm(const WeightedSampleSet& s, double p, double q) {
  check_exponents(p, q);
  const Steps st = steps_of(s);
  if (st.value.empty()) return 0.0;
  if (std::isinf(q)) {
    double best = 0.0;
    for (std::size_t k = 0; k < st.value.size(); ++k) best = std::max(best, st.value[k] * std::pow(st.tail[k], 1.0 / p));
    return best;
  }
  // normalize by the largest value so the powers stay in range
  const double vmax = st.value.back();
  double sum = 0.0;
  double prev = 0.0;
  for (std::size_t k = 0; k < st.value.size(); ++k) {
    const double cur = std::pow(st.value[k] / vmax, q);
    sum += std::pow(st.tail[k], q / p) * (cur - prev);
    prev = cur;
  }
  return vmax * std::pow(p * sum / q, 1.0 / q);
}

double weak_norm(const WeightedSampleSet& s, double p) { return lorentz_norm(s, p, kInfinity); }

double lebesgue_norm(const WeightedSampleSet& s, double p) {
  check_exponents(p, p);
  double vmax = 0.0;
  for (double v : s.values) vmax = std::max(vmax, std::abs(v));
  if (vmax == 0.0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) sum += s.weights[i] * std::pow(std::abs(s.values[i]) / vmax, p);
  return vmax * std::pow(sum, 1.0 / p);
}

double lorentz_embedding_ratio(const WeightedSampleSet& s, double p, double q, double r) {
  if (!(q < r)) throw Error(ErrorCode::invalid_exponent, "embedding ratio needs q < r");
  const double lo = lorentz_norm(s, p, q);
  return lo > 0 ? lorentz_norm(s, p, r) / lo : 0.0;
}

double sobolev_lorentz_norm(const std::vector<WeightedSampleSet>& derivative_norms, double p, double q) {
  double total = 0.0;
  for (const auto& s : derivative_norms) total += lorentz_norm(s, p, q);
  return total;
}

}  // namespace immersia
