#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "immersia/error.hpp"
#include "immersia/lorentz.hpp"

using namespace immersia;

namespace {

// mu(lambda) by direct count
double measure_above(const WeightedSampleSet& s, double lambda) {
  double m = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.values[i] > lambda) m += s.weights[i];
  return m;
}

// (p int_0^inf lambda^{q-1} mu(lambda)^{q/p} dlambda)^{1/q}, adaptive quadrature between breakpoints
double quadrature_norm(const WeightedSampleSet& s, double p, double q) {
  std::vector<double> cuts = s.values;
  cuts.push_back(0.0);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double mu = measure_above(s, 0.5 * (cuts[k] + cuts[k + 1]));
    auto f = [&](double l) { return std::pow(l, q - 1.0) * std::pow(mu, q / p); };
    total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, cuts[k], cuts[k + 1], 15, 1e-14);
  }
  return std::pow(p * total, 1.0 / q);
}

WeightedSampleSet random_set(std::mt19937_64& rng, int size) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::lognormal_distribution<double> val(0.0, 1.0);
  WeightedSampleSet s;
  for (int i = 0; i < size; ++i) s.add(unit(rng) < 0.1 ? 0.0 : val(rng), 0.01 + unit(rng));
  return s;
}

}  // namespace

TEST_CASE("distribution function examples") {
  WeightedSampleSet s;
  s.add(1.0, 2.0);
  s.add(3.0, 1.0);
  CHECK(distribution_function(s, 2.0) == 1.0);
  CHECK(distribution_function(s, 0.5) == 3.0);
  CHECK(distribution_function(s, 3.0) == 0.0);
  CHECK(distribution_function(WeightedSampleSet{}, 0.0) == 0.0);
}

TEST_CASE("indicator norms match the closed form") {
  WeightedSampleSet s;
  s.add(1.0, 0.75);
  s.add(1.0, 1.75);
  s.add(0.0, 4.0);
  const double m = 2.5;
  for (double p : {1.0, 2.0, 3.5})
    for (double q : {1.0, 1.5, 4.0}) CHECK(lorentz_norm(s, p, q) == doctest::Approx(std::pow(p / q, 1.0 / q) * std::pow(m, 1.0 / p)).epsilon(1e-14));
  CHECK(weak_norm(s, 2.0) == doctest::Approx(std::sqrt(m)).epsilon(1e-14));
  CHECK(lorentz_norm(s, 2.0, kInfinity) == weak_norm(s, 2.0));
}

TEST_CASE("closed form agrees with adaptive quadrature of the definition") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int t = 0; t < 40; ++t) {
    const auto s = random_set(rng, 1 + static_cast<int>(unit(rng) * 30));
    const double p = 1.0 + 5.0 * unit(rng), q = 1.0 + 5.0 * unit(rng);
    CHECK(lorentz_norm(s, p, q) == doctest::Approx(quadrature_norm(s, p, q)).epsilon(1e-10));
  }
}

TEST_CASE("L(p,p) is L^p") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto s = random_set(rng, 50);
    for (double p : {1.0, 2.0, 4.5}) CHECK(lorentz_norm(s, p, p) == doctest::Approx(lebesgue_norm(s, p)).epsilon(1e-12));
  }
}

TEST_CASE("homogeneity and monotonicity in q") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 1000; ++t) {
    auto s = random_set(rng, 20);
    const double base1 = lorentz_norm(s, 2.0, 1.0), base2 = lorentz_norm(s, 2.0, 2.0);
    const double base_inf = lorentz_norm(s, 2.0, kInfinity);
    CHECK(base2 <= base1 * (1.0 + 1e-12));
    CHECK(base_inf <= base2 * (1.0 + 1e-12));
    if (t < 20) {
      auto scaled = s;
      for (double& v : scaled.values) v *= 3.0;
      CHECK(lorentz_norm(scaled, 2.0, 1.0) == doctest::Approx(3.0 * base1).epsilon(1e-12));
    }
  }
}

TEST_CASE("embedding ratio and the zero function") {
  WeightedSampleSet z;
  z.add(0.0, 1.0);
  CHECK(lorentz_norm(z, 2.0, 1.0) == 0.0);
  CHECK(lorentz_embedding_ratio(z, 2.0, 1.0, 2.0) == 0.0);
  std::mt19937_64 rng(9);
  const auto s = random_set(rng, 30);
  const double r = lorentz_embedding_ratio(s, 3.0, 1.0, 2.0);
  CHECK(r > 0.0);
  CHECK(r <= 1.0 + 1e-12);
}

TEST_CASE("linear function gradient term on a flat chart") {
  // |grad f| = |a| on volume V: the gradient norm is |a| V^{1/p} (p/q)^{1/q}
  WeightedSampleSet f, df;
  const double a = 1.5;
  for (int i = 0; i < 10; ++i) {
    f.add(0.0, 0.2);
    df.add(a, 0.2);
  }
  const double p = 3.0, q = 1.0;
  CHECK(sobolev_lorentz_norm({f, df}, p, q) == doctest::Approx(a * std::pow(2.0, 1.0 / p) * std::pow(p / q, 1.0 / q)).epsilon(1e-13));
}

TEST_CASE("invalid exponents are rejected") {
  WeightedSampleSet s;
  s.add(1.0, 1.0);
  CHECK_THROWS_AS(lorentz_norm(s, 0.5, 2.0), Error);
  CHECK_THROWS_AS(lorentz_norm(s, 2.0, 0.5), Error);
  WeightedSampleSet bad;
  bad.add(1.0, -1.0);
  CHECK_THROWS_AS(bad.validate(), Error);
}
