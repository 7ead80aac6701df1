#include "immersia/fixtures.hpp"

#include <cmath>
#include <memory>

#include "immersia/error.hpp"

namespace immersia {
namespace {

class CapMap final : public AnalyticMap {
 public:
  CapMap(int n, bool flat) : n_(n), flat_(flat) {}
  int n() const override { return n_; }
  int d() const override { return n_ + 1; }

  void eval(int chart, const double* u, Jet* out) const override {
    const auto& L = JetLayout::get(n_);
    Jet x[kMaxN];
    for (int i = 0; i < n_; ++i) x[i] = Jet::variable(L, i, u[i]);
    if (flat_) {
      const double c = std::cos(0.3 * chart), s = std::sin(0.3 * chart);
      out[0] = c * x[0] - s * x[1] + 0.1 * chart;
      out[1] = s * x[0] + c * x[1] - 0.05 * chart;
      for (int i = 2; i < n_; ++i) out[i] = x[i];
      out[n_] = Jet(L, 0.0);
      return;
    }
    Jet s(L, 1.0);
    for (int i = 0; i < n_; ++i) {
      out[i] = x[i];
      s -= x[i] * x[i];
    }
    out[n_] = sqrt(s);
  }

 private:
  int n_;
  bool flat_;
};

void check_args(int n, int charts, int resolution) {
  if (n < 2 || n > kMaxN) throw Error(ErrorCode::unsupported_dimension, "fixture dimension out of range");
  if (charts < 1) throw Error(ErrorCode::invalid_argument, "fixture needs a chart");
  if (resolution < 3) throw Error(ErrorCode::invalid_argument, "fixture resolution below 3");
}

}  // namespace

SampledImmersion flat_rotated_charts(int n, int charts, int resolution) {
  check_args(n, charts, resolution);
  std::vector<ChartGrid> grids;
  for (int c = 0; c < charts; ++c)
    grids.emplace_back(std::vector<int>(n, resolution), std::vector<Interval>(n, {-0.5, 0.5}));
  return sample_analytic(std::make_shared<CapMap>(n, true), grids, "flat_rotated");
}

SampledImmersion sphere_cap_charts(int n, int charts, int resolution) {
  check_args(n, charts, resolution);
  std::vector<ChartGrid> grids;
  for (int c = 0; c < charts; ++c) {
    std::vector<Interval> b(n, {-0.35, 0.35});
    b[0] = {-0.35 + 0.2 * c, 0.35 + 0.2 * c};
    grids.emplace_back(std::vector<int>(n, resolution), b);
  }
  return sample_analytic(std::make_shared<CapMap>(n, false), grids, "sphere_caps");
}

}  // namespace immersia
