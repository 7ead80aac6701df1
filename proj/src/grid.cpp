#include "immersia/grid.hpp"

#include <string>

#include "immersia/error.hpp"

namespace immersia {

const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::invalid_shape: return "invalid-shape";
    case ErrorCode::unsupported_order: return "unsupported-order";
    case ErrorCode::unsupported_dimension: return "unsupported-dimension";
    case ErrorCode::unsupported_codimension: return "unsupported-codimension";
    case ErrorCode::unsupported: return "unsupported";
    case ErrorCode::degenerate_metric: return "degenerate-metric";
    case ErrorCode::invalid_exponent: return "invalid-exponent";
    case ErrorCode::precondition: return "precondition";
    case ErrorCode::tangency: return "tangency";
    case ErrorCode::singular_configuration: return "singular-configuration";
    case ErrorCode::search_failure: return "search-failure";
    case ErrorCode::oscillation_too_large: return "oscillation-too-large";
    case ErrorCode::projection_singular: return "projection-singular";
    case ErrorCode::inversion_singular: return "inversion-singular";
    case ErrorCode::solver_failure: return "solver-failure";
    case ErrorCode::fold_detected: return "fold-detected";
    case ErrorCode::insufficient_overlap: return "insufficient-overlap";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

ChartGrid::ChartGrid(std::vector<int> dims, std::vector<Interval> bounds)
    : dims_(std::move(dims)), bounds_(std::move(bounds)) {
  if (dims_.empty() || dims_.size() > static_cast<std::size_t>(kMaxN) || dims_.size() != bounds_.size())
    throw Error(ErrorCode::invalid_argument, "chart grid: dims/bounds mismatch");
  spacing_.resize(dims_.size());
  strides_.resize(dims_.size());
  count_ = 1;
  for (int a = n() - 1; a >= 0; --a) {
    if (dims_[a] < 5) throw Error(ErrorCode::invalid_argument, "chart grid: every dim must be >= 5");
    if (!(bounds_[a].hi > bounds_[a].lo)) throw Error(ErrorCode::invalid_argument, "chart grid: empty interval");
    spacing_[a] = (bounds_[a].hi - bounds_[a].lo) / (dims_[a] - 1);
    strides_[a] = count_;
    count_ *= static_cast<std::size_t>(dims_[a]);
  }
}

std::size_t ChartGrid::index(const MultiIndex& m) const {
  std::size_t idx = 0;
  for (int a = 0; a < n(); ++a) idx += static_cast<std::size_t>(m[a]) * strides_[a];
  return idx;
}

MultiIndex ChartGrid::multi(std::size_t idx) const {
  MultiIndex m{};
  for (int a = 0; a < n(); ++a) {
    m[a] = static_cast<int>(idx / strides_[a]);
    idx %= strides_[a];
  }
  return m;
}

void ChartGrid::param(const MultiIndex& m, double* u) const {
  for (int a = 0; a < n(); ++a) {
    // hit the upper bound exactly at the last node
    u[a] = (m[a] == dims_[a] - 1) ? bounds_[a].hi : bounds_[a].lo + m[a] * spacing_[a];
  }
}

bool ChartGrid::contains(const MultiIndex& m) const {
  for (int a = 0; a < n(); ++a)
    if (m[a] < 0 || m[a] >= dims_[a]) return false;
  return true;
}

bool ChartGrid::is_boundary(const MultiIndex& m) const { return near_boundary(m, 0); }

bool ChartGrid::near_boundary(const MultiIndex& m, int layers) const {
  for (int a = 0; a < n(); ++a)
    if (m[a] <= layers || m[a] >= dims_[a] - 1 - layers) return true;
  return false;
}

double ChartGrid::cell_weight(const MultiIndex& m) const {
  double w = 1.0;
  for (int a = 0; a < n(); ++a) {
    w *= spacing_[a];
    if (m[a] == 0 || m[a] == dims_[a] - 1) w *= 0.5;
  }
  return w;
}

double ChartGrid::cell_volume() const {
  double w = 1.0;
  for (double h : spacing_) w *= h;
  return w;
}

ChartGrid ChartGrid::refined(int factor) const {
  if (factor < 2) throw Error(ErrorCode::invalid_argument, "refine factor must be >= 2");
  std::vector<int> d(dims_);
  for (auto& x : d) x = (x - 1) * factor + 1;
  return ChartGrid(d, bounds_);
}

}  // namespace immersia
