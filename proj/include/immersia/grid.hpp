#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "immersia/jet.hpp"

namespace immersia {

using MultiIndex = std::array<int, kMaxN>;

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

// Regular lattice on a box of parameter space.
class ChartGrid {
 public:
  ChartGrid() = default;
  ChartGrid(std::vector<int> dims, std::vector<Interval> bounds);

  int n() const { return static_cast<int>(dims_.size()); }
  const std::vector<int>& dims() const { return dims_; }
  const std::vector<Interval>& bounds() const { return bounds_; }
  const std::vector<double>& spacing() const { return spacing_; }

  std::size_t node_count() const { return count_; }
  std::size_t index(const MultiIndex& m) const;
  MultiIndex multi(std::size_t idx) const;
  std::size_t stride(int axis) const { return strides_[axis]; }

  // parameter coordinates of a lattice node
  void param(const MultiIndex& m, double* u) const;
  bool contains(const MultiIndex& m) const;
  bool is_boundary(const MultiIndex& m) const;
  bool is_boundary(std::size_t idx) const { return is_boundary(multi(idx)); }
  // nodes at most `layers` steps from the boundary along some axis
  bool near_boundary(const MultiIndex& m, int layers) const;
  // dual-cell (trapezoid) quadrature weight in parameter units
  double cell_weight(const MultiIndex& m) const;
  double cell_volume() const;

  ChartGrid refined(int factor) const;

 private:
  std::vector<int> dims_;
  std::vector<Interval> bounds_;
  std::vector<double> spacing_;
  std::vector<std::size_t> strides_;
  std::size_t count_ = 0;
};

}  // namespace immersia
