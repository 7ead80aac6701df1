#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace immersia {

// Static k-d tree over points in R^d for ball queries.
class SpatialIndex {
 public:
  SpatialIndex() = default;
  // points: d coordinates per point, copied
  SpatialIndex(std::vector<double> points, int d);

  int dim() const { return d_; }
  std::size_t size() const { return count_; }
  const double* point(std::size_t i) const { return pts_.data() + i * d_; }

  // fn(index, squared distance) for every point with |x - center| < r
  void ball(const double* center, double r, const std::function<void(std::size_t, double)>& fn) const;
  std::vector<std::size_t> ball_indices(const double* center, double r) const;
  // index of the nearest point; squared distance in dist2
  std::size_t nearest(const double* center, double* dist2 = nullptr) const;

 private:
  struct Node {
    int axis = -1;  // -1 for leaves
    double split = 0.0;
    std::size_t begin = 0, end = 0;
    int left = -1, right = -1;
    std::vector<double> lo, hi;
  };
  int build(std::size_t begin, std::size_t end);
  double box_dist2(const Node& nd, const double* c) const;

  int d_ = 0;
  std::size_t count_ = 0;
  std::vector<double> pts_;
  std::vector<double> sorted_;  // pts_ in tree order
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace immersia
