#include "immersia/spatial_index.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace immersia {

namespace {
constexpr std::size_t kLeafSize = 16;
}

SpatialIndex::SpatialIndex(std::vector<double> points, int d) : d_(d), pts_(std::move(points)) {
  count_ = d_ > 0 ? pts_.size() / d_ : 0;
  order_.resize(count_);
  std::iota(order_.begin(), order_.end(), 0);
  if (count_ > 0) build(0, count_);
  sorted_.resize(pts_.size());
  for (std::size_t i = 0; i < count_; ++i)
    std::copy_n(pts_.begin() + order_[i] * d_, d_, sorted_.begin() + i * d_);
}

int SpatialIndex::build(std::size_t begin, std::size_t end) {
  Node nd;
  nd.begin = begin;
  nd.end = end;
  nd.lo.assign(d_, std::numeric_limits<double>::infinity());
  nd.hi.assign(d_, -std::numeric_limits<double>::infinity());
  for (std::size_t i = begin; i < end; ++i)
    for (int c = 0; c < d_; ++c) {
      const double v = pts_[order_[i] * d_ + c];
      nd.lo[c] = std::min(nd.lo[c], v);
      nd.hi[c] = std::max(nd.hi[c], v);
    }
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(nd);
  if (end - begin <= kLeafSize) return id;
  int axis = 0;
  for (int c = 1; c < d_; ++c)
    if (nd.hi[c] - nd.lo[c] > nd.hi[axis] - nd.lo[axis]) axis = c;
  if (nd.hi[axis] == nd.lo[axis]) return id;
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::size_t a, std::size_t b) { return pts_[a * d_ + axis] < pts_[b * d_ + axis]; });
  const int l = build(begin, mid);
  const int r = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = pts_[order_[mid] * d_ + axis];
  nodes_[id].left = l;
  nodes_[id].right = r;
  return id;
}

double SpatialIndex::box_dist2(const Node& nd, const double* c) const {
  double s = 0.0;
  for (int k = 0; k < d_; ++k) {
    double e = 0.0;
    if (c[k] < nd.lo[k]) e = nd.lo[k] - c[k];
    else if (c[k] > nd.hi[k]) e = c[k] - nd.hi[k];
    s += e * e;
  }
  return s;
}

void SpatialIndex::ball(const double* center, double r, const std::function<void(std::size_t, double)>& fn) const {
  if (nodes_.empty()) return;
  const double r2 = r * r;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const Node& nd = nodes_[stack.back()];
    stack.pop_back();
    if (box_dist2(nd, center) >= r2) continue;
    if (nd.axis < 0) {
      for (std::size_t i = nd.begin; i < nd.end; ++i) {
        const double* q = sorted_.data() + i * d_;
        double s = 0.0;
        for (int c = 0; c < d_; ++c) {
          const double e = q[c] - center[c];
          s += e * e;
        }
        if (s < r2) fn(order_[i], s);
      }
    } else {
      stack.push_back(nd.right);
      stack.push_back(nd.left);
    }
  }
}

std::vector<std::size_t> SpatialIndex::ball_indices(const double* center, double r) const {
  std::vector<std::size_t> out;
  ball(center, r, [&](std::size_t i, double) { out.push_back(i); });
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t SpatialIndex::nearest(const double* center, double* dist2) const {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  std::vector<int> stack{0};
  while (!nodes_.empty() && !stack.empty()) {
    const Node& nd = nodes_[stack.back()];
    stack.pop_back();
    if (box_dist2(nd, center) >= best_d) continue;
    if (nd.axis < 0) {
      for (std::size_t i = nd.begin; i < nd.end; ++i) {
        const std::size_t p = order_[i];
        double s = 0.0;
        for (int c = 0; c < d_; ++c) {
          const double e = pts_[p * d_ + c] - center[c];
          s += e * e;
        }
        if (s < best_d || (s == best_d && p < best)) {
          best_d = s;
          best = p;
        }
      }
    } else {
      // visit the nearer side first
      const bool left_first = center[nd.axis] < nd.split;
      stack.push_back(left_first ? nd.right : nd.left);
      stack.push_back(left_first ? nd.left : nd.right);
    }
  }
  if (dist2) *dist2 = best_d;
  return best;
}

}  // namespace immersia
