#include <cmath>
#include <numbers>
#include <string>

#include "immersia/error.hpp"
#include "immersia/immersion.hpp"

namespace immersia {

const char* shape_kind_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::plane: return "plane";
    case ShapeKind::round_sphere: return "round_sphere";
    case ShapeKind::ellipsoid: return "ellipsoid";
    case ShapeKind::clifford_torus: return "clifford_torus";
    case ShapeKind::graph_perturbation: return "graph_perturbation";
    case ShapeKind::double_cover_sphere: return "double_cover_sphere";
    case ShapeKind::dumbbell: return "dumbbell";
  }
  return "unknown";
}

ShapeKind shape_kind_from_name(const std::string& s) {
  for (auto k : {ShapeKind::plane, ShapeKind::round_sphere, ShapeKind::ellipsoid, ShapeKind::clifford_torus,
                 ShapeKind::graph_perturbation, ShapeKind::double_cover_sphere, ShapeKind::dumbbell})
    if (s == shape_kind_name(k)) return k;
  throw Error(ErrorCode::invalid_shape, "unknown shape kind: " + s);
}

int ShapeSpec::ambient_dim() const {
  switch (kind) {
    case ShapeKind::plane:
    case ShapeKind::round_sphere:
    case ShapeKind::double_cover_sphere: return n + codim;
    case ShapeKind::clifford_torus: return 2 * n;
    case ShapeKind::graph_perturbation:
    case ShapeKind::ellipsoid:
    case ShapeKind::dumbbell: return n + 1;
  }
  return n + 1;
}

namespace {

class PlaneMap : public AnalyticMap {
 public:
  PlaneMap(int n, int d, double amplitude, double frequency)
      : n_(n), d_(d), amp_(amplitude), freq_(frequency) {}
  int n() const override { return n_; }
  int d() const override { return d_; }
  void eval(int, const double* u, Jet* out) const override {
    const auto& L = JetLayout::get(n_);
    for (int i = 0; i < d_; ++i) out[i] = Jet(L, 0.0);
    Jet height(L, amp_);
    for (int i = 0; i < n_; ++i) {
      out[i] = Jet::variable(L, i, u[i]);
      if (amp_ != 0.0) height = height * cos(freq_ * out[i]);
    }
    if (amp_ != 0.0) out[n_] = height;
  }

 private:
  int n_, d_;
  double amp_, freq_;
};

class TorusMap : public AnalyticMap {
 public:
  explicit TorusMap(int n) : n_(n) {}
  int n() const override { return n_; }
  int d() const override { return 2 * n_; }
  void eval(int, const double* u, Jet* out) const override {
    const auto& L = JetLayout::get(n_);
    const double s = 1.0 / std::sqrt(static_cast<double>(n_));
    for (int i = 0; i < n_; ++i) {
      Jet t = Jet::variable(L, i, u[i]);
      out[2 * i] = s * cos(t);
      out[2 * i + 1] = s * sin(t);
    }
  }

 private:
  int n_;
};

// Radial graph x = R(theta) theta over the cubed sphere, optionally scaled per axis.
// The dumbbell scales only the coordinates across its axis x0.
class StarMap : public AnalyticMap {
 public:
  enum class Radius { constant, perturbed, dumbbell };

  StarMap(int n, int d, int copies, Radius kind, double radius, std::vector<double> axes, double amp, double freq,
          double neck, double stretch)
      : n_(n), d_(d), copies_(copies), kind_(kind), radius_(radius), axes_(std::move(axes)), amp_(amp),
        freq_(freq), neck_(neck), stretch_(stretch) {}

  int n() const override { return n_; }
  int d() const override { return d_; }
  int faces() const { return 2 * (n_ + 1); }

  void eval(int chart, const double* u, Jet* out) const override {
    const auto& L = JetLayout::get(n_);
    const int face = chart % faces();
    const int axis = face / 2;
    const double sign = (face % 2 == 0) ? 1.0 : -1.0;
    // reverse the first parameter on faces that would otherwise point the normal inward
    const double flip = (axis % 2 == 0) ? sign : -sign;
    Jet v[kMaxN + 1];
    int slot = 0;
    for (int k = 0; k <= n_; ++k) {
      if (k == axis) {
        v[k] = Jet(L, sign);
        continue;
      }
      Jet t = Jet::variable(L, slot, u[slot]);
      if (slot == 0 && flip < 0) t = -t;
      if (k == 0 && stretch_ < 1.0) t = stretch_ * t + (1.0 - stretch_) * (t * t * t);
      v[k] = t;
      ++slot;
    }
    Jet s2(L, 0.0);
    for (int k = 0; k <= n_; ++k) s2 += v[k] * v[k];
    Jet w = rsqrt(s2);
    Jet theta[kMaxN + 1];
    for (int k = 0; k <= n_; ++k) theta[k] = v[k] * w;
    Jet R(L, radius_);
    if (kind_ == Radius::perturbed) {
      R = radius_ * (1.0 + amp_ * (sin(freq_ * theta[0]) * cos(freq_ * theta[1])));
    } else if (kind_ == Radius::dumbbell) {
      R = sqrt(neck_ * neck_ + theta[0] * theta[0]);
    }
    for (int i = 0; i < d_; ++i) out[i] = Jet(L, 0.0);
    for (int k = 0; k <= n_; ++k) {
      // the dumbbell keeps its axis coordinate and narrows the cross-sections
      out[k] = (kind_ == Radius::dumbbell && k == 0) ? theta[k] : R * theta[k];
      if (!axes_.empty()) out[k] *= axes_[k];
    }
  }

 private:
  int n_, d_, copies_;
  Radius kind_;
  double radius_;
  std::vector<double> axes_;
  double amp_, freq_, neck_, stretch_;
};

}  // namespace

SampledImmersion build_shape(const ShapeSpec& spec, int resolution) {
  if (resolution < 5) throw Error(ErrorCode::invalid_argument, "resolution must be >= 5");
  const int n = spec.n;
  if (n < 2 || n % 2 != 0) throw Error(ErrorCode::unsupported_dimension, "n must be even and >= 2");
  if (n > kMaxN) throw Error(ErrorCode::unsupported_dimension, "n > 4 is not supported by the sampled backend");
  const int d = spec.ambient_dim();
  if (d > kMaxD) throw Error(ErrorCode::unsupported_dimension, "ambient dimension exceeds 8");
  if (spec.codim < 1) throw Error(ErrorCode::invalid_shape, "codimension must be >= 1");

  std::shared_ptr<const AnalyticMap> map;
  std::vector<ChartGrid> grids;
  std::vector<std::pair<int, int>> overlaps;
  auto box = [&](double lo, double hi) {
    return ChartGrid(std::vector<int>(n, resolution), std::vector<Interval>(n, Interval{lo, hi}));
  };
  auto cubed = [&](int copies) {
    const int faces = 2 * (n + 1);
    for (int c = 0; c < copies * faces; ++c) grids.push_back(box(-1.0, 1.0));
    if (copies > 1)
      for (int c = 0; c < copies; ++c)
        for (int a = 0; a < faces; ++a)
          for (int b = a + 1; b < faces; ++b) overlaps.emplace_back(c * faces + a, c * faces + b);
  };

  switch (spec.kind) {
    case ShapeKind::plane:
      if (!(spec.extent > 0)) throw Error(ErrorCode::invalid_shape, "plane extent must be > 0");
      map = std::make_shared<PlaneMap>(n, d, 0.0, 0.0);
      grids.push_back(box(-spec.extent, spec.extent));
      break;
    case ShapeKind::round_sphere:
    case ShapeKind::double_cover_sphere: {
      if (!(spec.radius > 0)) throw Error(ErrorCode::invalid_shape, "sphere radius must be > 0");
      int copies = spec.kind == ShapeKind::double_cover_sphere ? 2 : 1;
      map = std::make_shared<StarMap>(n, d, copies, StarMap::Radius::constant, spec.radius, std::vector<double>{},
                                      0.0, 0.0, 0.0, 1.0);
      cubed(copies);
      break;
    }
    case ShapeKind::ellipsoid: {
      if (static_cast<int>(spec.semi_axes.size()) != n + 1)
        throw Error(ErrorCode::invalid_shape, "ellipsoid needs n+1 semi-axes");
      for (double a : spec.semi_axes)
        if (!(a > 0)) throw Error(ErrorCode::invalid_shape, "semi-axes must be > 0");
      map = std::make_shared<StarMap>(n, d, 1, StarMap::Radius::constant, 1.0, spec.semi_axes, 0.0, 0.0, 0.0, 1.0);
      cubed(1);
      break;
    }
    case ShapeKind::clifford_torus:
      map = std::make_shared<TorusMap>(n);
      grids.push_back(box(0.0, 2.0 * std::numbers::pi));
      break;
    case ShapeKind::graph_perturbation:
      if (spec.base == ShapeKind::plane) {
        if (!(spec.extent > 0)) throw Error(ErrorCode::invalid_shape, "plane extent must be > 0");
        map = std::make_shared<PlaneMap>(n, d, spec.amplitude, spec.frequency);
        grids.push_back(box(-spec.extent, spec.extent));
      } else if (spec.base == ShapeKind::round_sphere) {
        if (!(spec.radius > 0) || std::abs(spec.amplitude) >= 1.0)
          throw Error(ErrorCode::invalid_shape, "perturbed sphere needs radius > 0 and |amplitude| < 1");
        map = std::make_shared<StarMap>(n, d, 1, StarMap::Radius::perturbed, spec.radius, std::vector<double>{},
                                        spec.amplitude, spec.frequency, 0.0, 1.0);
        cubed(1);
      } else {
        throw Error(ErrorCode::invalid_shape, "graph_perturbation base must be plane or round_sphere");
      }
      break;
    case ShapeKind::dumbbell:
      if (!(spec.neck_width > 0.0 && spec.neck_width < 1.0))
        throw Error(ErrorCode::invalid_shape, "neck_width must lie in (0,1)");
      // nodes cluster toward the neck on the side faces
      map = std::make_shared<StarMap>(n, d, 1, StarMap::Radius::dumbbell, 1.0, std::vector<double>{}, 0.0, 0.0,
                                      spec.neck_width, 0.35);
      cubed(1);
      break;
  }
  SampledImmersion imm = sample_analytic(map, grids, std::string(shape_kind_name(spec.kind)));
  imm.spec = spec;
  imm.overlaps = overlaps;
  return imm;
}

}  // namespace immersia
