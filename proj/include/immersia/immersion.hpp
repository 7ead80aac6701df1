#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "immersia/grid.hpp"
#include "immersia/jet.hpp"

namespace immersia {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class ShapeKind {
  plane,
  round_sphere,
  ellipsoid,
  clifford_torus,
  graph_perturbation,
  double_cover_sphere,
  dumbbell,
};

const char* shape_kind_name(ShapeKind k);
ShapeKind shape_kind_from_name(const std::string& s);

struct ShapeSpec {
  ShapeKind kind = ShapeKind::round_sphere;
  int n = 4;
  int codim = 1;                  // plane, round_sphere, double_cover_sphere
  double radius = 1.0;            // round_sphere, double_cover_sphere, sphere-based perturbation
  std::vector<double> semi_axes;  // ellipsoid, n+1 entries
  double extent = 1.0;            // half-width of the plane patch
  ShapeKind base = ShapeKind::plane;  // graph_perturbation: plane or round_sphere
  double amplitude = 0.1;
  double frequency = 1.0;
  double neck_width = 0.2;        // dumbbell

  int ambient_dim() const;
};

// Exact chart maps, evaluated as order-3 Taylor jets.
class AnalyticMap {
 public:
  virtual ~AnalyticMap() = default;
  virtual int n() const = 0;
  virtual int d() const = 0;
  // out has d entries
  virtual void eval(int chart, const double* u, Jet* out) const = 0;
};

struct Chart {
  ChartGrid grid;
  std::vector<double> phi;  // node-major, d values per node

  const double* at(std::size_t node, int d) const { return phi.data() + node * d; }
};

class SampledImmersion {
 public:
  int n = 0;
  int d = 0;
  std::vector<Chart> charts;
  std::optional<std::string> shape_id;
  std::shared_ptr<const AnalyticMap> analytic;
  std::optional<ShapeSpec> spec;
  // Pairs of charts glued along coinciding images. Empty means all charts glue.
  std::vector<std::pair<int, int>> overlaps;

  bool exact() const { return analytic != nullptr; }
  bool glued(int a, int b) const;
  std::size_t node_count() const;
  Vec phi(int chart, const MultiIndex& m) const;
  void validate() const;
};

SampledImmersion build_shape(const ShapeSpec& spec, int resolution);

// Build from an explicit analytic map with user-chosen chart boxes.
SampledImmersion sample_analytic(std::shared_ptr<const AnalyticMap> map, const std::vector<ChartGrid>& grids,
                                 std::optional<std::string> shape_id = std::nullopt);

enum class DerivativeMode { automatic, exact, numeric };

// Order counts per axis; sum <= 3.
Vec derivative(const SampledImmersion& imm, int chart, const MultiIndex& node, const MultiIndex& order,
               DerivativeMode mode = DerivativeMode::automatic);

// All partial derivatives up to order 3 at one point, full symmetric storage.
struct NodeDerivatives {
  int n = 0;
  int d = 0;
  double phi[kMaxD];
  double d1[kMaxN][kMaxD];
  double d2[kMaxN][kMaxN][kMaxD];
  double d3[kMaxN][kMaxN][kMaxN][kMaxD];
};

void node_derivatives(const SampledImmersion& imm, int chart, const MultiIndex& node, DerivativeMode mode,
                      NodeDerivatives& out, int max_order = 3);
// Exact derivatives at an arbitrary parameter point (analytic immersions only).
void point_derivatives(const SampledImmersion& imm, int chart, const double* u, NodeDerivatives& out);

struct SimilarityTransform {
  Vec translation;
  Mat rotation;
  double dilation = 1.0;

  static SimilarityTransform identity(int d);
  SimilarityTransform inverse() const;
  void validate(int d) const;
};

SampledImmersion apply_transform(const SampledImmersion& imm, const SimilarityTransform& T);
SampledImmersion refine(const SampledImmersion& imm, int factor);

// Drop analytic data so every query goes through finite differences.
SampledImmersion as_numeric(const SampledImmersion& imm);

}  // namespace immersia
