#pragma once

#include "immersia/immersion.hpp"

namespace immersia {

// Flat copies of R^n in R^{n+1}; chart c is rotated by 0.3 c in the (x0, x1) plane and shifted.
// Boxes [-0.5, 0.5]^n.
SampledImmersion flat_rotated_charts(int n, int charts, int resolution);

// Graph charts of the unit sphere over [-0.35, 0.35]^n, chart c shifted by 0.2 c along x0.
SampledImmersion sphere_cap_charts(int n, int charts, int resolution);

}  // namespace immersia
