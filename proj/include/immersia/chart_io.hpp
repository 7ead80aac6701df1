#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "immersia/immersion.hpp"

namespace immersia {

enum class ChartFormat { binary, json };

nlohmann::json shape_spec_to_json(const ShapeSpec& spec);
ShapeSpec shape_spec_from_json(const nlohmann::json& j);

// Manifest {n, d, shape_id?, shape?, resolution?, overlaps?, charts:[{dims, bounds, data_file | data}]}.
// Binary chart files hold little-endian float64 values, row-major nodes, d values per node.
void write_immersion(const SampledImmersion& imm, const std::string& manifest_path, ChartFormat format);

// Analytic derivatives are restored when the manifest names a shape whose resampling matches the stored data.
SampledImmersion read_immersion(const std::string& manifest_path);

// Little-endian float64 blocks.
std::string encode_doubles(const std::vector<double>& v);
std::vector<double> decode_doubles(const std::string& bytes);

// Write to a sibling temp file, then rename over the target.
void atomic_write(const std::string& path, const std::string& bytes);

}  // namespace immersia
