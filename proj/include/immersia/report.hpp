#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "immersia/energy.hpp"
#include "immersia/harmonic.hpp"
#include "immersia/measure.hpp"
#include "immersia/slicing.hpp"
#include "immersia/topology.hpp"

namespace immersia {

const char* report_schema_version();

// Compact JSON with every double printed as %.17g; non-finite numbers become null.
std::string dump_report(const nlohmann::json& j);

// Adds report_schema_version and the report kind.
nlohmann::json report_header(const std::string& kind);

nlohmann::json to_json(const EnergyReport& r);
nlohmann::json to_json(const InequalityReport& r);
nlohmann::json to_json(const SliceSearchResult& r);
nlohmann::json slice_summary(const Slice& s);
nlohmann::json to_json(const PlaneFit& f);
nlohmann::json to_json(const SphereGraph& g);
nlohmann::json to_json(const CriticalPointReport& r);
nlohmann::json to_json(const HarmonicChart& hc);
nlohmann::json to_json(const PdeResidualReport& r);
nlohmann::json to_json(const TransitionReport& r);
nlohmann::json to_json(const CompositionReport& r);
nlohmann::json to_json(const GoodBadDecomposition& g);

// Report kinds known to the validator.
std::vector<std::string> report_kinds();

// Checks the version, the kind, required fields and value types. Strict mode also rejects unknown fields.
// Returns an empty string on success, otherwise the first problem found.
std::string validate_report(const nlohmann::json& j, bool strict);

// Rejects keys outside `allowed`; throws invalid_argument naming the first unknown key.
void check_known_keys(const nlohmann::json& params, const std::vector<std::string>& allowed);

}  // namespace immersia
