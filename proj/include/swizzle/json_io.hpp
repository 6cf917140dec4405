#pragma once

#include <json.hpp>

#include "swizzle/cache_sim.hpp"
#include "swizzle/patterns.hpp"

// JSON mappings shared by report files, history files and the CLI.
namespace swz {

using Json = nlohmann::ordered_json;

Json report_to_json(const BottleneckReport& report);
// Schema errors raise Error(Schema); inconsistent counters raise
// Error(CorruptReport).
BottleneckReport report_from_json(const nlohmann::json& doc);

Json pattern_to_json(const SwizzlePattern& pattern);
SwizzlePattern pattern_from_json(const nlohmann::json& doc);

Json validation_to_json(const ValidationResult& v, std::size_t max_listed = 32);

}  // namespace swz
