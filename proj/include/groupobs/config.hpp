#pragma once

#include <string>

#include "groupobs/scenarios.hpp"

namespace groupobs {

/// Parses and fully validates a JSON scenario configuration. Defaults are
/// applied for absent keys; unknown keys are rejected with their path.
ScenarioConfig parse_config(const std::string& path);
ScenarioConfig parse_config_text(const std::string& text, const std::string& origin = "<text>");

/// Canonical JSON serialization; parse(serialize(c)) == c.
std::string serialize_config(const ScenarioConfig& config);

bool config_equal(const ScenarioConfig& a, const ScenarioConfig& b);

}  // namespace groupobs
