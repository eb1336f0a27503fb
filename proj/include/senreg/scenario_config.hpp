#pragma once

#include <filesystem>
#include <string>

#include "senreg/model.hpp"

namespace senreg {

/// Checks ranges and cross-field consistency. Throws ConfigError naming the field.
void validate(const ScenarioConfig& config);

/// Parses the JSON scenario format (km / degrees / seconds at the boundary, SI inside).
/// Unknown keys are rejected.
ScenarioConfig parse_scenario_config(const std::string& json_text);
ScenarioConfig load_scenario_config(const std::filesystem::path& path);

/// Inverse of parse_scenario_config, pretty-printed.
std::string scenario_config_to_json(const ScenarioConfig& config);

}  // namespace senreg
