#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "semisamp/augmentor.hpp"
#include "semisamp/harness.hpp"

namespace semisamp {

/// Contents of a run configuration file:
///
///   {
///     "preset": "outdoor" | "indoor",
///     "categories": [...],              // indoor preset category list
///     "augmentation": { ...AugmentationConfig fields... },
///     "simulation":   { ...SimulationConfig fields... }
///   }
///
/// Every section and key is optional; missing values keep the preset
/// defaults. Unknown keys are rejected.
struct RunConfig {
  AugmentationConfig augmentation = outdoor_preset();
  SimulationConfig simulation;
};

/// Throws FormatError on malformed JSON, unknown keys or wrong types.
RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Inverse of parse_run_config over every field it understands.
std::string dump_run_config(const RunConfig& cfg);

CollisionMode parse_collision_mode(std::string_view name);
std::string_view to_string(CollisionMode mode);

}  // namespace semisamp
