#pragma once

#include <filesystem>

#include "json.hpp"
#include "occlane/augment.hpp"
#include "occlane/pipeline.hpp"
#include "occlane/synthgen.hpp"

namespace occlane {

// Config files share the manifest's serialization: JSON, sorted keys, two-space
// indent. Readers reject unknown keys and wrong types with ValidationError
// naming the key path; absent keys keep their defaults.

nlohmann::json to_json(const ExternalNodeSpec& spec);
nlohmann::json to_json(const DetectorConfig& cfg);
nlohmann::json to_json(const InpaintConfig& cfg);
nlohmann::json to_json(const LaneFinderConfig& cfg);
nlohmann::json to_json(const PipelineConfig& cfg);
nlohmann::json to_json(const SceneParams& params);
nlohmann::json to_json(const PlacementPolicy& policy);

ExternalNodeSpec external_spec_from_json(const nlohmann::json& j, const std::string& where = "external");
DetectorConfig detector_config_from_json(const nlohmann::json& j, const std::string& where = "detector");
InpaintConfig inpaint_config_from_json(const nlohmann::json& j, const std::string& where = "inpainter");
LaneFinderConfig lane_config_from_json(const nlohmann::json& j, const std::string& where = "segmenter");
/// Parses and validates.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

/// Throws IoError if unreadable, ValidationError if malformed or invalid.
PipelineConfig read_pipeline_config(const std::filesystem::path& path);
void write_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace occlane
