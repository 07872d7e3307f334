#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "pipeline/config.hpp"

namespace gbias::pipeline {

inline constexpr const char* kManifestFile = "manifest.json";

const std::vector<std::string>& stage_names();

// Records the stage's counts in run_dir/manifest.json, keeping entries of
// other stages. Holds no timestamps or absolute paths, so two fresh runs of
// the same config write identical manifests.
void record_stage(const Config& c, const std::string& stage, const nlohmann::ordered_json& counts);

nlohmann::ordered_json read_manifest(const Config& c);

}  // namespace gbias::pipeline
