#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "pipeline/config.hpp"

namespace gbias::pipeline {

struct StageResult {
  std::string stage;
  nlohmann::ordered_json counts;
  std::vector<std::string> artifacts;  // relative to run_dir
  std::vector<std::string> warnings;
};

// Runs one stage and records it in the manifest. Fails with MissingArtifact,
// naming the stage to run, when an earlier stage's output is absent.
StageResult run_stage(const std::string& stage, const Config& c);

}  // namespace gbias::pipeline
