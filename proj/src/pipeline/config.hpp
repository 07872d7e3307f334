#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "apx/apx.hpp"
#include "corpus/corpus.hpp"
#include "evalstats/evalstats.hpp"
#include "genharness/chat_backend.hpp"
#include "genharness/generate.hpp"
#include "namecluster/namecluster.hpp"
#include "profileanalysis/profileanalysis.hpp"
#include "scoring/backend.hpp"

namespace gbias::pipeline {

namespace fs = std::filesystem;

struct Inputs {
  fs::path names;
  fs::path descriptors;
  fs::path templates;
  fs::path category_map;  // optional
  fs::path embeddings;    // optional, cluster stage
  fs::path name_labels;   // optional, cluster stage
};

struct ClusterConfig {
  namecluster::KMeansOptions kmeans;
  namecluster::SelectOptions select;
  bool normalize = false;
  bool dump_centroids = false;
};

struct AnalysisConfig {
  double train_fraction = 0.7;
  profileanalysis::TrainOptions train;
  std::vector<profileanalysis::FeatureGroup> features;
  std::vector<profileanalysis::Task> tasks;
  std::size_t jsd_top_k = 10;
  std::vector<profileanalysis::FeatureGroup> jsd_features;
};

struct Config {
  fs::path base_dir;
  fs::path run_dir;
  std::uint64_t seed = 0;
  Inputs inputs;
  corpus::LoadMode names_mode = corpus::LoadMode::Strict;
  std::vector<scoring::BackendDescriptor> backends;             // sorted by name
  std::vector<genharness::ChatBackendDescriptor> chat_backends;  // sorted by name
  apx::Direction apx_direction = apx::Direction::AsPrinted;
  evalstats::SurfaceOptions surface;
  ClusterConfig cluster;
  genharness::GenerateOptions generate;
  AnalysisConfig analysis;
  std::string report_format = "all";
  std::vector<std::string> report_sections;
  std::size_t score_chunk = 4096;

  // Every knob after defaults and overrides, paths relative to base_dir.
  // Hashing it gives the run id.
  nlohmann::ordered_json resolved;
  std::string run_id;
};

// Command-line overrides; unset members leave the file's value alone.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> backend;  // keep only this backend (scoring or chat)
  std::optional<double> alpha;
  std::optional<std::string> apx_direction;
  std::optional<std::string> run_dir;
  std::optional<std::string> format;
  std::optional<bool> dump_centroids;
  std::optional<bool> normalize;
};

inline const std::vector<std::string>& known_report_sections() {
  static const std::vector<std::string> s = {"validation", "surfacing", "accuracy", "elimination", "jsd"};
  return s;
}

// The file is JSON; // and /* */ comments are allowed. Relative paths are
// resolved against the file's directory.
Config load_config(const fs::path& path, const Overrides& overrides = {});
Config parse_config(nlohmann::json j, const fs::path& base_dir, const Overrides& overrides = {});

}  // namespace gbias::pipeline
