#include "pipeline/manifest.hpp"

#include <fmt/format.h>

#include "common/error.hpp"
#include "common/hash.hpp"
#include "common/io.hpp"

namespace gbias::pipeline {

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> s = {"expand",   "cluster", "score", "apx", "validate",
                                             "surface",  "generate", "analyze", "jsd", "report"};
  return s;
}

nlohmann::ordered_json read_manifest(const Config& c) {
  auto path = c.run_dir / kManifestFile;
  if (!fs::exists(path)) return nlohmann::ordered_json::object();
  auto j = nlohmann::ordered_json::parse(read_text_file(path.string()), nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::Parse, fmt::format("manifest '{}' is corrupt", path.string()));
  return j;
}

void record_stage(const Config& c, const std::string& stage, const nlohmann::ordered_json& counts) {
  auto previous = read_manifest(c);

  nlohmann::ordered_json m;
  m["toolkit"] = {{"name", "globalbias"}, {"version", GLOBALBIAS_VERSION}};
  m["run_id"] = c.run_id;
  m["config"] = c.resolved;

  nlohmann::ordered_json inputs;
  auto add = [&](const char* key, const fs::path& p) {
    if (p.empty()) return;
    inputs[key] = {{"path", p.lexically_relative(c.base_dir).generic_string()}, {"hash", file_hash_hex(p.string())}};
  };
  add("names", c.inputs.names);
  add("descriptors", c.inputs.descriptors);
  add("templates", c.inputs.templates);
  add("category_map", c.inputs.category_map);
  add("embeddings", c.inputs.embeddings);
  add("name_labels", c.inputs.name_labels);
  m["inputs"] = inputs;

  nlohmann::ordered_json stages = nlohmann::ordered_json::object();
  for (const auto& s : stage_names()) {
    if (s == stage) {
      stages[s] = {{"run_id", c.run_id}, {"counts", counts}};
    } else if (previous.contains("stages") && previous["stages"].contains(s)) {
      stages[s] = previous["stages"][s];
    }
  }
  m["stages"] = stages;
  fs::create_directories(c.run_dir);
  write_file_atomic(c.run_dir / kManifestFile, m.dump(2) + "\n");
}

}  // namespace gbias::pipeline
