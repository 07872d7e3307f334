#include "pipeline/config.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "common/error.hpp"
#include "common/hash.hpp"
#include "common/io.hpp"
#include "common/random.hpp"

namespace gbias::pipeline {

namespace {

using nlohmann::json;

void check_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) fail(ErrorCode::Validation, fmt::format("config: '{}' must be an object", where));
  for (const auto& [k, v] : obj.items())
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      fail(ErrorCode::Validation, fmt::format("config: unknown key '{}' in '{}'", k, where));
}

bool safe_name(const std::string& s) {
  return !s.empty() && s != "." && s != ".." &&
         std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isalnum(c) || c == '-' || c == '_' || c == '.'; });
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

fs::path required_input(const json& in, const char* key, const fs::path& base) {
  if (!in.contains(key) || !in[key].is_string())
    fail(ErrorCode::Validation, fmt::format("config: inputs.{} is required", key));
  auto p = resolve(base, in[key].get<std::string>());
  if (!fs::exists(p)) fail(ErrorCode::Validation, fmt::format("config: inputs.{} '{}' does not exist", key, p.string()));
  return p;
}

fs::path optional_input(const json& in, const char* key, const fs::path& base) {
  if (!in.contains(key) || in[key].is_null()) return {};
  auto p = resolve(base, in[key].get<std::string>());
  if (!fs::exists(p)) fail(ErrorCode::Validation, fmt::format("config: inputs.{} '{}' does not exist", key, p.string()));
  return p;
}

std::vector<profileanalysis::FeatureGroup> feature_list(const json& j, const char* where) {
  std::vector<profileanalysis::FeatureGroup> out;
  for (const auto& f : j) {
    auto g = profileanalysis::parse_feature_group(f.get<std::string>());
    if (!g) fail(ErrorCode::Validation, fmt::format("config: {}: unknown feature '{}'", where, f.get<std::string>()));
    if (std::find(out.begin(), out.end(), *g) != out.end())
      fail(ErrorCode::Validation, fmt::format("config: {}: feature '{}' listed twice", where, f.get<std::string>()));
    out.push_back(*g);
  }
  return out;
}

json feature_names(std::span<const profileanalysis::FeatureGroup> gs) {
  json out = json::array();
  for (auto g : gs) out.push_back(std::string(profileanalysis::to_string(g)));
  return out;
}

}  // namespace

Config parse_config(json j, const fs::path& base_dir, const Overrides& ov) {
  check_keys(j, "<root>",
             {"run_dir", "seed", "inputs", "names_mode", "backends", "chat_backends", "apx", "surface", "cluster",
              "generate", "analysis", "report", "score"});

  // Overrides are folded into the document so the run id reflects them.
  if (ov.seed) j["seed"] = *ov.seed;
  if (ov.run_dir) j["run_dir"] = *ov.run_dir;
  if (ov.alpha) j["surface"]["alpha"] = *ov.alpha;
  if (ov.apx_direction) j["apx"]["direction"] = *ov.apx_direction;
  if (ov.format) j["report"]["format"] = *ov.format;
  if (ov.dump_centroids) j["cluster"]["dump_centroids"] = *ov.dump_centroids;
  if (ov.normalize) j["cluster"]["normalize"] = *ov.normalize;

  Config c;
  c.base_dir = base_dir;
  try {
    if (!j.contains("seed") || !j["seed"].is_number_unsigned())
      fail(ErrorCode::Validation, "config: a non-negative integer 'seed' is required");
    c.seed = j["seed"].get<std::uint64_t>();
    if (!j.contains("run_dir")) fail(ErrorCode::Validation, "config: 'run_dir' is required");
    c.run_dir = resolve(base_dir, j["run_dir"].get<std::string>());

    const json in = j.value("inputs", json::object());
    check_keys(in, "inputs", {"names", "descriptors", "templates", "category_map", "embeddings", "name_labels"});
    c.inputs.names = required_input(in, "names", base_dir);
    c.inputs.descriptors = required_input(in, "descriptors", base_dir);
    c.inputs.templates = required_input(in, "templates", base_dir);
    c.inputs.category_map = optional_input(in, "category_map", base_dir);
    c.inputs.embeddings = optional_input(in, "embeddings", base_dir);
    c.inputs.name_labels = optional_input(in, "name_labels", base_dir);

    auto mode = j.value("names_mode", "strict");
    if (mode == "strict") c.names_mode = corpus::LoadMode::Strict;
    else if (mode == "lax") c.names_mode = corpus::LoadMode::Lax;
    else fail(ErrorCode::Validation, fmt::format("config: names_mode must be strict or lax, not '{}'", mode));

    const json backends = j.value("backends", json::object());
    for (const auto& [name, b] : backends.items()) {
      if (!safe_name(name)) fail(ErrorCode::Validation, fmt::format("config: backend name '{}' is not file-safe", name));
      json bj = b;
      if (bj.contains("path")) bj["path"] = resolve(base_dir, bj["path"].get<std::string>()).string();
      if (!bj.contains("seed")) bj["seed"] = c.seed;
      auto d = scoring::backend_from_json(name, bj);
      scoring::validate(d);
      c.backends.push_back(std::move(d));
    }
    const json chat_backends = j.value("chat_backends", json::object());
    for (const auto& [name, b] : chat_backends.items()) {
      if (!safe_name(name)) fail(ErrorCode::Validation, fmt::format("config: chat backend name '{}' is not file-safe", name));
      json bj = b;
      if (!bj.contains("seed")) bj["seed"] = c.seed;
      c.chat_backends.push_back(genharness::chat_backend_from_json(name, bj));
    }
    if (ov.backend) {
      auto keep = [&](const auto& d) { return d.name == *ov.backend; };
      std::erase_if(c.backends, [&](const auto& d) { return !keep(d); });
      std::erase_if(c.chat_backends, [&](const auto& d) { return !keep(d); });
      if (c.backends.empty() && c.chat_backends.empty())
        fail(ErrorCode::Validation, fmt::format("config: no backend named '{}'", *ov.backend));
    }

    const json apxj = j.value("apx", json::object());
    check_keys(apxj, "apx", {"direction"});
    auto dir = apx::parse_direction(apxj.value("direction", "as_printed"));
    if (!dir) fail(ErrorCode::Validation, "config: apx.direction must be as_printed or inverse");
    c.apx_direction = *dir;

    const json sj = j.value("surface", json::object());
    check_keys(sj, "surface", {"alpha", "method", "shuffles", "max_invalid_share"});
    c.surface.alpha = sj.value("alpha", 0.01);
    if (!(c.surface.alpha > 0.0 && c.surface.alpha < 0.5))
      fail(ErrorCode::Validation, "config: surface.alpha must lie in (0, 0.5)");
    auto method = sj.value("method", "zscore");
    if (method == "zscore") c.surface.method = evalstats::SurfaceMethod::ZScore;
    else if (method == "permutation") c.surface.method = evalstats::SurfaceMethod::Permutation;
    else fail(ErrorCode::Validation, "config: surface.method must be zscore or permutation");
    c.surface.shuffles = sj.value("shuffles", c.surface.shuffles);
    c.surface.max_invalid_share = sj.value("max_invalid_share", c.surface.max_invalid_share);
    c.surface.seed = derive_seed(c.seed, "surface");

    const json cj = j.value("cluster", json::object());
    check_keys(cj, "cluster",
               {"k", "batch_size", "iterations", "per_group", "min_agreement", "opposite_gender_fill", "normalize",
                "dump_centroids"});
    c.cluster.kmeans.k = cj.value("k", c.cluster.kmeans.k);
    c.cluster.kmeans.batch = cj.value("batch_size", c.cluster.kmeans.batch);
    c.cluster.kmeans.iters = cj.value("iterations", c.cluster.kmeans.iters);
    c.cluster.kmeans.seed = derive_seed(c.seed, "cluster");
    c.cluster.select.per_group = cj.value("per_group", c.cluster.select.per_group);
    c.cluster.select.min_agreement = cj.value("min_agreement", c.cluster.select.min_agreement);
    c.cluster.select.opposite_gender_fill = cj.value("opposite_gender_fill", std::vector<std::string>{});
    c.cluster.select.seed = derive_seed(c.seed, "select");
    c.cluster.normalize = cj.value("normalize", false);
    c.cluster.dump_centroids = cj.value("dump_centroids", false);

    const json gj = j.value("generate", json::object());
    check_keys(gj, "generate", {"repeats", "temperature", "batch_size"});
    c.generate.repeats = gj.value("repeats", 3);
    c.generate.temperature = gj.value("temperature", 1.0);
    c.generate.batch_size = gj.value("batch_size", std::size_t{10});
    if (c.generate.repeats < 1 || c.generate.batch_size < 1)
      fail(ErrorCode::Validation, "config: generate.repeats and generate.batch_size must be >= 1");

    const json aj = j.value("analysis", json::object());
    check_keys(aj, "analysis", {"train_fraction", "lambda", "epochs", "features", "tasks", "jsd_top_k", "jsd_features"});
    c.analysis.train_fraction = aj.value("train_fraction", 0.7);
    c.analysis.train.lambda = aj.value("lambda", 1e-4);
    c.analysis.train.epochs = aj.value("epochs", 20);
    c.analysis.train.seed = derive_seed(c.seed, "analysis");
    if (aj.contains("features")) c.analysis.features = feature_list(aj["features"], "analysis.features");
    else c.analysis.features.assign(profileanalysis::kAllFeatureGroups.begin(), profileanalysis::kAllFeatureGroups.end());
    if (aj.contains("tasks")) {
      for (const auto& t : aj["tasks"]) {
        auto name = t.get<std::string>();
        auto it = std::find_if(profileanalysis::kAllTasks.begin(), profileanalysis::kAllTasks.end(),
                               [&](auto task) { return profileanalysis::to_string(task) == name; });
        if (it == profileanalysis::kAllTasks.end()) fail(ErrorCode::Validation, fmt::format("config: unknown task '{}'", name));
        c.analysis.tasks.push_back(*it);
      }
    } else {
      c.analysis.tasks.assign(profileanalysis::kAllTasks.begin(), profileanalysis::kAllTasks.end());
    }
    c.analysis.jsd_top_k = aj.value("jsd_top_k", std::size_t{10});
    if (aj.contains("jsd_features")) c.analysis.jsd_features = feature_list(aj["jsd_features"], "analysis.jsd_features");
    else c.analysis.jsd_features = c.analysis.features;

    const json rj = j.value("report", json::object());
    check_keys(rj, "report", {"format", "sections"});
    c.report_format = rj.value("format", "all");
    if (c.report_format != "csv" && c.report_format != "json" && c.report_format != "all")
      fail(ErrorCode::Validation, fmt::format("config: unknown report format '{}' (csv, json or all)", c.report_format));
    c.report_sections = rj.value("sections", known_report_sections());
    for (const auto& s : c.report_sections)
      if (std::find(known_report_sections().begin(), known_report_sections().end(), s) == known_report_sections().end())
        fail(ErrorCode::Validation, fmt::format("config: unknown report section '{}'", s));

    const json scj = j.value("score", json::object());
    check_keys(scj, "score", {"chunk"});
    c.score_chunk = scj.value("chunk", c.score_chunk);
    if (c.score_chunk == 0) fail(ErrorCode::Validation, "config: score.chunk must be >= 1");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Validation, std::string("config: ") + e.what());
  }

  // The resolved form drops run_dir so relocated runs share an id.
  auto rel = [&](const fs::path& p) { return p.empty() ? json(nullptr) : json(p.lexically_relative(base_dir).generic_string()); };
  auto& r = c.resolved;
  r["seed"] = c.seed;
  r["inputs"] = {{"names", rel(c.inputs.names)},           {"descriptors", rel(c.inputs.descriptors)},
                 {"templates", rel(c.inputs.templates)},   {"category_map", rel(c.inputs.category_map)},
                 {"embeddings", rel(c.inputs.embeddings)}, {"name_labels", rel(c.inputs.name_labels)}};
  r["names_mode"] = c.names_mode == corpus::LoadMode::Strict ? "strict" : "lax";
  r["backends"] = j.value("backends", json::object());
  r["chat_backends"] = j.value("chat_backends", json::object());
  r["backend_filter"] = ov.backend ? json(*ov.backend) : json(nullptr);
  r["apx"] = {{"direction", apx::to_string(c.apx_direction)}};
  r["surface"] = {{"alpha", c.surface.alpha},
                  {"method", c.surface.method == evalstats::SurfaceMethod::ZScore ? "zscore" : "permutation"},
                  {"shuffles", c.surface.shuffles},
                  {"max_invalid_share", c.surface.max_invalid_share}};
  r["cluster"] = {{"k", c.cluster.kmeans.k},
                  {"batch_size", c.cluster.kmeans.batch},
                  {"iterations", c.cluster.kmeans.iters},
                  {"per_group", c.cluster.select.per_group},
                  {"min_agreement", c.cluster.select.min_agreement},
                  {"opposite_gender_fill", c.cluster.select.opposite_gender_fill},
                  {"normalize", c.cluster.normalize},
                  {"dump_centroids", c.cluster.dump_centroids}};
  r["generate"] = {{"repeats", c.generate.repeats},
                   {"temperature", c.generate.temperature},
                   {"batch_size", c.generate.batch_size}};
  json tasks = json::array();
  for (auto t : c.analysis.tasks) tasks.push_back(std::string(profileanalysis::to_string(t)));
  r["analysis"] = {{"train_fraction", c.analysis.train_fraction},
                   {"lambda", c.analysis.train.lambda},
                   {"epochs", c.analysis.train.epochs},
                   {"features", feature_names(c.analysis.features)},
                   {"tasks", tasks},
                   {"jsd_top_k", c.analysis.jsd_top_k},
                   {"jsd_features", feature_names(c.analysis.jsd_features)}};
  r["report"] = {{"format", c.report_format}, {"sections", c.report_sections}};
  r["score"] = {{"chunk", c.score_chunk}};
  c.run_id = hash_hex({r.dump()});
  return c;
}

Config load_config(const fs::path& path, const Overrides& overrides) {
  if (!fs::exists(path)) fail(ErrorCode::Io, fmt::format("config file '{}' does not exist", path.string()));
  auto text = read_text_file(path.string());
  auto j = nlohmann::json::parse(text, nullptr, false, /*ignore_comments=*/true);
  if (j.is_discarded()) fail(ErrorCode::Parse, fmt::format("config file '{}' is not valid JSON", path.string()));
  auto base = fs::absolute(path).parent_path();
  return parse_config(std::move(j), base, overrides);
}

}  // namespace gbias::pipeline
