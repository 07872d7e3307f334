// Command-line front end. Talks to the toolkit only through the C API.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "globalbias/globalbias.h"

namespace {

struct Options {
  std::string config;
  std::optional<unsigned long long> seed;
  std::optional<std::string> backend;
  std::optional<double> alpha;
  std::optional<std::string> apx_direction;
  std::optional<std::string> run_dir;
  std::optional<std::string> format;
  bool dump_centroids = false;
  bool normalize = false;
  bool quiet = false;
};

int report_failure(gb_status s, const std::string& what) {
  std::cerr << "globalbias: " << what << ": " << gb_last_error() << " [" << gb_status_name(s) << "]\n";
  return static_cast<int>(s);
}

int run(const std::vector<std::string>& stages, const Options& o) {
  gb_context* ctx = nullptr;
  if (auto s = gb_context_create(o.config.c_str(), &ctx); s != GB_OK) return report_failure(s, "cannot load config");

  std::vector<std::pair<const char*, std::string>> overrides;
  if (o.seed) overrides.emplace_back("seed", std::to_string(*o.seed));
  if (o.backend) overrides.emplace_back("backend", *o.backend);
  if (o.alpha) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", *o.alpha);
    overrides.emplace_back("alpha", buf);
  }
  if (o.apx_direction) overrides.emplace_back("apx_direction", *o.apx_direction);
  if (o.run_dir) overrides.emplace_back("run_dir", *o.run_dir);
  if (o.format) overrides.emplace_back("format", *o.format);
  if (o.dump_centroids) overrides.emplace_back("dump_centroids", "true");
  if (o.normalize) overrides.emplace_back("normalize", "true");
  for (const auto& [k, v] : overrides) {
    if (auto s = gb_context_set_override(ctx, k, v.c_str()); s != GB_OK) {
      gb_context_destroy(ctx);
      return report_failure(s, std::string("bad --") + k);
    }
  }

  int rc = 0;
  for (const auto& stage : stages) {
    char* summary = nullptr;
    auto s = gb_context_run_stage(ctx, stage.c_str(), &summary);
    if (s != GB_OK) {
      rc = report_failure(s, "stage '" + stage + "' failed");
      break;
    }
    if (!o.quiet) std::cout << summary << "\n";
    gb_string_free(summary);
  }
  gb_context_destroy(ctx);
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GlobalBias: name-based demographic bias evaluation for language models"};
  app.set_version_flag("--version", std::string(gb_version()));
  app.require_subcommand(1);

  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Config file (JSON, comments allowed)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Override the master seed");
    sub->add_option("--backend", o.backend, "Only run the named backend");
    sub->add_option("--alpha", o.alpha, "Significance level for surfacing");
    sub->add_option("--apx-direction", o.apx_direction, "as_printed or inverse")
        ->check(CLI::IsMember({"as_printed", "inverse"}));
    sub->add_option("--run-dir", o.run_dir, "Override the run directory");
    sub->add_option("--format", o.format, "Report format: csv, json or all");
    sub->add_flag("--dump-centroids", o.dump_centroids, "Write cluster centroids (cluster stage)");
    sub->add_flag("--normalize", o.normalize, "L2-normalise embeddings before clustering");
    sub->add_flag("-q,--quiet", o.quiet, "Do not print stage summaries");
  };

  const std::vector<std::pair<std::string, std::string>> help = {
      {"expand", "Expand names x descriptors x templates into the sentence corpus"},
      {"cluster", "Cluster name embeddings and select names per group"},
      {"score", "Score corpus sentences with every configured backend"},
      {"apx", "Aggregate perplexities into PPL and APX bias-score tables"},
      {"validate", "Argmin accuracy and MRR on the gold-labelled validation subset"},
      {"surface", "Surface significantly associated (group, descriptor) pairs"},
      {"generate", "Collect character profiles from chat backends"},
      {"analyze", "Classify profiles by group and run feature elimination"},
      {"jsd", "Top JSD words per profile feature"},
      {"report", "Collect report tables"},
  };
  std::string chosen;
  for (std::size_t i = 0; i < gb_stage_count(); ++i) {
    std::string name = gb_stage_name(i);
    std::string desc;
    for (const auto& [n, d] : help)
      if (n == name) desc = d;
    auto* sub = app.add_subcommand(name, desc);
    add_common(sub);
    sub->callback([&chosen, name] { chosen = name; });
  }
  auto* all = app.add_subcommand("all", "Run expand, score, apx, validate, surface, generate, analyze, jsd and report");
  add_common(all);
  all->callback([&chosen] { chosen = "all"; });

  CLI11_PARSE(app, argc, argv);

  if (chosen == "all")
    return run({"expand", "score", "apx", "validate", "surface", "generate", "analyze", "jsd", "report"}, o);
  return run({chosen}, o);
}
