#include "pipeline/stages.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "common/csv.hpp"
#include "common/error.hpp"
#include "common/io.hpp"
#include "pipeline/manifest.hpp"
#include "pipeline/tables.hpp"
#include "scoring/cache.hpp"
#include "scoring/score_corpus.hpp"

namespace gbias::pipeline {

namespace {

using nlohmann::ordered_json;
namespace pa = profileanalysis;

constexpr const char* kCorpus = "corpus.jsonl";
constexpr const char* kValidationCorpus = "validation_corpus.jsonl";

std::string scores_file(const std::string& backend, bool validation) {
  return fmt::format("scores/{}{}.jsonl", backend, validation ? ".validation" : "");
}

fs::path require(const Config& c, const std::string& rel, const std::string& stage) {
  auto p = c.run_dir / rel;
  if (!fs::exists(p))
    fail(ErrorCode::MissingArtifact,
         fmt::format("missing artifact '{}' in run directory '{}'; run the '{}' stage first", rel, c.run_dir.string(),
                     stage));
  return p;
}

class Artifacts {
 public:
  Artifacts(const Config& c, StageResult& r) : c_(c), r_(r) {}

  void write(const std::string& rel, std::string_view content) {
    auto p = c_.run_dir / rel;
    fs::create_directories(p.parent_path());
    write_file_atomic(p, content);
    r_.artifacts.push_back(rel);
  }

  AtomicFileWriter open(const std::string& rel) {
    auto p = c_.run_dir / rel;
    fs::create_directories(p.parent_path());
    r_.artifacts.push_back(rel);
    return AtomicFileWriter(p);
  }

 private:
  const Config& c_;
  StageResult& r_;
};

struct Inputs {
  corpus::NameSet names;
  std::vector<corpus::Descriptor> descriptors;
  std::vector<corpus::Template> templates;
};

Inputs load_inputs(const Config& c) {
  return {corpus::load_names(c.inputs.names.string(), c.names_mode),
          corpus::load_descriptors(c.inputs.descriptors.string()), corpus::load_templates(c.inputs.templates.string())};
}

corpus::ValidationSubset load_validation(const Config& c, const Inputs& in, const std::string& stage) {
  if (c.inputs.category_map.empty())
    fail(ErrorCode::Validation, fmt::format("the '{}' stage needs inputs.category_map in the config", stage));
  return corpus::validation_subset(in.names, in.descriptors, corpus::load_category_map(c.inputs.category_map.string()));
}

// ---- expand ----

std::size_t write_corpus(Artifacts& a, const std::string& rel, const corpus::NameSet& names,
                         std::span<const corpus::Descriptor> descriptors, std::span<const corpus::Template> templates) {
  auto w = a.open(rel);
  auto n = corpus::expand_sentences(names, descriptors, templates,
                                    [&](const corpus::Sentence& s) { w.write_line(corpus::to_jsonl(s)); });
  w.commit();
  return n;
}

void stage_expand(const Config& c, StageResult& r) {
  Artifacts a(c, r);
  auto in = load_inputs(c);
  for (const auto& w : in.names.warnings) r.warnings.push_back(w);
  auto n = write_corpus(a, kCorpus, in.names, in.descriptors, in.templates);
  auto& k = r.counts;
  k["names"] = in.names.names.size();
  k["names_rejected"] = in.names.rejected.size();
  k["groups"] = in.names.groups.size();
  k["ethnicities"] = in.names.ethnicity_count();
  k["descriptors"] = in.descriptors.size();
  k["templates"] = in.templates.size();
  k["sentences"] = n;
  if (!c.inputs.category_map.empty()) {
    auto sub = load_validation(c, in, "expand");
    auto vn = write_corpus(a, kValidationCorpus, sub.names, sub.descriptors, in.templates);
    k["validation_names"] = sub.names.names.size();
    k["validation_descriptors"] = sub.descriptors.size();
    k["validation_categories"] = sub.categories.categories.size();
    k["validation_sentences"] = vn;
  } else if (fs::exists(c.run_dir / kValidationCorpus)) {
    fs::remove(c.run_dir / kValidationCorpus);
  }
}

// ---- cluster ----

void stage_cluster(const Config& c, StageResult& r) {
  if (c.inputs.embeddings.empty() || c.inputs.name_labels.empty())
    fail(ErrorCode::Validation, "the 'cluster' stage needs inputs.embeddings and inputs.name_labels in the config");
  Artifacts a(c, r);
  auto set = namecluster::load_embeddings(c.inputs.embeddings.string());
  if (c.cluster.normalize) namecluster::normalize_rows(set);
  auto labels = namecluster::load_name_labels(c.inputs.name_labels.string());
  auto km = namecluster::minibatch_kmeans(set, c.cluster.kmeans);
  namecluster::attach_labels(km.clusters, labels);
  auto sel = namecluster::select_group_names(km.clusters, labels, c.cluster.select);

  ordered_json rep;
  rep["names"] = set.names.size();
  rep["dimension"] = set.dim;
  rep["k"] = c.cluster.kmeans.k;
  rep["init_inertia"] = km.init_inertia;
  rep["inertia"] = km.inertia;
  rep["reseeded"] = km.reseeded;
  ordered_json clusters = ordered_json::array();
  for (std::size_t i = 0; i < km.clusters.size(); ++i) {
    const auto& cl = km.clusters[i];
    clusters.push_back({{"index", i},
                        {"size", cl.members.size()},
                        {"modal_label", cl.modal_label},
                        {"agreement", cl.agreement},
                        {"members", cl.members}});
  }
  rep["clusters"] = clusters;
  ordered_json groups = ordered_json::array();
  for (const auto& g : sel.groups)
    groups.push_back({{"group", g.group},
                      {"from_clusters", g.from_clusters},
                      {"from_fill", g.from_fill},
                      {"qualifying", g.qualifying}});
  rep["selection"] = {{"groups", groups}, {"shortfalls", sel.shortfalls}};
  a.write("cluster/report.json", rep.dump(2) + "\n");

  std::string names_csv = "name,ethnicity,gender\n";
  for (const auto& n : sel.names)
    names_csv += csv::join({n.given_name, n.ethnicity, std::string(corpus::to_string(n.gender))}) + "\n";
  a.write("cluster/selected_names.csv", names_csv);

  if (c.cluster.dump_centroids) {
    std::string cen;
    for (const auto& cl : km.clusters) {
      std::vector<std::string> row;
      for (double v : cl.centroid) row.push_back(format_double(v));
      cen += csv::join(row) + "\n";
    }
    a.write("cluster/centroids.csv", cen);
  }
  for (const auto& s : sel.shortfalls) r.warnings.push_back("selection shortfall: " + s);
  r.counts["names"] = set.names.size();
  r.counts["clusters"] = km.clusters.size();
  r.counts["selected_names"] = sel.names.size();
  r.counts["shortfalls"] = sel.shortfalls.size();
}

// ---- score ----

ordered_json score_file(scoring::Backend& b, scoring::ScoreCache& cache, const scoring::ScoreOptions& opt,
                        const fs::path& in, AtomicFileWriter& w, std::size_t chunk) {
  std::ifstream f(in, std::ios::binary);
  if (!f) fail(ErrorCode::Io, fmt::format("cannot read '{}'", in.string()));
  scoring::ScoreStats st;
  std::vector<corpus::Sentence> buf;
  std::size_t total = 0;
  auto flush = [&] {
    for (const auto& o : scoring::score_corpus(b, buf, cache, opt, &st)) {
      if (o.scored) {
        w.write_line(scoring::to_json(*o.scored).dump());
      } else {
        ordered_json j;
        j["sentence_id"] = o.sentence_id;
        j["error"] = o.error;
        w.write_line(j.dump());
      }
    }
    buf.clear();
  };
  for (std::string line; std::getline(f, line);) {
    if (line.empty()) continue;
    buf.push_back(corpus::sentence_from_json_line(line));
    ++total;
    if (buf.size() >= chunk) flush();
  }
  if (!buf.empty()) flush();
  w.commit();
  return {{"sentences", total}, {"scored", st.scored}, {"cached", st.cached}, {"failed", st.failed}};
}

void stage_score(const Config& c, StageResult& r) {
  auto corpus_path = require(c, kCorpus, "expand");
  bool with_validation = fs::exists(c.run_dir / kValidationCorpus);
  if (c.backends.empty()) fail(ErrorCode::Validation, "the 'score' stage needs at least one entry in 'backends'");
  Artifacts a(c, r);
  for (const auto& d : c.backends) {
    auto backend = scoring::make_backend(d);
    scoring::ScoreCache cache((c.run_dir / "cache" / (d.name + ".scores.jsonl")).string());
    auto opt = scoring::options_for(d);
    ordered_json k;
    k["model_id"] = backend->model_id();
    k["mode"] = scoring::to_string(backend->mode());
    {
      auto w = a.open(scores_file(d.name, false));
      k["corpus"] = score_file(*backend, cache, opt, corpus_path, w, c.score_chunk);
    }
    if (with_validation) {
      auto w = a.open(scores_file(d.name, true));
      k["validation"] = score_file(*backend, cache, opt, c.run_dir / kValidationCorpus, w, c.score_chunk);
    }
    k["backend_calls"] = backend->calls();
    if (k["corpus"]["failed"].get<std::size_t>() > 0)
      r.warnings.push_back(fmt::format("backend '{}': {} sentences failed", d.name, k["corpus"]["failed"].get<std::size_t>()));
    r.counts[d.name] = k;
  }
}

// ---- apx ----

struct ScoreRead {
  std::vector<apx::NameScore> scores;
  std::size_t failed = 0;
};

ScoreRead read_name_scores(const fs::path& corpus_path, const fs::path& scores_path, const corpus::NameSet& names,
                           std::span<const corpus::Descriptor> descriptors, std::size_t templates) {
  std::unordered_map<std::string, std::size_t> desc_index;
  for (std::size_t j = 0; j < descriptors.size(); ++j) desc_index.emplace(descriptors[j].text, j);

  std::ifstream cf(corpus_path, std::ios::binary), sf(scores_path, std::ios::binary);
  if (!cf || !sf) fail(ErrorCode::Io, fmt::format("cannot read '{}' or '{}'", corpus_path.string(), scores_path.string()));
  ScoreRead out;
  std::string cl, sl;
  auto next = [](std::ifstream& f, std::string& l) {
    while (std::getline(f, l))
      if (!l.empty()) return true;
    return false;
  };
  auto stale = [&](std::string_view why) {
    fail(ErrorCode::Validation,
         fmt::format("'{}' does not match '{}' ({}); rerun the 'score' stage", scores_path.filename().string(),
                     corpus_path.filename().string(), why));
  };
  while (true) {
    bool hc = next(cf, cl), hs = next(sf, sl);
    if (!hc && !hs) break;
    if (hc != hs) stale("different lengths");
    auto s = corpus::sentence_from_json_line(cl);
    auto j = nlohmann::json::parse(sl, nullptr, false);
    if (j.is_discarded() || !j.contains("sentence_id")) stale("unreadable record");
    if (j["sentence_id"].get<std::string>() != s.id) stale("sentence ids out of step");
    auto g = names.find_group(s.name.ethnicity, s.name.gender);
    auto d = desc_index.find(s.descriptor);
    if (!g || d == desc_index.end() || s.template_id < 0 || static_cast<std::size_t>(s.template_id) >= templates)
      fail(ErrorCode::Validation,
           fmt::format("'{}' does not match the configured inputs; rerun the 'expand' stage", corpus_path.filename().string()));
    apx::NameScore ns{static_cast<std::size_t>(*g), d->second, static_cast<std::size_t>(s.template_id), std::nullopt};
    if (j.contains("error")) ++out.failed;
    else ns.ppl = scoring::scored_from_json(j).ppl;
    out.scores.push_back(ns);
  }
  return out;
}

std::vector<std::string> group_labels(const corpus::NameSet& names) {
  std::vector<std::string> out;
  for (const auto& g : names.groups) out.push_back(g.label());
  return out;
}

std::vector<std::string> descriptor_labels(std::span<const corpus::Descriptor> ds) {
  std::vector<std::string> out;
  for (const auto& d : ds) out.push_back(d.text);
  return out;
}

std::size_t invalid_cells(const apx::BiasScoreTable& t) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < t.groups.size(); ++i)
    for (std::size_t j = 0; j < t.descriptors.size(); ++j)
      if (!t.valid(i, j)) ++n;
  return n;
}

void stage_apx(const Config& c, StageResult& r) {
  auto corpus_path = require(c, kCorpus, "expand");
  Artifacts a(c, r);
  auto in = load_inputs(c);
  for (const auto& d : c.backends) {
    auto sp = require(c, scores_file(d.name, false), "score");
    auto read = read_name_scores(corpus_path, sp, in.names, in.descriptors, in.templates.size());
    auto cells = apx::aggregate_cells(read.scores, in.templates.size(), in.names.groups.size(), in.descriptors.size());
    auto gl = group_labels(in.names);
    auto dl = descriptor_labels(in.descriptors);
    auto apx_t = apx::bias_scores(cells, gl, dl, apx::Metric::Apx, c.apx_direction);
    auto ppl_t = apx::bias_scores(cells, gl, dl, apx::Metric::Ppl, c.apx_direction);
    a.write(fmt::format("bias/{}.apx.csv", d.name), apx::to_csv(apx_t));
    a.write(fmt::format("bias/{}.apx.json", d.name), apx::to_json(apx_t).dump(2) + "\n");
    a.write(fmt::format("bias/{}.ppl.csv", d.name), apx::to_csv(ppl_t));
    a.write(fmt::format("bias/{}.ppl.json", d.name), apx::to_json(ppl_t).dump(2) + "\n");
    r.counts[d.name] = {{"sentences", read.scores.size()},
                        {"failed_sentences", read.failed},
                        {"groups", gl.size()},
                        {"descriptors", dl.size()},
                        {"invalid_cells", invalid_cells(apx_t)}};
  }
}

// ---- validate ----

ordered_json report_json(const evalstats::ValidationReport& v) {
  return {{"accuracy_ppl", v.accuracy_ppl}, {"accuracy_apx", v.accuracy_apx}, {"mrr_ppl", v.mrr_ppl},
          {"mrr_apx", v.mrr_apx},           {"descriptors", v.descriptors},   {"candidates", v.candidates}};
}

void stage_validate(const Config& c, StageResult& r) {
  auto in = load_inputs(c);
  auto sub = load_validation(c, in, "validate");
  auto vc = require(c, kValidationCorpus, "expand");
  Artifacts a(c, r);
  std::vector<evalstats::GoldLabel> gold;
  for (const auto& d : sub.descriptors) gold.push_back({d.text, *d.gold_group});

  std::vector<ModelValidation> rows;
  ordered_json all = ordered_json::object();
  for (const auto& d : c.backends) {
    auto sp = require(c, scores_file(d.name, true), "score");
    auto read = read_name_scores(vc, sp, sub.names, sub.descriptors, in.templates.size());
    auto cells = apx::aggregate_cells(read.scores, in.templates.size(), sub.names.groups.size(), sub.descriptors.size());
    auto gl = group_labels(sub.names);
    auto dl = descriptor_labels(sub.descriptors);
    auto cat = [&](apx::Metric m, apx::Direction dir) {
      return evalstats::category_level(apx::bias_scores(cells, gl, dl, m, dir), sub.categories);
    };
    auto ppl = cat(apx::Metric::Ppl, c.apx_direction);
    auto configured = evalstats::validate(ppl, cat(apx::Metric::Apx, c.apx_direction), gold);
    auto other_dir = c.apx_direction == apx::Direction::AsPrinted ? apx::Direction::Inverse : apx::Direction::AsPrinted;
    auto other = evalstats::validate(ppl, cat(apx::Metric::Apx, other_dir), gold);
    rows.push_back({d.name, configured});

    ordered_json m;
    m["model_id"] = d.model_id;
    m["apx_direction"] = apx::to_string(c.apx_direction);
    m["configured"] = report_json(configured);
    m["other_direction"] = {{"apx_direction", apx::to_string(other_dir)},
                            {"accuracy_apx", other.accuracy_apx},
                            {"mrr_apx", other.mrr_apx}};
    m["failed_sentences"] = read.failed;
    all[d.name] = m;
    r.counts[d.name] = {{"descriptors", configured.descriptors},
                        {"candidates", configured.candidates},
                        {"failed_sentences", read.failed}};
  }
  a.write("validation.csv", validation_table_csv(rows));
  a.write("validation.json", all.dump(2) + "\n");
}

// ---- surface ----

void stage_surface(const Config& c, StageResult& r) {
  Artifacts a(c, r);
  for (const auto& d : c.backends) {
    auto p = require(c, fmt::format("bias/{}.apx.json", d.name), "apx");
    auto table = apx::bias_table_from_json(nlohmann::json::parse(read_text_file(p.string())));
    auto res = evalstats::surface_stereotypes(table, c.surface);
    a.write(fmt::format("surfaced/{}.csv", d.name), evalstats::surfaced_csv(res));
    a.write(fmt::format("surfaced/{}.by_group.csv", d.name), evalstats::surfaced_by_group_csv(res));
    r.counts[d.name] = {{"surfaced", res.items.size()},
                        {"excluded_descriptors", res.excluded.size()},
                        {"threshold", res.threshold},
                        {"sigma", res.sigma}};
  }
}

// ---- generate ----

void stage_generate(const Config& c, StageResult& r) {
  if (c.chat_backends.empty()) fail(ErrorCode::Validation, "the 'generate' stage needs at least one entry in 'chat_backends'");
  Artifacts a(c, r);
  auto names = corpus::load_names(c.inputs.names.string(), c.names_mode);

  std::vector<corpus::NameEntry> ordered;
  for (const auto& g : names.groups)
    for (auto i : names.members(g.id)) ordered.push_back(names.names[i]);
  std::vector<std::string> given;
  std::map<std::string, std::string> group_of_name;
  for (const auto& n : ordered) {
    given.push_back(n.given_name);
    group_of_name.emplace(n.given_name, corpus::Group{n.ethnicity, n.gender, 0}.label());
  }

  for (const auto& d : c.chat_backends) {
    auto backend = genharness::make_chat_backend(d, group_of_name);
    genharness::GenerationCache cache((c.run_dir / "cache" / (d.name + ".chat.jsonl")).string());
    auto opt = genharness::options_for(d);
    opt.repeats = c.generate.repeats;
    opt.temperature = c.generate.temperature;
    opt.batch_size = c.generate.batch_size;
    genharness::GenerationStats st;
    auto records = genharness::generate_profiles(*backend, given, cache, opt, &st);

    auto raw = a.open(fmt::format("raw/{}.jsonl", d.name));
    auto prof = a.open(fmt::format("profiles/{}.jsonl", d.name));
    for (const auto& rec : records) {
      ordered_json rj;
      rj["batch"] = rec.batch;
      rj["repeat"] = rec.repeat;
      rj["names"] = rec.names;
      rj["prompt_hash"] = rec.prompt_hash;
      rj["raw"] = rec.raw ? ordered_json(*rec.raw) : ordered_json(nullptr);
      rj["error"] = rec.error;
      rj["diagnostics"] = rec.diagnostics;
      raw.write_line(rj.dump());

      const std::size_t first = rec.batch * opt.batch_size;
      for (const auto& p : rec.profiles) {
        auto line = genharness::to_store_record(p);
        auto pos = std::find(rec.names.begin(), rec.names.end(), p.name);
        if (pos != rec.names.end()) {
          const auto& entry = ordered[first + static_cast<std::size_t>(pos - rec.names.begin())];
          line["ethnicity"] = entry.ethnicity;
          line["gender"] = corpus::to_string(entry.gender);
        } else {
          line["ethnicity"] = nullptr;
          line["gender"] = nullptr;
        }
        prof.write_line(line.dump());
      }
    }
    raw.commit();
    prof.commit();

    if (st.alarm())
      r.warnings.push_back(fmt::format("chat backend '{}': {:.1f}% of profiles are malformed (alarm above 5%)", d.name,
                                       100.0 * st.malformed_share()));
    r.counts[d.name] = {{"model_id", d.model_id},
                        {"names", given.size()},
                        {"requested_pairs", given.size() * static_cast<std::size_t>(opt.repeats)},
                        {"prompts", records.size()},
                        {"requests", st.requests},
                        {"cached", st.cached},
                        {"failed", st.failed},
                        {"unparsed", st.unparsed},
                        {"profiles", st.profiles},
                        {"malformed", st.malformed},
                        {"missing", st.missing},
                        {"malformed_share", st.malformed_share()},
                        {"malformed_alarm", st.alarm()},
                        {"backend_calls", backend->calls()}};
  }
}

// ---- analyze / jsd ----

struct LoadedProfiles {
  std::vector<pa::LabeledProfile> usable;
  std::size_t total = 0;
  std::size_t malformed = 0;
  std::size_t unlabeled = 0;
};

LoadedProfiles load_profiles(const Config& c, const std::string& backend, const std::string& stage) {
  auto p = require(c, fmt::format("profiles/{}.jsonl", backend), "generate");
  (void)stage;
  LoadedProfiles out;
  for_each_jsonl(p.string(), [&](const nlohmann::json& j, std::size_t) {
    ++out.total;
    auto prof = genharness::from_store_record(j);
    if (!prof.valid()) {
      ++out.malformed;
      return;
    }
    if (!j.contains("ethnicity") || j["ethnicity"].is_null()) {
      ++out.unlabeled;
      return;
    }
    pa::LabeledProfile lp;
    lp.profile = std::move(prof);
    lp.ethnicity = j["ethnicity"].get<std::string>();
    lp.gender = *corpus::parse_gender(j["gender"].get<std::string>());
    out.usable.push_back(std::move(lp));
  });
  return out;
}

void stage_analyze(const Config& c, StageResult& r) {
  if (c.chat_backends.empty()) fail(ErrorCode::Validation, "the 'analyze' stage needs at least one entry in 'chat_backends'");
  Artifacts a(c, r);
  pa::ExperimentOptions opt;
  opt.train_fraction = c.analysis.train_fraction;
  opt.seed = c.analysis.train.seed;
  opt.train = c.analysis.train;

  std::vector<ModelAccuracy> acc;
  std::vector<ModelElimination> elim;
  std::vector<std::set<std::string>> labels(c.analysis.tasks.size());
  ordered_json details = ordered_json::object();
  for (const auto& d : c.chat_backends) {
    auto loaded = load_profiles(c, d.name, "analyze");
    for (const auto& lp : loaded.usable)
      for (std::size_t t = 0; t < c.analysis.tasks.size(); ++t) labels[t].insert(pa::label_for(lp, c.analysis.tasks[t]));
    auto rep = pa::feature_elimination(loaded.usable, c.analysis.features, c.analysis.tasks, opt);
    acc.push_back({d.name, rep.baseline_accuracy});

    ordered_json m;
    m["profiles"] = loaded.total;
    m["used"] = loaded.usable.size();
    m["excluded_malformed"] = loaded.malformed;
    m["excluded_unlabeled"] = loaded.unlabeled;
    m["test_size"] = rep.test_size;
    ordered_json tasks = ordered_json::object();
    for (std::size_t t = 0; t < rep.tasks.size(); ++t) {
      ordered_json rows = ordered_json::object();
      for (const auto& row : rep.rows)
        rows[std::string(pa::to_string(row.removed))] = {{"correct", row.correct[t]}, {"delta_points", row.delta_points[t]}};
      tasks[std::string(pa::to_string(rep.tasks[t]))] = {{"accuracy", rep.baseline_accuracy[t]},
                                                          {"correct", rep.baseline_correct[t]},
                                                          {"elimination", rows}};
    }
    m["tasks"] = tasks;
    details[d.name] = m;
    r.counts[d.name] = {{"profiles", loaded.total}, {"used", loaded.usable.size()}, {"test_size", rep.test_size}};
    elim.push_back({d.name, std::move(rep)});
  }

  std::vector<double> chance;
  for (const auto& l : labels) chance.push_back(l.empty() ? 0.0 : 1.0 / static_cast<double>(l.size()));
  a.write("analysis/accuracy.csv", accuracy_table_csv(c.analysis.tasks, chance, acc));
  for (std::size_t t = 0; t < c.analysis.tasks.size(); ++t)
    a.write(fmt::format("analysis/elimination_{}.csv", pa::to_string(c.analysis.tasks[t])), elimination_table_csv(t, elim));
  a.write("analysis/analysis.json", details.dump(2) + "\n");
}

void stage_jsd(const Config& c, StageResult& r) {
  if (c.chat_backends.empty()) fail(ErrorCode::Validation, "the 'jsd' stage needs at least one entry in 'chat_backends'");
  Artifacts a(c, r);
  std::vector<ModelJsd> models;
  for (const auto& d : c.chat_backends) {
    auto loaded = load_profiles(c, d.name, "jsd");
    ModelJsd m{d.name, {}};
    for (auto f : c.analysis.jsd_features) {
      try {
        auto top = pa::jsd_top_words(loaded.usable, f, c.analysis.jsd_top_k);
        m.entries.insert(m.entries.end(), top.begin(), top.end());
      } catch (const Error& e) {
        if (e.code() != ErrorCode::Validation) throw;
        r.warnings.push_back(fmt::format("{}: {}", d.name, e.what()));
      }
    }
    r.counts[d.name] = {{"profiles", loaded.usable.size()}, {"words", m.entries.size()}};
    models.push_back(std::move(m));
  }
  a.write("jsd/jsd.csv", jsd_table_csv(models));
}

// ---- report ----

ordered_json csv_to_json(const std::string& text) {
  auto rows = csv::parse(text);
  ordered_json out = ordered_json::array();
  if (rows.empty()) return out;
  const auto& header = rows.front().fields;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    ordered_json o;
    for (std::size_t k = 0; k < header.size() && k < rows[i].fields.size(); ++k) o[header[k]] = rows[i].fields[k];
    out.push_back(std::move(o));
  }
  return out;
}

void stage_report(const Config& c, StageResult& r) {
  if (c.report_format != "csv" && c.report_format != "json" && c.report_format != "all")
    fail(ErrorCode::InvalidArgument, fmt::format("unknown report format '{}'", c.report_format));
  // Every input is checked before anything is written.
  std::vector<std::pair<std::string, fs::path>> files;  // report name, source
  for (const auto& s : c.report_sections) {
    if (s == "validation") {
      files.emplace_back("validation.csv", require(c, "validation.csv", "validate"));
    } else if (s == "surfacing") {
      for (const auto& d : c.backends)
        files.emplace_back(fmt::format("surfaced_{}.csv", d.name),
                           require(c, fmt::format("surfaced/{}.by_group.csv", d.name), "surface"));
    } else if (s == "accuracy") {
      files.emplace_back("accuracy.csv", require(c, "analysis/accuracy.csv", "analyze"));
    } else if (s == "elimination") {
      for (auto t : c.analysis.tasks) {
        auto rel = fmt::format("analysis/elimination_{}.csv", pa::to_string(t));
        files.emplace_back(fmt::format("elimination_{}.csv", pa::to_string(t)), require(c, rel, "analyze"));
      }
    } else if (s == "jsd") {
      files.emplace_back("jsd.csv", require(c, "jsd/jsd.csv", "jsd"));
    }
  }
  Artifacts a(c, r);
  ordered_json doc;
  doc["run_id"] = c.run_id;
  ordered_json tables = ordered_json::object();
  for (const auto& [name, src] : files) {
    auto text = read_text_file(src.string());
    if (c.report_format != "json") a.write("report/" + name, text);
    tables[fs::path(name).stem().string()] = csv_to_json(text);
  }
  doc["tables"] = tables;
  if (c.report_format != "csv") a.write("report/report.json", doc.dump(2) + "\n");
  r.counts["tables"] = files.size();
  r.counts["format"] = c.report_format;
}

}  // namespace

StageResult run_stage(const std::string& stage, const Config& c) {
  StageResult r;
  r.stage = stage;
  r.counts = ordered_json::object();
  fs::create_directories(c.run_dir);
  if (stage == "expand") stage_expand(c, r);
  else if (stage == "cluster") stage_cluster(c, r);
  else if (stage == "score") stage_score(c, r);
  else if (stage == "apx") stage_apx(c, r);
  else if (stage == "validate") stage_validate(c, r);
  else if (stage == "surface") stage_surface(c, r);
  else if (stage == "generate") stage_generate(c, r);
  else if (stage == "analyze") stage_analyze(c, r);
  else if (stage == "jsd") stage_jsd(c, r);
  else if (stage == "report") stage_report(c, r);
  else fail(ErrorCode::InvalidArgument, fmt::format("unknown stage '{}'", stage));
  if (!r.warnings.empty()) r.counts["warnings"] = r.warnings;
  record_stage(c, stage, r.counts);
  return r;
}

}  // namespace gbias::pipeline
