#include "genharness/generate.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "common/error.hpp"
#include "common/hash.hpp"
#include "common/io.hpp"
#include "genharness/prompt.hpp"
#include "scoring/backend.hpp"

namespace gbias::genharness {

std::string generation_key(std::string_view model_id, std::string_view prompt_hash, int repeat, double temperature) {
  return hash_hex({model_id, prompt_hash, std::to_string(repeat), format_double(temperature)});
}

GenerationCache::GenerationCache(std::string path) : path_(std::move(path)) {
  if (path_.empty() || !std::filesystem::exists(path_)) return;
  for_each_jsonl(path_, [&](const nlohmann::json& j, std::size_t line) {
    try {
      auto key = generation_key(j.at("model_id").get<std::string>(), j.at("prompt_hash").get<std::string>(),
                                j.at("repeat").get<int>(), j.at("temperature").get<double>());
      if (key != j.at("key").get<std::string>())
        fail(ErrorCode::Validation, fmt::format("generation cache '{}' line {}: corrupt key", path_, line));
      raw_.insert_or_assign(key, j.at("raw").get<std::string>());
      lines_.insert_or_assign(key, j.dump());
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::Parse, fmt::format("generation cache '{}' line {}: {}", path_, line, e.what()));
    }
  });
}

std::optional<std::string> GenerationCache::lookup(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = raw_.find(key);
  if (it == raw_.end()) return std::nullopt;
  return it->second;
}

void GenerationCache::insert(const std::string& key, const std::string& model_id, const std::string& prompt_hash,
                             int repeat, double temperature, const std::string& raw) {
  nlohmann::ordered_json j;
  j["key"] = key;
  j["model_id"] = model_id;
  j["prompt_hash"] = prompt_hash;
  j["repeat"] = repeat;
  j["temperature"] = temperature;
  j["raw"] = raw;
  auto line = j.dump();
  std::lock_guard lock(mu_);
  if (!path_.empty()) {
    auto p = std::filesystem::path(path_);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    out << line << '\n';
    out.flush();
    if (!out) fail(ErrorCode::Io, "write to generation cache '" + path_ + "' failed");
  }
  raw_.insert_or_assign(key, raw);
  lines_.insert_or_assign(key, std::move(line));
}

void GenerationCache::compact() {
  std::lock_guard lock(mu_);
  if (path_.empty() || lines_.empty()) return;
  std::string text;
  for (const auto& [key, line] : lines_) text += line + '\n';
  write_file_atomic(path_, text);
}

std::size_t GenerationCache::size() const {
  std::lock_guard lock(mu_);
  return raw_.size();
}

GenerateOptions options_for(const ChatBackendDescriptor& d) {
  GenerateOptions o;
  o.max_in_flight = d.max_in_flight;
  o.max_retries = d.max_retries;
  o.backoff_ms = d.backoff_ms;
  return o;
}

namespace {

void request_one(ChatBackend& backend, const std::string& prompt, const GenerateOptions& opt, GenerationRecord& rec) {
  for (std::size_t attempt = 0;; ++attempt) {
    try {
      rec.raw = backend.complete({prompt, opt.temperature, rec.repeat});
      rec.error.clear();
      return;
    } catch (const scoring::BackendError& e) {
      rec.error = e.what();
      if (!e.retryable() || attempt >= opt.max_retries) return;
    } catch (const Error& e) {
      rec.error = e.what();
      return;
    }
    std::this_thread::sleep_for(
        std::chrono::milliseconds(static_cast<long long>(opt.backoff_ms) << std::min<std::size_t>(attempt, 16)));
  }
}

void parse_record(GenerationRecord& rec, const std::string& model_id, double temperature) {
  try {
    auto parsed = parse_profiles(*rec.raw, rec.names);
    rec.profiles = std::move(parsed.profiles);
    rec.diagnostics = std::move(parsed.diagnostics);
  } catch (const Error& e) {
    rec.error = e.what();
    return;
  }
  for (auto& p : rec.profiles) p.provenance = {model_id, rec.repeat, temperature};
}

}  // namespace

std::vector<GenerationRecord> generate_profiles(ChatBackend& backend, std::span<const std::string> names,
                                                GenerationCache& cache, const GenerateOptions& opt,
                                                GenerationStats* stats) {
  if (names.empty()) fail(ErrorCode::InvalidArgument, "generate_profiles: no names");
  if (opt.batch_size == 0) fail(ErrorCode::InvalidArgument, "generate_profiles: batch_size must be >= 1");
  if (opt.repeats < 1) fail(ErrorCode::InvalidArgument, "generate_profiles: repeats must be >= 1");

  std::vector<std::string> prompts;
  std::vector<std::vector<std::string>> batches;
  for (std::size_t i = 0; i < names.size(); i += opt.batch_size) {
    auto end = std::min(names.size(), i + opt.batch_size);
    batches.emplace_back(names.begin() + i, names.begin() + end);
    prompts.push_back(build_prompt(batches.back()));
  }

  std::vector<GenerationRecord> records;
  std::vector<std::string> keys;
  std::vector<std::size_t> misses;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    auto prompt_hash = hash_hex({prompts[b]});
    for (int r = 0; r < opt.repeats; ++r) {
      GenerationRecord rec;
      rec.batch = b;
      rec.repeat = r;
      rec.names = batches[b];
      rec.prompt_hash = prompt_hash;
      keys.push_back(generation_key(backend.model_id(), prompt_hash, r, opt.temperature));
      if (auto hit = cache.lookup(keys.back())) {
        rec.raw = std::move(*hit);
        rec.from_cache = true;
      } else {
        misses.push_back(records.size());
      }
      records.push_back(std::move(rec));
    }
  }

  auto run = [&](std::size_t i) {
    auto& rec = records[i];
    request_one(backend, prompts[rec.batch], opt, rec);
    if (rec.raw)
      cache.insert(keys[i], backend.model_id(), rec.prompt_hash, rec.repeat, opt.temperature, *rec.raw);
  };
  std::size_t workers = std::min(std::max<std::size_t>(opt.max_in_flight, 1), misses.size());
  if (workers <= 1) {
    for (auto i : misses) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t m; (m = next.fetch_add(1)) < misses.size();) run(misses[m]);
      });
  }

  if (!misses.empty()) cache.compact();

  for (auto& rec : records)
    if (rec.raw) parse_record(rec, backend.model_id(), opt.temperature);

  if (stats) {
    for (const auto& rec : records) {
      if (rec.from_cache) ++stats->cached;
      else ++stats->requests;
      if (!rec.raw) ++stats->failed;
      else if (!rec.error.empty()) ++stats->unparsed;
      std::set<std::string> seen;
      for (const auto& p : rec.profiles) {
        ++stats->profiles;
        if (!p.valid()) ++stats->malformed;
        seen.insert(p.name);
      }
      for (const auto& n : rec.names)
        if (!seen.contains(n)) ++stats->missing;
    }
  }
  return records;
}

std::vector<CharacterProfile> collect_profiles(std::span<const GenerationRecord> records) {
  std::vector<CharacterProfile> out;
  for (const auto& r : records) out.insert(out.end(), r.profiles.begin(), r.profiles.end());
  return out;
}

}  // namespace gbias::genharness
