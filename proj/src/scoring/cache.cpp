#include "scoring/cache.hpp"

#include <filesystem>
#include <fstream>

#include "common/error.hpp"
#include "common/hash.hpp"
#include "common/io.hpp"

namespace gbias::scoring {

std::string cache_key(std::string_view model_id, Mode mode, std::string_view sentence_text) {
  return hash_hex({model_id, to_string(mode), sentence_text});
}

ScoreCache::ScoreCache(std::string path) : path_(std::move(path)) {
  if (path_.empty() || !std::filesystem::exists(path_)) return;
  for_each_jsonl(path_, [&](const nlohmann::json& j, std::size_t) {
    auto scored = scored_from_json(j.at("value"));
    auto text = j.at("text").get<std::string>();
    auto key = cache_key(scored.model_id, scored.mode, text);
    if (j.at("key").get<std::string>() != key) fail(ErrorCode::Validation, "cache '" + path_ + "' has a corrupt key");
    entries_.insert_or_assign(key, Stored{scored.model_id, scored.mode, std::move(text), std::move(scored)});
  });
}

std::optional<ScoredSentence> ScoreCache::lookup(std::string_view model_id, Mode mode, std::string_view text) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(cache_key(model_id, mode, text));
  // Full field comparison guards against hash collisions.
  if (it == entries_.end() || it->second.model_id != model_id || it->second.mode != mode || it->second.text != text)
    return std::nullopt;
  return it->second.scored;
}

void ScoreCache::insert(std::span<const Entry> entries) {
  if (entries.empty()) return;
  std::lock_guard lock(mu_);
  std::ofstream out;
  if (!path_.empty()) {
    auto p = std::filesystem::path(path_);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    out.open(path_, std::ios::app | std::ios::binary);
    if (!out) fail(ErrorCode::Io, "cannot append to cache '" + path_ + "'");
  }
  for (const auto& e : entries) {
    auto key = cache_key(e.scored.model_id, e.scored.mode, e.text);
    if (out.is_open()) {
      nlohmann::ordered_json j;
      j["key"] = key;
      j["text"] = e.text;
      j["value"] = to_json(e.scored);
      out << j.dump() << '\n';
    }
    entries_.insert_or_assign(key, Stored{e.scored.model_id, e.scored.mode, e.text, e.scored});
  }
  if (out.is_open()) {
    out.flush();
    if (!out) fail(ErrorCode::Io, "write to cache '" + path_ + "' failed");
  }
}

std::size_t ScoreCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

}  // namespace gbias::scoring
