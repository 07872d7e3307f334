#pragma once

#include <cstddef>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>

#include "scoring/scored_sentence.hpp"

namespace gbias::scoring {

std::string cache_key(std::string_view model_id, Mode mode, std::string_view sentence_text);

// Append-only JSONL store keyed by content hash of (model_id, mode, text).
// An empty path keeps the cache in memory only.
class ScoreCache {
 public:
  ScoreCache() = default;
  explicit ScoreCache(std::string path);

  std::optional<ScoredSentence> lookup(std::string_view model_id, Mode mode, std::string_view text) const;

  struct Entry {
    std::string text;
    ScoredSentence scored;
  };
  // Appends in the given order and flushes.
  void insert(std::span<const Entry> entries);

  std::size_t size() const;
  const std::string& path() const { return path_; }

 private:
  struct Stored {
    std::string model_id;
    Mode mode;
    std::string text;
    ScoredSentence scored;
  };
  std::string path_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, Stored> entries_;
};

}  // namespace gbias::scoring
