#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "corpus/corpus.hpp"
#include "scoring/backend.hpp"
#include "scoring/cache.hpp"

namespace gbias::scoring {

struct ScoreOptions {
  std::size_t max_in_flight = 4;
  std::size_t max_retries = 3;  // attempts after the first
  int backoff_ms = 200;         // doubled per retry
};

ScoreOptions options_for(const BackendDescriptor& d);

struct ScoreOutcome {
  std::string sentence_id;
  std::optional<ScoredSentence> scored;  // empty when the sentence failed
  std::string error;
  bool from_cache = false;
};

struct ScoreStats {
  std::size_t scored = 0;  // fresh backend results
  std::size_t cached = 0;
  std::size_t failed = 0;

  ScoreStats& operator+=(const ScoreStats& o) {
    scored += o.scored;
    cached += o.cached;
    failed += o.failed;
    return *this;
  }
};

// Scores one chunk of sentences. The cache is consulted first; misses go to
// the backend with at most `max_in_flight` concurrent requests. Outcomes come
// back in input order and fresh results are appended to the cache in input
// order, so any completion interleaving yields identical files.
std::vector<ScoreOutcome> score_corpus(Backend& backend, std::span<const corpus::Sentence> sentences, ScoreCache& cache,
                                       const ScoreOptions& opt, ScoreStats* stats = nullptr);

}  // namespace gbias::scoring
