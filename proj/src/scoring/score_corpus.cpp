#include "scoring/score_corpus.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <thread>

namespace gbias::scoring {

ScoreOptions options_for(const BackendDescriptor& d) { return {d.max_in_flight, d.max_retries, d.backoff_ms}; }

namespace {

void score_one(Backend& backend, const corpus::Sentence& s, const ScoreOptions& opt, ScoreOutcome& out) {
  for (std::size_t attempt = 0;; ++attempt) {
    try {
      auto tokens = backend.score(s);
      out.scored = make_scored(s.id, backend.model_id(), backend.mode(), std::move(tokens.tokens),
                               std::move(tokens.logprobs));
      return;
    } catch (const BackendError& e) {
      out.error = e.what();
      if (!e.retryable() || attempt >= opt.max_retries) return;
    } catch (const Error& e) {
      out.error = e.what();
      return;
    }
    auto delay = std::chrono::milliseconds(static_cast<long long>(opt.backoff_ms) << std::min<std::size_t>(attempt, 16));
    std::this_thread::sleep_for(delay);
  }
}

}  // namespace

std::vector<ScoreOutcome> score_corpus(Backend& backend, std::span<const corpus::Sentence> sentences, ScoreCache& cache,
                                       const ScoreOptions& opt, ScoreStats* stats) {
  std::vector<ScoreOutcome> out(sentences.size());
  std::vector<std::size_t> misses;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    out[i].sentence_id = sentences[i].id;
    if (auto hit = cache.lookup(backend.model_id(), backend.mode(), sentences[i].text)) {
      hit->sentence_id = sentences[i].id;
      out[i].scored = std::move(*hit);
      out[i].from_cache = true;
    } else {
      misses.push_back(i);
    }
  }

  std::size_t workers = std::min(std::max<std::size_t>(opt.max_in_flight, 1), misses.size());
  if (workers <= 1) {
    for (auto i : misses) score_one(backend, sentences[i], opt, out[i]);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t m; (m = next.fetch_add(1)) < misses.size();) {
          auto i = misses[m];
          score_one(backend, sentences[i], opt, out[i]);
        }
      });
  }

  std::vector<ScoreCache::Entry> fresh;
  for (auto i : misses)
    if (out[i].scored) fresh.push_back({sentences[i].text, *out[i].scored});
  cache.insert(fresh);

  if (stats) {
    for (const auto& o : out) {
      if (!o.scored) ++stats->failed;
      else if (o.from_cache) ++stats->cached;
      else ++stats->scored;
    }
  }
  return out;
}

}  // namespace gbias::scoring
