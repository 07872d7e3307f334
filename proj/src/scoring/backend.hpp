#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "common/error.hpp"
#include "corpus/corpus.hpp"
#include "scoring/scored_sentence.hpp"

namespace gbias::scoring {

enum class BackendKind { HttpCompletions, DumpFile, Mock };

std::string_view to_string(BackendKind k);

// Per-token log-probability shift applied by the mock backend to one
// (group, descriptor) cell; positive values lower that cell's perplexity.
struct PlantedOffset {
  std::string group;
  std::string descriptor;
  double logprob_shift = 0.0;
};

struct BackendDescriptor {
  std::string name;
  BackendKind kind = BackendKind::Mock;
  std::string endpoint;  // http
  std::string path;      // dump file
  std::string model_id;
  Mode mode = Mode::Causal;
  std::string auth_env;  // name of the env var holding the bearer token
  std::size_t max_in_flight = 4;
  std::size_t max_retries = 3;
  int backoff_ms = 200;
  int timeout_s = 60;

  // mock only
  std::uint64_t seed = 0;
  std::vector<PlantedOffset> planted;
  std::map<std::string, double> group_ppl_factor;  // multiplicative PPL offset per group label
};

void validate(const BackendDescriptor& d);
BackendDescriptor backend_from_json(const std::string& name, const nlohmann::json& j);

class BackendError : public Error {
 public:
  BackendError(const std::string& what, bool retryable) : Error(ErrorCode::Backend, what), retryable_(retryable) {}
  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

struct TokenScores {
  std::vector<std::string> tokens;
  std::vector<double> logprobs;
};

// Implementations must be safe to call concurrently.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual const std::string& model_id() const = 0;
  virtual Mode mode() const = 0;

  TokenScores score(const corpus::Sentence& s) {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return do_score(s);
  }
  std::size_t calls() const { return calls_.load(std::memory_order_relaxed); }

 protected:
  virtual TokenScores do_score(const corpus::Sentence& s) = 0;

 private:
  std::atomic<std::size_t> calls_{0};
};

// logprob(token t of sentence s) = -(1 + 0.5 u) with u = hash-uniform(seed,
// model_id, s, t), plus the planted shift for the sentence's cell and minus
// ln(factor) of its group; clamped at 0. Tokens are whitespace-separated.
class MockBackend final : public Backend {
 public:
  explicit MockBackend(BackendDescriptor d);
  const std::string& model_id() const override { return desc_.model_id; }
  Mode mode() const override { return desc_.mode; }

 protected:
  TokenScores do_score(const corpus::Sentence& s) override;

 private:
  BackendDescriptor desc_;
  std::map<std::pair<std::string, std::string>, double> shift_;
};

// Serves pre-computed records from a JSONL dump. Lines carrying a "header"
// key are metadata and kept verbatim.
class DumpBackend final : public Backend {
 public:
  explicit DumpBackend(BackendDescriptor d);
  const std::string& model_id() const override { return desc_.model_id; }
  Mode mode() const override { return desc_.mode; }
  const std::vector<nlohmann::json>& headers() const { return headers_; }
  std::size_t size() const { return records_.size(); }

 protected:
  TokenScores do_score(const corpus::Sentence& s) override;

 private:
  BackendDescriptor desc_;
  std::unordered_map<std::string, TokenScores> records_;
  std::vector<nlohmann::json> headers_;
};

// JSON-over-HTTP completions endpoint with echo + logprobs. Only the echoed
// tokens and their log-probabilities are used; tokens without a logprob
// (the first one) are skipped.
class HttpCompletionsBackend final : public Backend {
 public:
  explicit HttpCompletionsBackend(BackendDescriptor d);
  const std::string& model_id() const override { return desc_.model_id; }
  Mode mode() const override { return desc_.mode; }

  static nlohmann::json request_body(const std::string& model_id, const std::string& prompt);
  static TokenScores parse_response(const nlohmann::json& body);

 protected:
  TokenScores do_score(const corpus::Sentence& s) override;

 private:
  BackendDescriptor desc_;
};

std::unique_ptr<Backend> make_backend(const BackendDescriptor& d);

}  // namespace gbias::scoring
