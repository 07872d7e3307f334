#pragma once

#include <cstddef>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "genharness/chat_backend.hpp"
#include "genharness/profile.hpp"

namespace gbias::genharness {

std::string generation_key(std::string_view model_id, std::string_view prompt_hash, int repeat, double temperature);

// JSONL archive of raw chat responses, keyed by (model, prompt hash, repeat,
// temperature). Each response is appended and flushed as soon as it arrives
// so an interrupted run resumes where it stopped; compact() then rewrites the
// file in key order, which makes it independent of completion order.
class GenerationCache {
 public:
  GenerationCache() = default;
  explicit GenerationCache(std::string path);

  std::optional<std::string> lookup(const std::string& key) const;
  void insert(const std::string& key, const std::string& model_id, const std::string& prompt_hash, int repeat,
              double temperature, const std::string& raw);
  std::size_t size() const;
  void compact();

 private:
  std::string path_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::string> raw_;
  std::map<std::string, std::string> lines_;  // key -> serialized record
};

struct GenerateOptions {
  int repeats = 3;
  double temperature = 1.0;
  std::size_t batch_size = 10;
  std::size_t max_in_flight = 4;
  std::size_t max_retries = 3;
  int backoff_ms = 200;
};

GenerateOptions options_for(const ChatBackendDescriptor& d);

struct GenerationRecord {
  std::size_t batch = 0;
  int repeat = 0;
  std::vector<std::string> names;
  std::string prompt_hash;
  std::optional<std::string> raw;  // absent when the backend failed
  std::string error;               // backend or parse failure
  bool from_cache = false;
  std::vector<CharacterProfile> profiles;
  std::vector<std::string> diagnostics;
};

struct GenerationStats {
  std::size_t requests = 0;  // network calls made
  std::size_t cached = 0;
  std::size_t failed = 0;      // backend failures after retries
  std::size_t unparsed = 0;    // responses with no recoverable JSON
  std::size_t profiles = 0;
  std::size_t malformed = 0;   // profiles carrying diagnostics
  std::size_t missing = 0;     // requested (name, repeat) pairs with no profile

  double malformed_share() const { return profiles ? static_cast<double>(malformed) / profiles : 0.0; }
  bool alarm() const { return malformed_share() > 0.05; }
};

// Splits `names` into consecutive batches of batch_size and requests each
// batch `repeats` times. Records come back ordered by (batch, repeat)
// whatever the completion order.
std::vector<GenerationRecord> generate_profiles(ChatBackend& backend, std::span<const std::string> names,
                                                GenerationCache& cache, const GenerateOptions& opt,
                                                GenerationStats* stats = nullptr);

// Profiles from all records in record order.
std::vector<CharacterProfile> collect_profiles(std::span<const GenerationRecord> records);

}  // namespace gbias::genharness
