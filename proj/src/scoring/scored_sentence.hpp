#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace gbias::scoring {

enum class Mode { Causal, Masked, Seq2Seq };

std::string_view to_string(Mode m);
std::optional<Mode> parse_mode(std::string_view s);

struct ScoredSentence {
  std::string sentence_id;
  std::string model_id;
  Mode mode = Mode::Causal;
  std::vector<std::string> tokens;
  std::vector<double> token_logprobs;
  double ppl = 1.0;

  bool operator==(const ScoredSentence&) const = default;
};

// Builds a ScoredSentence, validating the token/logprob invariants and
// computing ppl (pseudo-ppl for masked mode).
ScoredSentence make_scored(std::string sentence_id, std::string model_id, Mode mode, std::vector<std::string> tokens,
                           std::vector<double> logprobs);

// Dump-format record: {sentence_id, model_id, mode, tokens, logprobs, ppl}.
nlohmann::ordered_json to_json(const ScoredSentence& s);
// Accepts dump records with or without `ppl`; ppl is always recomputed and,
// when present, must agree with the recomputation.
ScoredSentence scored_from_json(const nlohmann::json& j);

}  // namespace gbias::scoring
