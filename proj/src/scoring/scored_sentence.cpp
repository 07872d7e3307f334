#include "scoring/scored_sentence.hpp"

#include <cmath>

#include "common/error.hpp"
#include "scoring/perplexity.hpp"

namespace gbias::scoring {

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::Causal: return "causal";
    case Mode::Masked: return "masked";
    case Mode::Seq2Seq: return "seq2seq";
  }
  return "causal";
}

std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "causal") return Mode::Causal;
  if (s == "masked") return Mode::Masked;
  if (s == "seq2seq") return Mode::Seq2Seq;
  return std::nullopt;
}

ScoredSentence make_scored(std::string sentence_id, std::string model_id, Mode mode, std::vector<std::string> tokens,
                           std::vector<double> logprobs) {
  if (tokens.size() != logprobs.size())
    fail(ErrorCode::Validation, "sentence " + sentence_id + ": " + std::to_string(tokens.size()) + " tokens but " +
                                    std::to_string(logprobs.size()) + " log-probabilities");
  ScoredSentence s;
  s.ppl = mode == Mode::Masked ? pseudo_ppl_from_masked_logprobs(logprobs) : ppl_from_logprobs(logprobs);
  s.sentence_id = std::move(sentence_id);
  s.model_id = std::move(model_id);
  s.mode = mode;
  s.tokens = std::move(tokens);
  s.token_logprobs = std::move(logprobs);
  return s;
}

nlohmann::ordered_json to_json(const ScoredSentence& s) {
  nlohmann::ordered_json j;
  j["sentence_id"] = s.sentence_id;
  j["model_id"] = s.model_id;
  j["mode"] = to_string(s.mode);
  j["tokens"] = s.tokens;
  j["logprobs"] = s.token_logprobs;
  j["ppl"] = s.ppl;
  return j;
}

ScoredSentence scored_from_json(const nlohmann::json& j) {
  try {
    auto mode = parse_mode(j.at("mode").get<std::string>());
    if (!mode) fail(ErrorCode::Parse, "unknown scoring mode '" + j.at("mode").get<std::string>() + "'");
    auto s = make_scored(j.at("sentence_id").get<std::string>(), j.at("model_id").get<std::string>(), *mode,
                         j.at("tokens").get<std::vector<std::string>>(), j.at("logprobs").get<std::vector<double>>());
    if (j.contains("ppl")) {
      double stated = j["ppl"].get<double>();
      if (std::abs(stated - s.ppl) > 1e-6 * s.ppl)
        fail(ErrorCode::Validation, "sentence " + s.sentence_id + ": stated ppl disagrees with its logprobs");
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("bad scored-sentence record: ") + e.what());
  }
}

}  // namespace gbias::scoring
