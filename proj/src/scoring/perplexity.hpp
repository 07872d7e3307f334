#pragma once

#include <span>

namespace gbias::scoring {

// exp(-(1/m) * sum(logprobs)). Entries are natural-log probabilities of the
// scored tokens; causal and seq2seq (decoder-side) scoring both use this.
double ppl_from_logprobs(std::span<const double> token_logprobs);

// Same arithmetic over per-position masked log-probabilities
// log P(x_i | x with position i masked).
double pseudo_ppl_from_masked_logprobs(std::span<const double> masked_logprobs);

// Throws on empty input or on entries that are non-finite or positive.
void validate_logprobs(std::span<const double> logprobs);

}  // namespace gbias::scoring
