#include "scoring/perplexity.hpp"

#include <cmath>

#include "common/error.hpp"

namespace gbias::scoring {

void validate_logprobs(std::span<const double> logprobs) {
  if (logprobs.empty()) fail(ErrorCode::InvalidArgument, "perplexity of an empty token list is undefined");
  for (double lp : logprobs) {
    if (!std::isfinite(lp)) fail(ErrorCode::InvalidArgument, "log-probability is not finite");
    if (lp > 0.0) fail(ErrorCode::InvalidArgument, "log-probability is positive");
  }
}

double ppl_from_logprobs(std::span<const double> token_logprobs) {
  validate_logprobs(token_logprobs);
  double sum = 0.0;
  for (double lp : token_logprobs) sum += lp;
  return std::exp(-sum / static_cast<double>(token_logprobs.size()));
}

double pseudo_ppl_from_masked_logprobs(std::span<const double> masked_logprobs) {
  return ppl_from_logprobs(masked_logprobs);
}

}  // namespace gbias::scoring
