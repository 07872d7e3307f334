#include "scoring/backend.hpp"

#include <cmath>
#include <filesystem>

#include <fmt/format.h>

#include "common/hash.hpp"
#include "common/http.hpp"
#include "common/io.hpp"
#include "common/text.hpp"

namespace gbias::scoring {

std::string_view to_string(BackendKind k) {
  switch (k) {
    case BackendKind::HttpCompletions: return "http_completions";
    case BackendKind::DumpFile: return "dump_file";
    case BackendKind::Mock: return "mock";
  }
  return "mock";
}

void validate(const BackendDescriptor& d) {
  switch (d.kind) {
    case BackendKind::HttpCompletions:
      if (d.endpoint.empty() || d.model_id.empty())
        fail(ErrorCode::Validation, fmt::format("backend '{}': http backends need endpoint and model_id", d.name));
      http::split_url(d.endpoint);
      break;
    case BackendKind::DumpFile:
      if (d.path.empty() || !std::filesystem::exists(d.path))
        fail(ErrorCode::Validation, fmt::format("backend '{}': dump file '{}' does not exist", d.name, d.path));
      break;
    case BackendKind::Mock:
      if (d.model_id.empty()) fail(ErrorCode::Validation, fmt::format("backend '{}': mock needs a model_id", d.name));
      for (const auto& [g, f] : d.group_ppl_factor)
        if (!(f > 0.0) || !std::isfinite(f))
          fail(ErrorCode::Validation, fmt::format("backend '{}': group factor for '{}' must be positive", d.name, g));
      break;
  }
  if (d.max_in_flight == 0) fail(ErrorCode::Validation, fmt::format("backend '{}': max_in_flight must be >= 1", d.name));
}

BackendDescriptor backend_from_json(const std::string& name, const nlohmann::json& j) {
  BackendDescriptor d;
  d.name = name;
  try {
    auto kind = j.at("kind").get<std::string>();
    if (kind == "http_completions") d.kind = BackendKind::HttpCompletions;
    else if (kind == "dump_file") d.kind = BackendKind::DumpFile;
    else if (kind == "mock") d.kind = BackendKind::Mock;
    else fail(ErrorCode::Validation, fmt::format("backend '{}': unknown kind '{}'", name, kind));
    d.endpoint = j.value("endpoint", "");
    d.path = j.value("path", "");
    d.model_id = j.value("model_id", d.kind == BackendKind::Mock ? name : "");
    auto mode = parse_mode(j.value("mode", "causal"));
    if (!mode) fail(ErrorCode::Validation, fmt::format("backend '{}': unknown mode", name));
    d.mode = *mode;
    d.auth_env = j.value("auth_env", "");
    d.max_in_flight = j.value("max_in_flight", d.max_in_flight);
    d.max_retries = j.value("max_retries", d.max_retries);
    d.backoff_ms = j.value("backoff_ms", d.backoff_ms);
    d.timeout_s = j.value("timeout_s", d.timeout_s);
    d.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("planted"))
      for (const auto& p : j["planted"])
        d.planted.push_back({p.at("group").get<std::string>(), p.at("descriptor").get<std::string>(),
                             p.at("logprob_shift").get<double>()});
    if (j.contains("group_ppl_factor"))
      for (const auto& [g, f] : j["group_ppl_factor"].items()) d.group_ppl_factor[g] = f.get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Validation, fmt::format("backend '{}': {}", name, e.what()));
  }
  return d;
}

MockBackend::MockBackend(BackendDescriptor d) : desc_(std::move(d)) {
  validate(desc_);
  for (const auto& p : desc_.planted) shift_[{p.group, p.descriptor}] += p.logprob_shift;
}

TokenScores MockBackend::do_score(const corpus::Sentence& s) {
  TokenScores out;
  for (auto& tok : text::split(s.text, ' '))
    if (!tok.empty()) out.tokens.push_back(std::move(tok));
  if (out.tokens.empty()) throw BackendError("mock: sentence " + s.id + " has no tokens", false);

  std::string group = corpus::Group{s.name.ethnicity, s.name.gender, 0}.label();
  double shift = 0.0;
  if (auto it = shift_.find({group, s.descriptor}); it != shift_.end()) shift += it->second;
  if (auto it = desc_.group_ppl_factor.find(group); it != desc_.group_ppl_factor.end()) shift -= std::log(it->second);

  const auto seed = std::to_string(desc_.seed);
  out.logprobs.reserve(out.tokens.size());
  for (std::size_t t = 0; t < out.tokens.size(); ++t) {
    double u = hash_uniform(hash_fields({seed, desc_.model_id, s.text, std::to_string(t), out.tokens[t]}));
    out.logprobs.push_back(std::min(0.0, -(1.0 + 0.5 * u) + shift));
  }
  return out;
}

DumpBackend::DumpBackend(BackendDescriptor d) : desc_(std::move(d)) {
  validate(desc_);
  bool model_from_dump = desc_.model_id.empty();
  for_each_jsonl(desc_.path, [&](const nlohmann::json& j, std::size_t line) {
    if (j.contains("header")) {
      headers_.push_back(j);
      return;
    }
    auto rec = scored_from_json(j);
    if (model_from_dump) {
      desc_.model_id = rec.model_id;
      model_from_dump = false;
    }
    if (rec.model_id != desc_.model_id || rec.mode != desc_.mode)
      fail(ErrorCode::Validation, fmt::format("{}:{}: record is for {}/{}, backend expects {}/{}", desc_.path, line,
                                              rec.model_id, to_string(rec.mode), desc_.model_id, to_string(desc_.mode)));
    records_.insert_or_assign(rec.sentence_id, TokenScores{std::move(rec.tokens), std::move(rec.token_logprobs)});
  });
}

TokenScores DumpBackend::do_score(const corpus::Sentence& s) {
  auto it = records_.find(s.id);
  if (it == records_.end()) throw BackendError("dump '" + desc_.path + "' has no record for sentence " + s.id, false);
  return it->second;
}

HttpCompletionsBackend::HttpCompletionsBackend(BackendDescriptor d) : desc_(std::move(d)) { validate(desc_); }

nlohmann::json HttpCompletionsBackend::request_body(const std::string& model_id, const std::string& prompt) {
  return {{"model", model_id}, {"prompt", prompt}, {"max_tokens", 0},
          {"echo", true},      {"logprobs", 0},    {"temperature", 0}};
}

TokenScores HttpCompletionsBackend::parse_response(const nlohmann::json& body) {
  const nlohmann::json* lp = nullptr;
  if (body.contains("choices") && body["choices"].is_array() && !body["choices"].empty()) {
    const auto& choice = body["choices"][0];
    if (choice.contains("logprobs") && choice["logprobs"].is_object()) lp = &choice["logprobs"];
  }
  if (!lp || !lp->contains("tokens") || !lp->contains("token_logprobs"))
    throw BackendError("backend response carries no echoed token log-probabilities", false);
  const auto& toks = (*lp)["tokens"];
  const auto& lps = (*lp)["token_logprobs"];
  if (!toks.is_array() || !lps.is_array() || toks.size() != lps.size())
    throw BackendError("backend returned mismatched tokens/token_logprobs", false);
  TokenScores out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (lps[i].is_null()) continue;
    out.tokens.push_back(toks[i].get<std::string>());
    out.logprobs.push_back(lps[i].get<double>());
  }
  if (out.tokens.empty()) throw BackendError("backend returned no scorable tokens", false);
  return out;
}

TokenScores HttpCompletionsBackend::do_score(const corpus::Sentence& s) {
  auto res = http::post_json(desc_.endpoint, request_body(desc_.model_id, s.text).dump(), desc_.auth_env,
                             desc_.timeout_s);
  if (res.status != 200) {
    auto what = res.status == 0 ? "transport error: " + res.transport_error
                                : fmt::format("HTTP {}: {}", res.status, res.body.substr(0, 200));
    throw BackendError(what, http::is_retryable(res));
  }
  nlohmann::json body;
  try {
    body = nlohmann::json::parse(res.body);
  } catch (const nlohmann::json::parse_error&) {
    throw BackendError("backend returned non-JSON body", true);
  }
  return parse_response(body);
}

std::unique_ptr<Backend> make_backend(const BackendDescriptor& d) {
  switch (d.kind) {
    case BackendKind::Mock: return std::make_unique<MockBackend>(d);
    case BackendKind::DumpFile: return std::make_unique<DumpBackend>(d);
    case BackendKind::HttpCompletions: return std::make_unique<HttpCompletionsBackend>(d);
  }
  fail(ErrorCode::Internal, "unhandled backend kind");
}

}  // namespace gbias::scoring
