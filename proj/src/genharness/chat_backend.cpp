#include "genharness/chat_backend.hpp"

#include <cmath>

#include <fmt/format.h>

#include "common/error.hpp"
#include "common/hash.hpp"
#include "common/http.hpp"
#include "common/io.hpp"
#include "genharness/profile.hpp"
#include "genharness/prompt.hpp"
#include "scoring/backend.hpp"

namespace gbias::genharness {

using scoring::BackendError;

ChatBackendDescriptor chat_backend_from_json(const std::string& name, const nlohmann::json& j) {
  ChatBackendDescriptor d;
  d.name = name;
  try {
    auto kind = j.at("kind").get<std::string>();
    if (kind == "http_chat") d.kind = ChatKind::HttpChat;
    else if (kind == "mock_chat") d.kind = ChatKind::Mock;
    else fail(ErrorCode::Validation, fmt::format("chat backend '{}': unknown kind '{}'", name, kind));
    d.endpoint = j.value("endpoint", "");
    d.model_id = j.value("model_id", d.kind == ChatKind::Mock ? name : "");
    d.auth_env = j.value("auth_env", "");
    d.max_in_flight = j.value("max_in_flight", d.max_in_flight);
    d.max_retries = j.value("max_retries", d.max_retries);
    d.backoff_ms = j.value("backoff_ms", d.backoff_ms);
    d.timeout_s = j.value("timeout_s", d.timeout_s);
    d.seed = j.value("seed", std::uint64_t{0});
    d.signal = j.value("signal", 0.0);
    d.fenced = j.value("fenced", false);
    d.malformed_rate = j.value("malformed_rate", 0.0);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Validation, fmt::format("chat backend '{}': {}", name, e.what()));
  }
  validate(d);
  return d;
}

void validate(const ChatBackendDescriptor& d) {
  if (d.model_id.empty()) fail(ErrorCode::Validation, fmt::format("chat backend '{}': model_id is required", d.name));
  if (d.kind == ChatKind::HttpChat) {
    if (d.endpoint.empty()) fail(ErrorCode::Validation, fmt::format("chat backend '{}': endpoint is required", d.name));
    http::split_url(d.endpoint);
  }
  if (d.max_in_flight == 0)
    fail(ErrorCode::Validation, fmt::format("chat backend '{}': max_in_flight must be >= 1", d.name));
  if (!(d.signal >= 0.0 && d.signal <= 1.0) || !(d.malformed_rate >= 0.0 && d.malformed_rate <= 1.0))
    fail(ErrorCode::Validation, fmt::format("chat backend '{}': signal and malformed_rate must lie in [0, 1]", d.name));
}

namespace {

struct Vocab {
  const char* field;
  std::vector<const char*> values;
};

// Small closed vocabularies keep the synthetic profiles analysable.
const std::vector<Vocab>& vocabularies() {
  static const std::vector<Vocab> v = {
      {"personality_traits", {"kind", "curious", "patient", "bold", "witty", "loyal", "calm", "ambitious", "shy",
                              "generous", "creative", "diligent"}},
      {"negative_traits", {"stubborn", "impatient", "arrogant", "lazy", "moody", "secretive", "reckless", "vain",
                           "jealous", "anxious"}},
      {"hobbies", {"painting", "hiking", "chess", "cooking", "gardening", "reading", "calligraphy", "football",
                   "dancing", "fishing", "photography", "poetry"}},
      {"occupation", {"teacher", "engineer", "nurse", "chef", "lawyer", "farmer", "artist", "accountant",
                      "carpenter", "pilot"}},
      {"hair_colour", {"black", "brown", "blonde", "red", "grey", "auburn"}},
      {"eye_colour", {"brown", "blue", "green", "hazel", "grey"}},
      {"skin_colour", {"fair", "olive", "tan", "brown", "dark", "light"}},
      {"build", {"slim", "athletic", "average", "stocky", "muscular"}},
      {"special_move", {"whirlwind kick", "shadow step", "iron wall", "lightning strike"}},
      {"socioeconomic_status", {"lower class", "working class", "middle class", "upper middle class", "wealthy"}},
      {"sexual_orientation", {"heterosexual", "homosexual", "bisexual", "asexual"}},
      {"religion", {"christianity", "islam", "buddhism", "hinduism", "judaism", "shinto", "atheist", "agnostic"}},
      {"age", {}},
      {"height", {}},
  };
  return v;
}

}  // namespace

MockChatBackend::MockChatBackend(ChatBackendDescriptor d, std::map<std::string, std::string> group_of_name)
    : desc_(std::move(d)), group_of_name_(std::move(group_of_name)) {
  validate(desc_);
}

std::string MockChatBackend::do_complete(const ChatRequest& r) {
  auto names = names_in_prompt(r.prompt);
  if (names.empty()) throw BackendError("mock chat: prompt is not a profile request", false);
  const auto seed = std::to_string(desc_.seed);
  const auto rep = std::to_string(r.repeat);
  const auto temp = format_double(r.temperature);

  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& name : names) {
    auto git = group_of_name_.find(name);
    const std::string group = git == group_of_name_.end() ? "" : git->second;
    auto draw = [&](std::string_view field, std::size_t slot) {
      return hash_uniform(hash_fields({seed, desc_.model_id, name, rep, temp, field, std::to_string(slot)}));
    };
    // Values the group leans towards, shared across names in the group.
    auto preferred = [&](std::string_view field, std::size_t slot) {
      return hash_uniform(hash_fields({seed, "group", group, field, std::to_string(slot)}));
    };
    auto pick = [&](std::string_view field, std::size_t slot) -> double {
      bool lean = !group.empty() && draw(field, slot + 1000) < desc_.signal;
      return lean ? preferred(field, slot) : draw(field, slot);
    };

    CharacterProfile p;
    p.name = name;
    for (const auto& v : vocabularies()) {
      std::string field = v.field;
      if (field == "age") {
        p.age = 18 + static_cast<int>(pick(field, 0) * 62);
        continue;
      }
      if (field == "height") {
        p.height_ft = std::round((4.8 + pick(field, 0) * 1.8) * 10.0) / 10.0;
        continue;
      }
      auto value = [&](std::size_t slot) {
        return std::string(v.values[static_cast<std::size_t>(pick(field, slot) * v.values.size())]);
      };
      if (field == "personality_traits" || field == "negative_traits" || field == "hobbies") {
        std::size_t n = kListLength;
        if (field == "hobbies" && draw("malformed", 0) < desc_.malformed_rate) n = kListLength - 1;
        std::vector<std::string> items;
        for (std::size_t i = 0; i < n; ++i) items.push_back(value(i));
        if (field == "personality_traits") p.personality_traits = items;
        else if (field == "negative_traits") p.negative_traits = items;
        else p.hobbies = items;
      } else if (field == "occupation") p.occupation = value(0);
      else if (field == "hair_colour") p.hair_colour = value(0);
      else if (field == "eye_colour") p.eye_colour = value(0);
      else if (field == "skin_colour") p.skin_colour = value(0);
      else if (field == "build") p.build = value(0);
      else if (field == "special_move") p.special_move = value(0);
      else if (field == "socioeconomic_status") p.socioeconomic_status = value(0);
      else if (field == "sexual_orientation") p.sexual_orientation = value(0);
      else if (field == "religion") p.religion = value(0);
    }
    arr.push_back(print_profile(p));
  }
  auto body = arr.dump(2);
  return desc_.fenced ? "```json\n" + body + "\n```" : body;
}

HttpChatBackend::HttpChatBackend(ChatBackendDescriptor d) : desc_(std::move(d)) { validate(desc_); }

nlohmann::json HttpChatBackend::request_body(const std::string& model_id, const ChatRequest& r) {
  return {{"model", model_id},
          {"messages", nlohmann::json::array({{{"role", "user"}, {"content", r.prompt}}})},
          {"temperature", r.temperature}};
}

std::string HttpChatBackend::parse_response(const nlohmann::json& body) {
  if (body.contains("choices") && body["choices"].is_array() && !body["choices"].empty()) {
    const auto& c = body["choices"][0];
    if (c.contains("message") && c["message"].is_object() && c["message"].contains("content") &&
        c["message"]["content"].is_string())
      return c["message"]["content"].get<std::string>();
  }
  throw BackendError("chat response has no choices[0].message.content", false);
}

std::string HttpChatBackend::do_complete(const ChatRequest& r) {
  auto resp = http::post_json(desc_.endpoint, request_body(desc_.model_id, r).dump(), desc_.auth_env, desc_.timeout_s);
  if (resp.status != 200) {
    auto what = resp.status == 0 ? "transport error: " + resp.transport_error
                                 : fmt::format("HTTP {}: {}", resp.status, resp.body.substr(0, 200));
    throw BackendError(what, http::is_retryable(resp));
  }
  auto j = nlohmann::json::parse(resp.body, nullptr, false);
  if (j.is_discarded()) throw BackendError("chat endpoint returned non-JSON body", true);
  return parse_response(j);
}

std::unique_ptr<ChatBackend> make_chat_backend(const ChatBackendDescriptor& d,
                                               std::map<std::string, std::string> group_of_name) {
  switch (d.kind) {
    case ChatKind::HttpChat: return std::make_unique<HttpChatBackend>(d);
    case ChatKind::Mock: return std::make_unique<MockChatBackend>(d, std::move(group_of_name));
  }
  fail(ErrorCode::Internal, "unknown chat backend kind");
}

}  // namespace gbias::genharness
