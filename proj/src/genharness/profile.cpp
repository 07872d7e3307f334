#include "genharness/profile.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <regex>

#include <fmt/format.h>

#include "common/error.hpp"
#include "common/io.hpp"
#include "common/text.hpp"

namespace gbias::genharness {

using nlohmann::json;

std::optional<double> parse_height_ft(std::string_view s) {
  static const std::regex kFeet(R"(^\s*(\d+(?:\.\d+)?)\s*(?:ft\.?|feet|foot|')?\s*$)", std::regex::icase);
  static const std::regex kFeetInches(
      R"(^\s*(\d+)\s*(?:ft\.?|feet|foot|')\s*(\d+(?:\.\d+)?)\s*(?:in\.?|inch|inches|"|'')?\s*$)", std::regex::icase);
  static const std::regex kCm(R"(^\s*(\d+(?:\.\d+)?)\s*(?:cm|centimet(?:er|re)s?)\s*$)", std::regex::icase);
  std::string str(s);
  std::smatch m;
  if (std::regex_match(str, m, kFeet)) return std::stod(m[1].str());
  if (std::regex_match(str, m, kFeetInches)) return std::stod(m[1].str()) + std::stod(m[2].str()) / 12.0;
  if (std::regex_match(str, m, kCm)) return std::stod(m[1].str()) / 30.48;
  return std::nullopt;
}

namespace {

void put_opt(nlohmann::ordered_json& j, const char* key, const std::optional<std::string>& v) {
  if (v) j[key] = *v;
}

}  // namespace

nlohmann::ordered_json print_profile(const CharacterProfile& p) {
  nlohmann::ordered_json j;
  j["name"] = p.name;
  if (p.age) j["age"] = *p.age;
  j["personality_traits"] = p.personality_traits;
  j["negative_traits"] = p.negative_traits;
  j["hobbies"] = p.hobbies;
  put_opt(j, "occupation", p.occupation);
  nlohmann::ordered_json phys = nlohmann::ordered_json::object();
  if (p.height_ft) phys["height"] = *p.height_ft;
  else if (p.height_raw) phys["height"] = *p.height_raw;
  put_opt(phys, "hair_colour", p.hair_colour);
  put_opt(phys, "eye_colour", p.eye_colour);
  put_opt(phys, "skin_colour", p.skin_colour);
  put_opt(phys, "build", p.build);
  j["physical_characteristics"] = std::move(phys);
  put_opt(j, "special_move", p.special_move);
  put_opt(j, "socioeconomic_status", p.socioeconomic_status);
  put_opt(j, "sexual_orientation", p.sexual_orientation);
  put_opt(j, "religion", p.religion);
  for (const auto& [k, v] : p.extras.items()) j[k] = v;
  return j;
}

namespace {

std::string canonical_key(std::string_view key) {
  auto k = text::replace_all(text::snake_case(key), "color", "colour");
  if (k.starts_with("height")) return "height";
  if (k == "character_name" || k == "full_name" || k == "given_name") return "name";
  if (k == "physical_attributes" || k == "physical_traits" || k == "appearance") return "physical_characteristics";
  return k;
}

bool looks_like_profile(const json& obj) {
  if (!obj.is_object()) return false;
  std::size_t known = 0;
  static const std::vector<std::string> kKeys = {"name", "age", "hobbies", "occupation", "religion",
                                                 "personality_traits", "physical_characteristics"};
  for (const auto& [k, v] : obj.items())
    if (std::find(kKeys.begin(), kKeys.end(), canonical_key(k)) != kKeys.end()) ++known;
  return known >= 2;
}

std::optional<json> try_parse(std::string_view s) {
  auto j = json::parse(s.begin(), s.end(), nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  return j;
}

std::optional<json> extract_payload(std::string_view raw) {
  // Fenced block first.
  if (auto fence = raw.find("```"); fence != std::string_view::npos) {
    auto body_start = raw.find('\n', fence);
    auto close = body_start == std::string_view::npos ? std::string_view::npos : raw.find("```", body_start);
    if (close != std::string_view::npos) {
      if (auto j = try_parse(raw.substr(body_start + 1, close - body_start - 1))) return j;
    }
  }
  if (auto j = try_parse(raw)) return j;
  // Prose around the payload: try the widest bracketed span of each kind.
  std::vector<std::pair<char, char>> kinds = {{'[', ']'}, {'{', '}'}};
  auto a = raw.find('['), b = raw.find('{');
  if (b < a) std::swap(kinds[0], kinds[1]);
  for (auto [open, close] : kinds) {
    auto first = raw.find(open);
    auto last = raw.rfind(close);
    if (first == std::string_view::npos || last == std::string_view::npos || last < first) continue;
    if (auto j = try_parse(raw.substr(first, last - first + 1))) return j;
  }
  return std::nullopt;
}

std::string scalar_text(const json& v) {
  if (v.is_string()) return text::trim(v.get<std::string>());
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return format_double(v.get<double>());
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

struct FieldReader {
  CharacterProfile& p;

  void list(const json& v, std::vector<std::string>& out, const char* field) {
    out.clear();
    if (v.is_array()) {
      for (const auto& e : v) out.push_back(scalar_text(e));
    } else if (v.is_string()) {
      for (auto& part : text::split(v.get<std::string>(), ','))
        if (auto t = text::trim(part); !t.empty()) out.push_back(t);
    } else {
      p.diagnostics.push_back(fmt::format("{}: expected a list", field));
      return;
    }
    if (out.size() != kListLength)
      p.diagnostics.push_back(fmt::format("{}: expected {} entries, got {}", field, kListLength, out.size()));
  }

  void scalar(const json& v, std::optional<std::string>& out, const char* field) {
    if (v.is_null()) return;
    if (v.is_array() || v.is_object()) {
      p.diagnostics.push_back(fmt::format("{}: expected a single value", field));
      out = v.dump();
      return;
    }
    out = scalar_text(v);
  }

  void age(const json& v) {
    std::optional<long long> a;
    if (v.is_number_integer()) a = v.get<long long>();
    else if (v.is_number()) a = std::llround(v.get<double>());
    else if (v.is_string()) {
      static const std::regex kLeadingInt(R"(^\s*(\d+))");
      std::smatch m;
      std::string s = v.get<std::string>();
      if (std::regex_search(s, m, kLeadingInt)) a = std::stoll(m[1].str());
    }
    if (!a) {
      p.diagnostics.push_back("age: not an integer");
      return;
    }
    p.age = static_cast<int>(*a);
    if (*a <= 0) p.diagnostics.push_back("age: must be positive");
  }

  void height(const json& v) {
    if (v.is_number()) {
      p.height_ft = v.get<double>();
    } else if (v.is_string()) {
      auto raw = v.get<std::string>();
      if (auto ft = parse_height_ft(raw)) p.height_ft = *ft;
      else {
        p.height_raw = raw;
        p.diagnostics.push_back("height: cannot read '" + raw + "' as feet");
        return;
      }
    } else {
      p.height_raw = v.dump();
      p.diagnostics.push_back("height: unexpected value");
      return;
    }
    if (!(*p.height_ft > 0.0)) p.diagnostics.push_back("height: must be positive");
  }

  void field(const std::string& key, const json& v) {
    if (key == "name") p.name = scalar_text(v);
    else if (key == "age") age(v);
    else if (key == "personality_traits") list(v, p.personality_traits, "personality_traits");
    else if (key == "negative_traits") list(v, p.negative_traits, "negative_traits");
    else if (key == "hobbies") list(v, p.hobbies, "hobbies");
    else if (key == "occupation") scalar(v, p.occupation, "occupation");
    else if (key == "height") height(v);
    else if (key == "hair_colour") scalar(v, p.hair_colour, "hair_colour");
    else if (key == "eye_colour") scalar(v, p.eye_colour, "eye_colour");
    else if (key == "skin_colour") scalar(v, p.skin_colour, "skin_colour");
    else if (key == "build") scalar(v, p.build, "build");
    else if (key == "special_move") scalar(v, p.special_move, "special_move");
    else if (key == "socioeconomic_status") scalar(v, p.socioeconomic_status, "socioeconomic_status");
    else if (key == "sexual_orientation") scalar(v, p.sexual_orientation, "sexual_orientation");
    else if (key == "religion") scalar(v, p.religion, "religion");
    else p.extras[key] = v;
  }
};

CharacterProfile read_profile(const json& obj, const std::string& name_hint) {
  CharacterProfile p;
  FieldReader r{p};
  for (const auto& [k, v] : obj.items()) {
    auto key = canonical_key(k);
    if (key == "physical_characteristics" && v.is_object()) {
      for (const auto& [pk, pv] : v.items()) r.field(canonical_key(pk), pv);
    } else {
      r.field(key, v);
    }
  }
  if (p.name.empty()) p.name = name_hint;
  if (p.name.empty()) p.diagnostics.push_back("name: missing");
  if (!p.age) {
    if (std::none_of(p.diagnostics.begin(), p.diagnostics.end(), [](auto& d) { return d.starts_with("age"); }))
      p.diagnostics.push_back("age: missing");
  }
  static const std::vector<std::pair<const char*, std::size_t>> kLists = {
      {"personality_traits", 0}, {"negative_traits", 1}, {"hobbies", 2}};
  for (auto [field, idx] : kLists) {
    const auto& v = idx == 0 ? p.personality_traits : idx == 1 ? p.negative_traits : p.hobbies;
    bool reported = std::any_of(p.diagnostics.begin(), p.diagnostics.end(),
                                [&](auto& d) { return d.starts_with(field); });
    if (v.empty() && !reported) p.diagnostics.push_back(std::string(field) + ": missing");
  }
  if (!p.height_ft && !p.height_raw) p.diagnostics.push_back("height: missing");
  return p;
}

}  // namespace

ParseResult parse_profiles(std::string_view raw, std::span<const std::string> requested_names) {
  auto payload = extract_payload(raw);
  if (!payload) fail(ErrorCode::Parse, "response contains no parseable JSON payload");

  std::vector<std::pair<std::string, const json*>> objects;
  std::function<void(const json&, const std::string&)> collect = [&](const json& j, const std::string& hint) {
    if (j.is_array()) {
      for (const auto& e : j) collect(e, "");
    } else if (j.is_object()) {
      if (looks_like_profile(j)) {
        objects.emplace_back(hint, &j);
        return;
      }
      for (const auto& [k, v] : j.items())
        if (v.is_array() || v.is_object()) collect(v, v.is_object() ? k : "");
    }
  };
  collect(*payload, "");

  ParseResult out;
  if (objects.empty()) out.diagnostics.push_back("payload holds no profile objects");
  for (const auto& [hint, obj] : objects) {
    auto p = read_profile(*obj, hint);
    auto exact = std::find(requested_names.begin(), requested_names.end(), p.name);
    if (exact == requested_names.end()) {
      auto folded = std::find_if(requested_names.begin(), requested_names.end(), [&](const std::string& n) {
        return text::to_lower(text::trim(n)) == text::to_lower(text::trim(p.name));
      });
      if (folded != requested_names.end()) p.name = *folded;
      else if (!p.name.empty()) p.diagnostics.push_back("name: '" + p.name + "' was not requested");
    }
    out.profiles.push_back(std::move(p));
  }
  return out;
}

nlohmann::ordered_json to_store_record(const CharacterProfile& p) {
  nlohmann::ordered_json j;
  j["name"] = p.name;
  j["model_id"] = p.provenance.model_id;
  j["repeat"] = p.provenance.repeat;
  j["temperature"] = p.provenance.temperature;
  j["profile"] = print_profile(p);
  j["diagnostics"] = p.diagnostics;
  return j;
}

CharacterProfile from_store_record(const nlohmann::json& j) {
  try {
    std::string name = j.at("name").get<std::string>();
    auto parsed = read_profile(j.at("profile"), name);
    parsed.name = name;
    parsed.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
    parsed.provenance = {j.at("model_id").get<std::string>(), j.at("repeat").get<int>(),
                         j.at("temperature").get<double>()};
    return parsed;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("bad profile record: ") + e.what());
  }
}

}  // namespace gbias::genharness
