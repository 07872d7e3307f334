#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace gbias::genharness {

struct Provenance {
  std::string model_id;
  int repeat = 0;
  double temperature = 1.0;

  bool operator==(const Provenance&) const = default;
};

inline constexpr std::size_t kListLength = 3;

struct CharacterProfile {
  std::string name;
  std::optional<int> age;
  std::vector<std::string> personality_traits;
  std::vector<std::string> negative_traits;
  std::vector<std::string> hobbies;
  std::optional<std::string> occupation;
  std::optional<double> height_ft;
  std::optional<std::string> height_raw;  // kept verbatim when it could not be read as feet
  std::optional<std::string> hair_colour;
  std::optional<std::string> eye_colour;
  std::optional<std::string> skin_colour;
  std::optional<std::string> build;
  std::optional<std::string> special_move;
  std::optional<std::string> socioeconomic_status;
  std::optional<std::string> sexual_orientation;
  std::optional<std::string> religion;
  nlohmann::json extras = nlohmann::json::object();  // unrecognised fields, keys normalised
  Provenance provenance;
  std::vector<std::string> diagnostics;

  bool valid() const { return diagnostics.empty(); }
  bool operator==(const CharacterProfile&) const = default;
};

// Reads "5.2 ft", "5'4\"", "5 ft 4 in", "165 cm" and bare numbers (feet).
std::optional<double> parse_height_ft(std::string_view s);

// Profile object in the prompt's field layout (nested physical_characteristics).
nlohmann::ordered_json print_profile(const CharacterProfile& p);

struct ParseResult {
  std::vector<CharacterProfile> profiles;
  std::vector<std::string> diagnostics;  // payload-level problems
};

// Strips markdown fences or surrounding prose, parses the JSON payload,
// normalises field names and validates each profile against the requested
// names. Throws Parse when no JSON payload can be recovered.
ParseResult parse_profiles(std::string_view raw, std::span<const std::string> requested_names);

// Profile store line: {"name", "model_id", "repeat", "temperature", "profile", "diagnostics"}.
nlohmann::ordered_json to_store_record(const CharacterProfile& p);
CharacterProfile from_store_record(const nlohmann::json& j);

}  // namespace gbias::genharness
