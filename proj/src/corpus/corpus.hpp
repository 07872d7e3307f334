#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gbias::corpus {

enum class Gender { F, M };

std::string_view to_string(Gender g);
std::optional<Gender> parse_gender(std::string_view s);

struct NameEntry {
  std::string given_name;
  std::string ethnicity;
  Gender gender = Gender::F;
};

// Given-name length bounds, in code points.
inline constexpr std::size_t kMinNameLength = 2;
inline constexpr std::size_t kMaxNameLength = 14;
inline constexpr std::size_t kNamesPerGroup = 10;

struct Group {
  std::string ethnicity;
  Gender gender = Gender::F;
  int id = 0;

  // "Chinese Female"
  std::string label() const;
};

// Accepts "Chinese Female", "Chinese F" and "Chinese/F".
std::optional<std::pair<std::string, Gender>> parse_group_label(std::string_view label);

enum class LoadMode { Strict, Lax };

struct NameSet {
  std::vector<NameEntry> names;
  std::vector<Group> groups;       // sorted by (ethnicity, gender); id == index
  std::vector<int> group_of_name;  // parallel to `names`
  std::vector<std::string> rejected;  // row-level diagnostics for dropped rows
  std::vector<std::string> warnings;

  std::size_t ethnicity_count() const;
  std::optional<int> find_group(std::string_view ethnicity, Gender gender) const;
  std::optional<int> find_group(std::string_view label) const;
  std::vector<std::size_t> members(int group_id) const;
};

// Builds groups and indices from already-validated entries.
NameSet make_name_set(std::vector<NameEntry> entries);

// CSV with header `name,ethnicity,gender`. Rows violating NameEntry invariants
// are dropped with a diagnostic; malformed rows throw. Strict mode also
// requires exactly kNamesPerGroup names per group.
NameSet load_names(const std::string& path, LoadMode mode = LoadMode::Strict);
NameSet parse_names(std::string_view csv_text, LoadMode mode = LoadMode::Strict, std::string_view origin = "<names>");

enum class DescriptorSource { HolisticBias, Ghavami, StereoSet, Other };
std::string_view to_string(DescriptorSource s);
std::optional<DescriptorSource> parse_source(std::string_view s);

struct Descriptor {
  std::string text;
  DescriptorSource source = DescriptorSource::Other;
  std::optional<std::string> axis;
  std::optional<std::string> gold_group;
};

// CSV with header `descriptor,source[,axis[,gold_group]]`. Deduplicated by exact,
// case-sensitive text; the first occurrence wins.
std::vector<Descriptor> load_descriptors(const std::string& path);
std::vector<Descriptor> parse_descriptors(std::string_view csv_text, std::string_view origin = "<descriptors>");

struct Template {
  int id = 0;
  std::string pattern;
};

inline constexpr std::string_view kNamePlaceholder = "{name}";
inline constexpr std::string_view kDescriptorPlaceholder = "{descriptor}";

// One pattern per line; blank lines and lines starting with '#' are skipped.
std::vector<Template> load_templates(const std::string& path);
std::vector<Template> parse_templates(std::string_view text, std::string_view origin = "<templates>");
void validate_template(const Template& t);

struct Sentence {
  std::string id;
  std::string text;
  NameEntry name;
  std::string descriptor;
  int template_id = 0;
};

std::string sentence_id(const NameEntry& name, std::string_view descriptor, int template_id);
std::string realize(const Template& t, std::string_view name, std::string_view descriptor);

// Emits |names| x |descriptors| x |templates| sentences, template-major then
// descriptor then name, without materializing the corpus.
std::size_t expand_sentences(const NameSet& names, std::span<const Descriptor> descriptors,
                             std::span<const Template> templates, const std::function<void(const Sentence&)>& sink);

// Canonical JSONL line: {"id","text","name","ethnicity","gender","descriptor","template"}.
std::string to_jsonl(const Sentence& s);
Sentence sentence_from_json_line(std::string_view line);

// ethnicity -> racial category
struct CategoryMap {
  std::map<std::string, std::string> category_of;
  std::vector<std::string> categories;  // sorted, unique

  std::optional<std::string> category_for_label(std::string_view label) const;
};

CategoryMap load_category_map(const std::string& path);
CategoryMap parse_category_map(std::string_view csv_text, std::string_view origin = "<category map>");

struct ValidationSubset {
  NameSet names;
  std::vector<Descriptor> descriptors;  // gold_group rewritten to a category
  CategoryMap categories;
};

// Names restricted to mapped ethnicities; descriptors restricted to those
// with a gold label, which must resolve to one of the map's categories.
ValidationSubset validation_subset(const NameSet& names, std::span<const Descriptor> descriptors,
                                   const CategoryMap& map);

}  // namespace gbias::corpus
