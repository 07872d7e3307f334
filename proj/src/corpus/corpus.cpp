#include "corpus/corpus.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include <fmt/format.h>
#include <json.hpp>

#include "common/csv.hpp"
#include "common/error.hpp"
#include "common/hash.hpp"
#include "common/io.hpp"
#include "common/text.hpp"

namespace gbias::corpus {

std::string_view to_string(Gender g) { return g == Gender::F ? "F" : "M"; }

std::optional<Gender> parse_gender(std::string_view s) {
  auto t = text::to_lower(text::trim(s));
  if (t == "f" || t == "female") return Gender::F;
  if (t == "m" || t == "male") return Gender::M;
  return std::nullopt;
}

std::string Group::label() const { return ethnicity + (gender == Gender::F ? " Female" : " Male"); }

std::optional<std::pair<std::string, Gender>> parse_group_label(std::string_view label) {
  std::string t = text::trim(label);
  auto pos = t.find_last_of(" /");
  if (pos == std::string::npos || pos == 0) return std::nullopt;
  auto gender = parse_gender(std::string_view(t).substr(pos + 1));
  if (!gender) return std::nullopt;
  auto eth = text::trim(std::string_view(t).substr(0, pos));
  if (eth.empty()) return std::nullopt;
  return std::make_pair(eth, *gender);
}

std::size_t NameSet::ethnicity_count() const {
  std::set<std::string_view> seen;
  for (const auto& g : groups) seen.insert(g.ethnicity);
  return seen.size();
}

std::optional<int> NameSet::find_group(std::string_view ethnicity, Gender gender) const {
  for (const auto& g : groups)
    if (g.ethnicity == ethnicity && g.gender == gender) return g.id;
  return std::nullopt;
}

std::optional<int> NameSet::find_group(std::string_view label) const {
  auto parsed = parse_group_label(label);
  if (!parsed) return std::nullopt;
  return find_group(parsed->first, parsed->second);
}

std::vector<std::size_t> NameSet::members(int group_id) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < names.size(); ++i)
    if (group_of_name[i] == group_id) out.push_back(i);
  return out;
}

NameSet make_name_set(std::vector<NameEntry> entries) {
  NameSet set;
  std::set<std::pair<std::string, Gender>> keys;
  for (const auto& e : entries) keys.emplace(e.ethnicity, e.gender);
  int id = 0;
  for (const auto& [eth, gender] : keys) set.groups.push_back(Group{eth, gender, id++});
  set.names = std::move(entries);
  set.group_of_name.reserve(set.names.size());
  for (const auto& e : set.names) set.group_of_name.push_back(*set.find_group(e.ethnicity, e.gender));
  return set;
}

NameSet parse_names(std::string_view csv_text, LoadMode mode, std::string_view origin) {
  auto rows = csv::parse(csv_text);
  if (rows.empty()) fail(ErrorCode::Parse, fmt::format("{}: empty names file", origin));
  const auto& header = rows.front().fields;
  if (header.size() < 3 || text::trim(header[0]) != "name" || text::trim(header[1]) != "ethnicity" ||
      text::trim(header[2]) != "gender")
    fail(ErrorCode::Parse, fmt::format("{}: expected header 'name,ethnicity,gender'", origin));

  std::vector<NameEntry> accepted;
  std::vector<std::string> rejected;
  std::set<std::tuple<std::string, std::string, Gender>> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != header.size())
      fail(ErrorCode::Parse, fmt::format("{}:{}: expected {} fields, got {}", origin, row.line, header.size(),
                                         row.fields.size()));
    NameEntry e;
    e.given_name = text::trim(row.fields[0]);
    e.ethnicity = text::trim(row.fields[1]);
    auto gender = parse_gender(row.fields[2]);
    auto len = text::utf8_length(e.given_name);
    if (len < kMinNameLength || len > kMaxNameLength) {
      rejected.push_back(fmt::format("{}:{}: name '{}' has {} characters (allowed {}..{})", origin, row.line,
                                     e.given_name, len, kMinNameLength, kMaxNameLength));
      continue;
    }
    if (e.ethnicity.empty()) {
      rejected.push_back(fmt::format("{}:{}: empty ethnicity for '{}'", origin, row.line, e.given_name));
      continue;
    }
    if (!gender) {
      rejected.push_back(fmt::format("{}:{}: gender '{}' is not F or M", origin, row.line, row.fields[2]));
      continue;
    }
    e.gender = *gender;
    if (!seen.emplace(e.given_name, e.ethnicity, e.gender).second) {
      rejected.push_back(fmt::format("{}:{}: duplicate name '{}' in group {}/{}", origin, row.line, e.given_name,
                                     e.ethnicity, to_string(e.gender)));
      continue;
    }
    accepted.push_back(std::move(e));
  }

  NameSet set = make_name_set(std::move(accepted));
  set.rejected = std::move(rejected);
  for (const auto& g : set.groups) {
    auto n = set.members(g.id).size();
    if (n == kNamesPerGroup) continue;
    auto msg = fmt::format("{}: group '{}' has {} names (expected {})", origin, g.label(), n, kNamesPerGroup);
    if (mode == LoadMode::Strict) fail(ErrorCode::Validation, msg);
    set.warnings.push_back(std::move(msg));
  }
  return set;
}

NameSet load_names(const std::string& path, LoadMode mode) { return parse_names(read_text_file(path), mode, path); }

std::string_view to_string(DescriptorSource s) {
  switch (s) {
    case DescriptorSource::HolisticBias: return "holisticbias";
    case DescriptorSource::Ghavami: return "ghavami";
    case DescriptorSource::StereoSet: return "stereoset";
    case DescriptorSource::Other: return "other";
  }
  return "other";
}

std::optional<DescriptorSource> parse_source(std::string_view s) {
  auto t = text::to_lower(text::trim(s));
  if (t == "holisticbias") return DescriptorSource::HolisticBias;
  if (t == "ghavami") return DescriptorSource::Ghavami;
  if (t == "stereoset") return DescriptorSource::StereoSet;
  if (t == "other") return DescriptorSource::Other;
  return std::nullopt;
}

std::vector<Descriptor> parse_descriptors(std::string_view csv_text, std::string_view origin) {
  auto rows = csv::parse(csv_text);
  if (rows.empty()) fail(ErrorCode::Parse, fmt::format("{}: empty descriptors file", origin));
  const auto& header = rows.front().fields;
  static const std::vector<std::string> kColumns = {"descriptor", "source", "axis", "gold_group"};
  if (header.size() < 2 || header.size() > kColumns.size())
    fail(ErrorCode::Parse, fmt::format("{}: expected header 'descriptor,source[,axis[,gold_group]]'", origin));
  for (std::size_t c = 0; c < header.size(); ++c)
    if (text::trim(header[c]) != kColumns[c])
      fail(ErrorCode::Parse, fmt::format("{}: header column {} should be '{}'", origin, c + 1, kColumns[c]));

  std::vector<Descriptor> out;
  std::set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != header.size())
      fail(ErrorCode::Parse, fmt::format("{}:{}: expected {} fields, got {}", origin, row.line, header.size(),
                                         row.fields.size()));
    Descriptor d;
    d.text = text::trim(row.fields[0]);
    if (d.text.empty()) fail(ErrorCode::Validation, fmt::format("{}:{}: empty descriptor text", origin, row.line));
    auto source = parse_source(row.fields[1]);
    if (!source)
      fail(ErrorCode::Validation, fmt::format("{}:{}: unknown source '{}'", origin, row.line, row.fields[1]));
    d.source = *source;
    if (header.size() > 2) {
      auto axis = text::trim(row.fields[2]);
      if (!axis.empty()) d.axis = axis;
    }
    if (header.size() > 3) {
      auto gold = text::trim(row.fields[3]);
      if (!gold.empty()) d.gold_group = gold;
    }
    if (seen.insert(d.text).second) out.push_back(std::move(d));
  }
  return out;
}

std::vector<Descriptor> load_descriptors(const std::string& path) {
  return parse_descriptors(read_text_file(path), path);
}

void validate_template(const Template& t) {
  auto names = text::count_occurrences(t.pattern, kNamePlaceholder);
  auto descs = text::count_occurrences(t.pattern, kDescriptorPlaceholder);
  if (names != 1 || descs != 1)
    fail(ErrorCode::Validation,
         fmt::format("template {} '{}' must contain exactly one {} and one {} (found {} and {})", t.id, t.pattern,
                     kNamePlaceholder, kDescriptorPlaceholder, names, descs));
}

std::vector<Template> parse_templates(std::string_view content, std::string_view origin) {
  std::vector<Template> out;
  for (auto& raw : text::split(content, '\n')) {
    auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    Template t{static_cast<int>(out.size()), line};
    validate_template(t);
    out.push_back(std::move(t));
  }
  if (out.empty()) fail(ErrorCode::Validation, fmt::format("{}: no templates", origin));
  return out;
}

std::vector<Template> load_templates(const std::string& path) { return parse_templates(read_text_file(path), path); }

std::string sentence_id(const NameEntry& name, std::string_view descriptor, int template_id) {
  return hash_hex({name.given_name, name.ethnicity, to_string(name.gender), descriptor, std::to_string(template_id)});
}

std::string realize(const Template& t, std::string_view name, std::string_view descriptor) {
  std::string out = t.pattern;
  auto npos = out.find(kNamePlaceholder);
  out.replace(npos, kNamePlaceholder.size(), name);
  auto dpos = out.find(kDescriptorPlaceholder);
  out.replace(dpos, kDescriptorPlaceholder.size(), descriptor);
  return out;
}

std::size_t expand_sentences(const NameSet& names, std::span<const Descriptor> descriptors,
                             std::span<const Template> templates, const std::function<void(const Sentence&)>& sink) {
  if (names.names.empty()) fail(ErrorCode::InvalidArgument, "expand: no names");
  if (descriptors.empty()) fail(ErrorCode::InvalidArgument, "expand: no descriptors");
  if (templates.empty()) fail(ErrorCode::InvalidArgument, "expand: no templates");
  for (const auto& t : templates) validate_template(t);

  std::size_t count = 0;
  Sentence s;
  for (const auto& t : templates) {
    for (const auto& d : descriptors) {
      for (const auto& n : names.names) {
        s.name = n;
        s.descriptor = d.text;
        s.template_id = t.id;
        s.text = realize(t, n.given_name, d.text);
        s.id = sentence_id(n, d.text, t.id);
        sink(s);
        ++count;
      }
    }
  }
  return count;
}

std::string to_jsonl(const Sentence& s) {
  nlohmann::ordered_json j;
  j["id"] = s.id;
  j["text"] = s.text;
  j["name"] = s.name.given_name;
  j["ethnicity"] = s.name.ethnicity;
  j["gender"] = to_string(s.name.gender);
  j["descriptor"] = s.descriptor;
  j["template"] = s.template_id;
  return j.dump();
}

Sentence sentence_from_json_line(std::string_view line) {
  try {
    auto j = nlohmann::json::parse(line);
    Sentence s;
    s.id = j.at("id").get<std::string>();
    s.text = j.at("text").get<std::string>();
    s.name.given_name = j.at("name").get<std::string>();
    s.name.ethnicity = j.at("ethnicity").get<std::string>();
    auto g = parse_gender(j.at("gender").get<std::string>());
    if (!g) fail(ErrorCode::Parse, "sentence record has invalid gender");
    s.name.gender = *g;
    s.descriptor = j.at("descriptor").get<std::string>();
    s.template_id = j.at("template").get<int>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("bad sentence record: ") + e.what());
  }
}

std::optional<std::string> CategoryMap::category_for_label(std::string_view label) const {
  std::string t = text::trim(label);
  if (std::binary_search(categories.begin(), categories.end(), t)) return t;
  if (auto it = category_of.find(t); it != category_of.end()) return it->second;
  if (auto g = parse_group_label(t)) {
    if (auto it = category_of.find(g->first); it != category_of.end()) return it->second;
  }
  return std::nullopt;
}

CategoryMap parse_category_map(std::string_view csv_text, std::string_view origin) {
  auto rows = csv::parse(csv_text);
  if (rows.empty() || rows.front().fields.size() != 2 || text::trim(rows.front().fields[0]) != "ethnicity" ||
      text::trim(rows.front().fields[1]) != "category")
    fail(ErrorCode::Parse, fmt::format("{}: expected header 'ethnicity,category'", origin));
  CategoryMap map;
  std::set<std::string> cats;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != 2)
      fail(ErrorCode::Parse, fmt::format("{}:{}: expected 2 fields", origin, row.line));
    auto eth = text::trim(row.fields[0]);
    auto cat = text::trim(row.fields[1]);
    if (eth.empty() || cat.empty())
      fail(ErrorCode::Validation, fmt::format("{}:{}: empty ethnicity or category", origin, row.line));
    auto [it, inserted] = map.category_of.emplace(eth, cat);
    if (!inserted && it->second != cat)
      fail(ErrorCode::Validation, fmt::format("{}:{}: ethnicity '{}' mapped to both '{}' and '{}'", origin, row.line,
                                              eth, it->second, cat));
    cats.insert(cat);
  }
  map.categories.assign(cats.begin(), cats.end());
  return map;
}

CategoryMap load_category_map(const std::string& path) { return parse_category_map(read_text_file(path), path); }

ValidationSubset validation_subset(const NameSet& names, std::span<const Descriptor> descriptors,
                                   const CategoryMap& map) {
  ValidationSubset out;
  out.categories = map;
  std::vector<NameEntry> kept;
  for (const auto& n : names.names)
    if (map.category_of.contains(n.ethnicity)) kept.push_back(n);
  if (kept.empty()) fail(ErrorCode::Validation, "validation subset: no names belong to a mapped ethnicity");
  out.names = make_name_set(std::move(kept));

  for (const auto& d : descriptors) {
    if (!d.gold_group) continue;
    auto cat = map.category_for_label(*d.gold_group);
    if (!cat)
      fail(ErrorCode::Validation, fmt::format("validation subset: descriptor '{}' has gold label '{}' outside the "
                                              "mapped categories",
                                              d.text, *d.gold_group));
    Descriptor v = d;
    v.gold_group = *cat;
    out.descriptors.push_back(std::move(v));
  }
  if (out.descriptors.empty()) fail(ErrorCode::Validation, "validation subset: no descriptors carry a gold label");
  return out;
}

}  // namespace gbias::corpus
