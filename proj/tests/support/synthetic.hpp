#pragma once

// Synthetic inputs shared by the unit and acceptance suites.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "common/random.hpp"
#include "corpus/corpus.hpp"
#include "profileanalysis/profileanalysis.hpp"

namespace gbias::testing {

inline const std::vector<std::string>& ethnicities() {
  static const std::vector<std::string> e = {"African", "Arab",     "Baltic",   "Chinese", "Dutch",  "English", "French",
                                             "German",  "Greek",    "Hispanic", "Hungarian", "Indian", "Israeli", "Italian",
                                             "Japanese", "Korean",  "Nordic",   "Slav",    "Thai",   "Turkish"};
  return e;
}

// Every gender x ethnicity pair, ethnicity-major.
inline std::vector<std::pair<std::string, corpus::Gender>> all_groups() {
  std::vector<std::pair<std::string, corpus::Gender>> out;
  for (const auto& e : ethnicities())
    for (auto g : {corpus::Gender::F, corpus::Gender::M}) out.emplace_back(e, g);
  return out;
}

enum class ProfileSignal {
  None,       // every field independent of the group
  Religion,   // religion names the group; everything else is noise
};

inline std::string pick(std::mt19937_64& rng, std::initializer_list<const char*> values) {
  return *(values.begin() + uniform_index(rng, values.size()));
}

// `per_group` profiles for each of the 40 groups. With shuffle_labels the
// group labels are permuted across profiles after generation.
inline std::vector<profileanalysis::LabeledProfile> synthetic_profiles(std::size_t per_group, std::uint64_t seed,
                                                                       ProfileSignal signal,
                                                                       bool shuffle_labels = false) {
  std::mt19937_64 rng(seed);
  std::vector<profileanalysis::LabeledProfile> out;
  auto groups = all_groups();
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    for (std::size_t i = 0; i < per_group; ++i) {
      profileanalysis::LabeledProfile lp;
      lp.ethnicity = groups[gi].first;
      lp.gender = groups[gi].second;
      auto& p = lp.profile;
      p.name = groups[gi].first + "_" + std::to_string(gi) + "_" + std::to_string(i);
      p.age = 18 + static_cast<int>(uniform_index(rng, 60));
      p.height_ft = 4.8 + 0.1 * static_cast<double>(uniform_index(rng, 19));
      auto trait = [&] { return pick(rng, {"kind", "curious", "patient", "bold", "witty", "loyal", "calm", "shy"}); };
      auto flaw = [&] { return pick(rng, {"stubborn", "impatient", "arrogant", "lazy", "moody", "vain"}); };
      auto hobby = [&] { return pick(rng, {"painting", "hiking", "chess", "cooking", "reading", "dancing", "poetry"}); };
      p.personality_traits = {trait(), trait(), trait()};
      p.negative_traits = {flaw(), flaw(), flaw()};
      p.hobbies = {hobby(), hobby(), hobby()};
      p.occupation = pick(rng, {"teacher", "engineer", "nurse", "chef", "lawyer", "farmer", "artist"});
      p.hair_colour = pick(rng, {"black", "brown", "blonde", "red", "grey"});
      p.eye_colour = pick(rng, {"brown", "blue", "green", "hazel"});
      p.skin_colour = pick(rng, {"fair", "olive", "tan", "brown", "dark"});
      p.build = pick(rng, {"slim", "athletic", "average", "stocky"});
      p.special_move = pick(rng, {"shadow step", "iron wall"});
      p.socioeconomic_status = pick(rng, {"working class", "middle class", "upper middle class", "wealthy"});
      p.sexual_orientation = pick(rng, {"heterosexual", "homosexual", "bisexual"});
      p.religion = signal == ProfileSignal::Religion
                       ? "faith of " + corpus::Group{lp.ethnicity, lp.gender, 0}.label()
                       : pick(rng, {"christianity", "islam", "buddhism", "hinduism", "judaism", "atheist"});
      out.push_back(std::move(lp));
    }
  }
  if (shuffle_labels) {
    std::vector<std::pair<std::string, corpus::Gender>> labels;
    for (const auto& lp : out) labels.emplace_back(lp.ethnicity, lp.gender);
    seeded_shuffle(labels, rng);
    for (std::size_t i = 0; i < out.size(); ++i) std::tie(out[i].ethnicity, out[i].gender) = labels[i];
  }
  return out;
}

}  // namespace gbias::testing
