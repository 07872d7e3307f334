#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "corpus/corpus.hpp"
#include "genharness/profile.hpp"

namespace gbias::profileanalysis {

using genharness::CharacterProfile;

// Attribute families, in the order the elimination report lists them.
enum class FeatureGroup {
  Religion,
  HairColour,
  Height,
  SexualOrientation,
  Hobbies,
  Build,
  SocioeconomicStatus,
  SkinColour,
  EyeColour,
  PersonalityTraits,
  NegativeTraits,
  Age,
  Occupation,
};

inline constexpr std::array<FeatureGroup, 13> kAllFeatureGroups = {
    FeatureGroup::Religion,          FeatureGroup::HairColour, FeatureGroup::Height,
    FeatureGroup::SexualOrientation, FeatureGroup::Hobbies,    FeatureGroup::Build,
    FeatureGroup::SocioeconomicStatus, FeatureGroup::SkinColour, FeatureGroup::EyeColour,
    FeatureGroup::PersonalityTraits, FeatureGroup::NegativeTraits, FeatureGroup::Age,
    FeatureGroup::Occupation,
};

std::string_view to_string(FeatureGroup g);
std::optional<FeatureGroup> parse_feature_group(std::string_view s);

enum class Encoding { OneHot, RelativeFrequency };
Encoding encoding_of(FeatureGroup g);

// Normalised entries of one field: list fields give one entry per item,
// single fields at most one. Age becomes its decade "[40,50)", height its
// 0.25 ft bucket "[5.25,5.5)". Empty when the field is missing.
std::vector<std::string> feature_entries(const CharacterProfile& p, FeatureGroup g);

struct LabeledProfile {
  CharacterProfile profile;
  std::string ethnicity;
  corpus::Gender gender = corpus::Gender::F;
};

enum class Task { GenderEthnicity, Ethnicity, Gender };
inline constexpr std::array<Task, 3> kAllTasks = {Task::GenderEthnicity, Task::Ethnicity, Task::Gender};
std::string_view to_string(Task t);
std::string label_for(const LabeledProfile& p, Task t);

// Sorted by index, no duplicates.
struct SparseVector {
  std::vector<std::pair<std::uint32_t, double>> entries;
  double l1() const;
};

class FeatureSpace {
 public:
  struct Block {
    FeatureGroup group;
    Encoding encoding;
    std::vector<std::string> vocabulary;  // sorted; slot vocabulary.size() is the OOV slot
    std::size_t offset = 0;
    std::size_t width() const { return vocabulary.size() + 1; }
  };

  // Vocabularies come from `train` only.
  static FeatureSpace build(std::span<const CharacterProfile> train, std::span<const FeatureGroup> groups);

  // Missing fields give an all-zero block and a diagnostic.
  SparseVector encode(const CharacterProfile& p, std::vector<std::string>* diagnostics = nullptr) const;

  std::size_t dimension() const { return dimension_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  std::optional<std::size_t> index_of(FeatureGroup g, std::string_view entry) const;

 private:
  std::vector<Block> blocks_;
  std::size_t dimension_ = 0;
};

struct Split {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

// Per stratum floor(fraction * n) goes to train; the shortfall against
// round(fraction * N) is handed out one sample at a time to the strata with
// the largest fractional parts, never leaving a stratum without a test sample.
Split stratified_split(std::span<const std::string> strata, double train_fraction, std::uint64_t seed);

struct TrainOptions {
  double lambda = 1e-4;
  int epochs = 20;
  std::uint64_t seed = 0;
  bool track_objective = false;
};

struct LinearModel {
  std::vector<std::string> classes;  // sorted; class id = position
  std::size_t dimension = 0;
  std::vector<std::vector<double>> weights;  // per class
  std::vector<double> bias;
  TrainOptions options;
  std::vector<std::vector<double>> objective_trace;  // per class, per epoch

  std::vector<double> scores(const SparseVector& x) const;
  std::size_t predict(const SparseVector& x) const;  // argmax, ties to the lowest class id
};

// One-vs-rest linear SVMs trained with Pegasos: hinge loss with L2
// regularisation, step 1/(lambda t), projection onto the ball of radius
// 1/sqrt(lambda). The bias is an extra constant feature.
LinearModel train_linear_ovr(std::span<const SparseVector> x, std::span<const std::string> y, std::size_t dimension,
                             const TrainOptions& opt);

// Regularised hinge objective of one class's binary problem.
double ovr_objective(const LinearModel& m, std::size_t cls, std::span<const SparseVector> x,
                     std::span<const std::string> y);

struct Evaluation {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::vector<std::string> labels;                   // model classes, then unseen test labels
  std::vector<std::vector<std::size_t>> confusion;   // [true label][predicted class]
};

Evaluation evaluate_classifier(const LinearModel& m, std::span<const SparseVector> x, std::span<const std::string> y);

struct ExperimentOptions {
  double train_fraction = 0.7;
  std::uint64_t seed = 0;
  TrainOptions train;
};

struct TaskResult {
  Task task;
  Evaluation evaluation;
};

// Builds the space from the training split, trains and evaluates each task.
std::vector<TaskResult> classify(std::span<const LabeledProfile> profiles, std::span<const FeatureGroup> groups,
                                 std::span<const Task> tasks, const ExperimentOptions& opt);

struct EliminationRow {
  FeatureGroup removed;
  std::vector<std::size_t> correct;   // per task
  std::vector<long long> delta_correct;
  std::vector<double> delta_points;   // (accuracy without - accuracy with) * 100
};

struct EliminationReport {
  std::vector<Task> tasks;
  std::size_t test_size = 0;
  std::vector<std::size_t> baseline_correct;  // per task
  std::vector<double> baseline_accuracy;
  std::vector<EliminationRow> rows;
};

// Retrains without each feature group in turn, same split and seed.
EliminationReport feature_elimination(std::span<const LabeledProfile> profiles, std::span<const FeatureGroup> groups,
                                      std::span<const Task> tasks, const ExperimentOptions& opt);

using Distribution = std::map<std::string, double>;

// Jensen-Shannon divergence in bits.
double jsd(const Distribution& p, const Distribution& q);
// Per-word terms of jsd(p, q): 0.5 p log2(p/m) + 0.5 q log2(q/m), m = (p+q)/2.
std::map<std::string, double> jsd_contributions(const Distribution& p, const Distribution& q);

struct JsdShiftEntry {
  FeatureGroup feature;
  std::string word;
  double contribution = 0.0;
  std::vector<std::string> groups;
};

// For every gender x ethnicity group g, compares g's entry distribution with
// all other groups pooled. A word scores its largest contribution over the
// groups where it is over-represented; it lists its top-scoring group plus
// every group where its frequency is at least twice the pooled rest's.
std::vector<JsdShiftEntry> jsd_top_words(std::span<const LabeledProfile> profiles, FeatureGroup feature,
                                         std::size_t k = 10);

}  // namespace gbias::profileanalysis
