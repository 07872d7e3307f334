#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "apx/apx.hpp"
#include "corpus/corpus.hpp"

namespace gbias::evalstats {

struct GoldLabel {
  std::string descriptor;
  std::string target;  // group label, or racial category at category level
};

// Scores seen from the evaluated candidate set (groups or categories).
struct CandidateTable {
  std::vector<std::string> candidates;
  std::vector<std::string> descriptors;
  std::vector<double> scores;  // row-major |C| x |D|; NaN = invalid

  double score(std::size_t c, std::size_t j) const { return scores[c * descriptors.size() + j]; }
};

CandidateTable group_level(const apx::BiasScoreTable& t);
// Category score = unweighted mean of the valid scores of its member groups.
CandidateTable category_level(const apx::BiasScoreTable& t, const corpus::CategoryMap& map);

// 1 + number of candidates ordered before `target` by ascending score, ties
// broken by lower candidate index. Invalid scores sort last.
std::size_t rank_of(const CandidateTable& t, std::size_t descriptor, std::size_t target);

double argmin_accuracy(const CandidateTable& t, std::span<const GoldLabel> gold);
double mean_reciprocal_rank(const CandidateTable& t, std::span<const GoldLabel> gold);

// One-tailed normal critical value: z with P(Z <= -z) = alpha.
double critical_z(double alpha);

enum class SurfaceMethod { ZScore, Permutation };

struct SurfaceOptions {
  double alpha = 0.01;
  SurfaceMethod method = SurfaceMethod::ZScore;
  std::size_t shuffles = 10000;  // permutation mode
  std::uint64_t seed = 0;        // permutation mode
  double max_invalid_share = 0.1;
};

struct SurfacedStereotype {
  std::string descriptor;
  std::string group;
  double zscore = 0.0;
  double score = 0.0;
};

struct SurfaceResult {
  std::vector<SurfacedStereotype> items;  // descriptor order, then group order
  double threshold = 0.0;                 // surfaced when zscore <= threshold
  std::vector<std::string> excluded;      // descriptors with too many invalid groups
  std::string sigma = "sample";
};

// Per descriptor z_i = (score_i - mean) / s with the sample standard
// deviation over its valid groups. ZScore mode surfaces z_i <= -critical_z;
// Permutation mode replaces the normal threshold by the alpha quantile of z
// pooled over tables whose rows were independently permuted across
// descriptors. A descriptor with s = 0 surfaces nothing.
SurfaceResult surface_stereotypes(const apx::BiasScoreTable& t, const SurfaceOptions& opt = {});

struct ValidationReport {
  double accuracy_ppl = 0.0;
  double accuracy_apx = 0.0;
  double mrr_ppl = 0.0;
  double mrr_apx = 0.0;
  std::size_t descriptors = 0;
  std::size_t candidates = 0;
};

ValidationReport validate(const CandidateTable& ppl, const CandidateTable& apx, std::span<const GoldLabel> gold);

// descriptor,group,score,zscore
std::string surfaced_csv(const SurfaceResult& r);
// group,descriptors ("; "-joined, sorted case-insensitively)
std::string surfaced_by_group_csv(const SurfaceResult& r);

}  // namespace gbias::evalstats
