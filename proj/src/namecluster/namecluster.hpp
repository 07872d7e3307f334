#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "corpus/corpus.hpp"

namespace gbias::namecluster {

// Row-major point set; every record has the same dimension.
struct EmbeddingSet {
  std::vector<std::string> names;
  std::vector<double> values;
  std::size_t dim = 0;

  std::size_t size() const { return names.size(); }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
};

// JSONL of {"name": ..., "vector": [...]} or CSV whose first column is the
// name and remaining columns numeric (a header row is detected and skipped).
EmbeddingSet load_embeddings(const std::string& path);
EmbeddingSet parse_embeddings_jsonl(std::string_view text, std::string_view origin = "<embeddings>");
EmbeddingSet parse_embeddings_csv(std::string_view text, std::string_view origin = "<embeddings>");

// Scales each row to unit L2 norm (zero rows are left unchanged).
void normalize_rows(EmbeddingSet& set);

double squared_distance(std::span<const double> a, std::span<const double> b);

struct KMeansOptions {
  std::size_t k = 100;
  std::size_t batch = 1024;
  std::size_t iters = 200;
  std::uint64_t seed = 0;
  bool track_inertia = false;  // record full-data inertia after every iteration
};

struct Cluster {
  std::vector<double> centroid;
  std::vector<std::size_t> member_indices;
  std::vector<std::string> members;
  double agreement = 0.0;    // share of members carrying the modal label
  std::string modal_label;   // group label, empty until labels are attached
};

struct KMeansResult {
  std::vector<Cluster> clusters;
  std::vector<int> assignment;  // per record
  double init_inertia = 0.0;
  double inertia = 0.0;
  std::vector<double> inertia_trace;
  std::size_t reseeded = 0;  // empty clusters repaired after the final pass
};

// k-means++ seeding (D^2 sampling). Returns k row-major centers.
std::vector<double> kmeanspp_init(const EmbeddingSet& set, std::size_t k, std::mt19937_64& rng);

// Nearest center per point (Euclidean; ties go to the lowest center index).
std::vector<int> assign_nearest(const EmbeddingSet& set, std::span<const double> centers, std::size_t k);
double inertia(const EmbeddingSet& set, std::span<const double> centers, std::span<const int> assignment);

// Mini-batch k-means with per-center learning rate 1/(points seen by the
// center). Empty clusters after the final assignment are reseeded from the
// farthest point of the largest cluster.
KMeansResult minibatch_kmeans(const EmbeddingSet& set, const KMeansOptions& opt);

struct NameLabel {
  std::string ethnicity;
  corpus::Gender gender = corpus::Gender::F;
  double probability = 1.0;  // optional confidence of the ethnicity label
};

using LabelMap = std::map<std::string, NameLabel>;

// CSV `name,ethnicity,gender[,probability]`.
LabelMap load_name_labels(const std::string& path);
LabelMap parse_name_labels(std::string_view text, std::string_view origin = "<labels>");

std::string group_label(const NameLabel& l);

// Fills agreement and modal label of every cluster. Throws when a clustered
// name has no label.
void attach_labels(std::vector<Cluster>& clusters, const LabelMap& labels);

struct SelectOptions {
  std::size_t per_group = corpus::kNamesPerGroup;
  double min_agreement = 0.5;
  std::uint64_t seed = 0;
  // Ethnicities whose sparse gender may be topped up with the most confident
  // labelled names of that gender regardless of cluster agreement.
  std::vector<std::string> opposite_gender_fill;
};

struct GroupSelection {
  std::string group;
  std::size_t from_clusters = 0;
  std::size_t from_fill = 0;
  std::size_t qualifying = 0;  // names available from qualifying clusters
};

struct Selection {
  std::vector<corpus::NameEntry> names;  // ordered by group, then sampled order
  std::vector<GroupSelection> groups;
  std::vector<std::string> shortfalls;  // groups that could not reach per_group
};

Selection select_group_names(const std::vector<Cluster>& clusters, const LabelMap& labels, const SelectOptions& opt);

}  // namespace gbias::namecluster
