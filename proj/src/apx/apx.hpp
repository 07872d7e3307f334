#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace gbias::apx {

// as_printed: APX = PPL * group_mean / total_mean
// inverse:    APX = PPL * total_mean / group_mean
enum class Direction { AsPrinted, Inverse };
enum class Metric { Ppl, Apx };

std::string_view to_string(Direction d);
std::optional<Direction> parse_direction(std::string_view s);
std::string_view to_string(Metric m);

// PPL(G_i, D_j) per template; quiet NaN marks an invalid cell.
class PplTable {
 public:
  PplTable(std::size_t templates, std::size_t groups, std::size_t descriptors);

  std::size_t templates() const { return templates_; }
  std::size_t groups() const { return groups_; }
  std::size_t descriptors() const { return descriptors_; }

  double get(std::size_t t, std::size_t i, std::size_t j) const { return cells_[index(t, i, j)]; }
  void set(std::size_t t, std::size_t i, std::size_t j, double v) { cells_[index(t, i, j)] = v; }
  bool valid(std::size_t t, std::size_t i, std::size_t j) const;
  void invalidate(std::size_t t, std::size_t i, std::size_t j);

 private:
  std::size_t index(std::size_t t, std::size_t i, std::size_t j) const {
    return (t * groups_ + i) * descriptors_ + j;
  }
  std::size_t templates_, groups_, descriptors_;
  std::vector<double> cells_;
};

// Mean of row i over its valid cells. Throws if the row has none.
double group_mean(const PplTable& table, std::size_t t, std::size_t i);
// Mean over all valid cells of template t. Throws if there are none.
double total_mean(const PplTable& table, std::size_t t);

// Row-major |G| x |D| adjusted matrix for template t; invalid cells (and
// rows without any valid cell) stay NaN.
std::vector<double> apx_adjust(const PplTable& table, std::size_t t, Direction direction = Direction::AsPrinted);

// One scored sentence reduced to its cell coordinates.
struct NameScore {
  std::size_t group = 0;
  std::size_t descriptor = 0;
  std::size_t template_index = 0;
  std::optional<double> ppl;  // empty for a failed sentence
};

// Failed sentences are dropped from a cell's mean only while they make up
// less than this share of the cell; otherwise the cell is invalid.
inline constexpr double kMaxFailedShare = 0.001;

// Mean PPL over the names of each (template, group, descriptor) cell.
PplTable aggregate_cells(std::span<const NameScore> scores, std::size_t templates, std::size_t groups,
                         std::size_t descriptors);

struct BiasScoreTable {
  std::vector<std::string> groups;
  std::vector<std::string> descriptors;
  std::vector<double> scores;  // row-major |G| x |D|, NaN = invalid
  Metric metric = Metric::Apx;
  Direction direction = Direction::AsPrinted;
  std::size_t templates = 0;
  std::string normalization = "template_grand_mean";

  double score(std::size_t i, std::size_t j) const { return scores[i * descriptors.size() + j]; }
  bool valid(std::size_t i, std::size_t j) const;
  std::optional<std::size_t> find_descriptor(std::string_view d) const;
  std::optional<std::size_t> find_group(std::string_view g) const;
};

// (b) adjust each template (skipped for Metric::Ppl), (c) divide each
// template's matrix by its grand mean, (d) average across templates.
BiasScoreTable bias_scores(const PplTable& table, std::vector<std::string> group_labels,
                           std::vector<std::string> descriptor_labels, Metric metric = Metric::Apx,
                           Direction direction = Direction::AsPrinted);

// Full pipeline starting from per-name sentence perplexities.
BiasScoreTable bias_scores(std::span<const NameScore> scores, std::vector<std::string> group_labels,
                           std::vector<std::string> descriptor_labels, std::size_t templates,
                           Metric metric = Metric::Apx, Direction direction = Direction::AsPrinted);

std::string to_csv(const BiasScoreTable& t);  // group,descriptor,score
nlohmann::ordered_json to_json(const BiasScoreTable& t);
BiasScoreTable bias_table_from_json(const nlohmann::json& j);

}  // namespace gbias::apx
