#include "apx/apx.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "common/csv.hpp"
#include "common/error.hpp"
#include "common/io.hpp"

namespace gbias::apx {

namespace {
constexpr double kInvalid = std::numeric_limits<double>::quiet_NaN();
}

std::string_view to_string(Direction d) { return d == Direction::AsPrinted ? "as_printed" : "inverse"; }

std::optional<Direction> parse_direction(std::string_view s) {
  if (s == "as_printed") return Direction::AsPrinted;
  if (s == "inverse") return Direction::Inverse;
  return std::nullopt;
}

std::string_view to_string(Metric m) { return m == Metric::Apx ? "apx" : "ppl"; }

PplTable::PplTable(std::size_t templates, std::size_t groups, std::size_t descriptors)
    : templates_(templates), groups_(groups), descriptors_(descriptors),
      cells_(templates * groups * descriptors, kInvalid) {}

bool PplTable::valid(std::size_t t, std::size_t i, std::size_t j) const { return !std::isnan(get(t, i, j)); }

void PplTable::invalidate(std::size_t t, std::size_t i, std::size_t j) { set(t, i, j, kInvalid); }

double group_mean(const PplTable& table, std::size_t t, std::size_t i) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t j = 0; j < table.descriptors(); ++j) {
    if (!table.valid(t, i, j)) continue;
    sum += table.get(t, i, j);
    ++n;
  }
  if (n == 0) fail(ErrorCode::Validation, fmt::format("group {} has no valid cells in template {}", i, t));
  return sum / static_cast<double>(n);
}

double total_mean(const PplTable& table, std::size_t t) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < table.groups(); ++i)
    for (std::size_t j = 0; j < table.descriptors(); ++j) {
      if (!table.valid(t, i, j)) continue;
      sum += table.get(t, i, j);
      ++n;
    }
  if (n == 0) fail(ErrorCode::Validation, fmt::format("template {} has no valid cells", t));
  return sum / static_cast<double>(n);
}

std::vector<double> apx_adjust(const PplTable& table, std::size_t t, Direction direction) {
  const std::size_t G = table.groups(), D = table.descriptors();
  std::vector<double> out(G * D, kInvalid);
  double total = total_mean(table, t);
  if (!(total > 0.0)) fail(ErrorCode::Validation, fmt::format("template {}: total mean perplexity is zero", t));
  for (std::size_t i = 0; i < G; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < D; ++j) any = any || table.valid(t, i, j);
    if (!any) continue;
    double gm = group_mean(table, t, i);
    double ratio = direction == Direction::AsPrinted ? gm / total : total / gm;
    for (std::size_t j = 0; j < D; ++j)
      if (table.valid(t, i, j)) out[i * D + j] = table.get(t, i, j) * ratio;
  }
  return out;
}

PplTable aggregate_cells(std::span<const NameScore> scores, std::size_t templates, std::size_t groups,
                         std::size_t descriptors) {
  const std::size_t cells = templates * groups * descriptors;
  std::vector<double> sum(cells, 0.0);
  std::vector<std::size_t> ok(cells, 0), failed(cells, 0);
  for (const auto& s : scores) {
    if (s.template_index >= templates || s.group >= groups || s.descriptor >= descriptors)
      fail(ErrorCode::InvalidArgument, "name score outside the table");
    auto k = (s.template_index * groups + s.group) * descriptors + s.descriptor;
    if (s.ppl) {
      sum[k] += *s.ppl;
      ++ok[k];
    } else {
      ++failed[k];
    }
  }
  PplTable table(templates, groups, descriptors);
  for (std::size_t t = 0; t < templates; ++t)
    for (std::size_t i = 0; i < groups; ++i)
      for (std::size_t j = 0; j < descriptors; ++j) {
        auto k = (t * groups + i) * descriptors + j;
        auto total = ok[k] + failed[k];
        if (ok[k] == 0) continue;
        if (static_cast<double>(failed[k]) >= kMaxFailedShare * static_cast<double>(total) && failed[k] > 0) continue;
        table.set(t, i, j, sum[k] / static_cast<double>(ok[k]));
      }
  return table;
}

bool BiasScoreTable::valid(std::size_t i, std::size_t j) const { return !std::isnan(score(i, j)); }

std::optional<std::size_t> BiasScoreTable::find_descriptor(std::string_view d) const {
  for (std::size_t j = 0; j < descriptors.size(); ++j)
    if (descriptors[j] == d) return j;
  return std::nullopt;
}

std::optional<std::size_t> BiasScoreTable::find_group(std::string_view g) const {
  for (std::size_t i = 0; i < groups.size(); ++i)
    if (groups[i] == g) return i;
  return std::nullopt;
}

BiasScoreTable bias_scores(const PplTable& table, std::vector<std::string> group_labels,
                           std::vector<std::string> descriptor_labels, Metric metric, Direction direction) {
  const std::size_t T = table.templates(), G = table.groups(), D = table.descriptors();
  if (group_labels.size() != G || descriptor_labels.size() != D)
    fail(ErrorCode::InvalidArgument, "bias_scores: label counts do not match the table");
  if (T == 0 || G == 0 || D == 0) fail(ErrorCode::InvalidArgument, "bias_scores: empty table");

  std::vector<double> acc(G * D, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> m;
    if (metric == Metric::Apx) {
      m = apx_adjust(table, t, direction);
    } else {
      m.assign(G * D, kInvalid);
      for (std::size_t i = 0; i < G; ++i)
        for (std::size_t j = 0; j < D; ++j) m[i * D + j] = table.get(t, i, j);
    }
    double sum = 0.0;
    std::size_t n = 0;
    for (double v : m)
      if (!std::isnan(v)) {
        sum += v;
        ++n;
      }
    if (n == 0) fail(ErrorCode::Validation, fmt::format("template {} has no valid cells", t));
    double grand = sum / static_cast<double>(n);
    for (std::size_t k = 0; k < G * D; ++k) acc[k] += m[k] / grand;  // NaN propagates
  }

  BiasScoreTable out;
  out.groups = std::move(group_labels);
  out.descriptors = std::move(descriptor_labels);
  out.metric = metric;
  out.direction = direction;
  out.templates = T;
  out.scores.resize(G * D);
  for (std::size_t k = 0; k < G * D; ++k) out.scores[k] = acc[k] / static_cast<double>(T);
  return out;
}

BiasScoreTable bias_scores(std::span<const NameScore> scores, std::vector<std::string> group_labels,
                           std::vector<std::string> descriptor_labels, std::size_t templates, Metric metric,
                           Direction direction) {
  auto table = aggregate_cells(scores, templates, group_labels.size(), descriptor_labels.size());
  return bias_scores(table, std::move(group_labels), std::move(descriptor_labels), metric, direction);
}

std::string to_csv(const BiasScoreTable& t) {
  std::string out = "group,descriptor,score\n";
  for (std::size_t i = 0; i < t.groups.size(); ++i)
    for (std::size_t j = 0; j < t.descriptors.size(); ++j)
      out += csv::join({t.groups[i], t.descriptors[j], format_double(t.score(i, j))}) + "\n";
  return out;
}

nlohmann::ordered_json to_json(const BiasScoreTable& t) {
  nlohmann::ordered_json j;
  j["metadata"] = {{"metric", to_string(t.metric)},
                   {"normalization", t.normalization},
                   {"apx_direction", to_string(t.direction)},
                   {"templates", t.templates}};
  j["groups"] = t.groups;
  j["descriptors"] = t.descriptors;
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < t.groups.size(); ++i) {
    auto row = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < t.descriptors.size(); ++k) {
      if (t.valid(i, k)) row.push_back(t.score(i, k));
      else row.push_back(nullptr);
    }
    rows.push_back(std::move(row));
  }
  j["scores"] = std::move(rows);
  return j;
}

BiasScoreTable bias_table_from_json(const nlohmann::json& j) {
  try {
    BiasScoreTable t;
    const auto& meta = j.at("metadata");
    t.metric = meta.at("metric").get<std::string>() == "ppl" ? Metric::Ppl : Metric::Apx;
    auto dir = parse_direction(meta.at("apx_direction").get<std::string>());
    if (!dir) fail(ErrorCode::Parse, "bias table: unknown apx_direction");
    t.direction = *dir;
    t.templates = meta.at("templates").get<std::size_t>();
    t.normalization = meta.at("normalization").get<std::string>();
    t.groups = j.at("groups").get<std::vector<std::string>>();
    t.descriptors = j.at("descriptors").get<std::vector<std::string>>();
    const auto& rows = j.at("scores");
    if (rows.size() != t.groups.size()) fail(ErrorCode::Parse, "bias table: row count mismatch");
    for (const auto& row : rows) {
      if (row.size() != t.descriptors.size()) fail(ErrorCode::Parse, "bias table: column count mismatch");
      for (const auto& v : row) t.scores.push_back(v.is_null() ? kInvalid : v.get<double>());
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("bias table: ") + e.what());
  }
}

}  // namespace gbias::apx
