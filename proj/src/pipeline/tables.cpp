#include "pipeline/tables.hpp"

#include <cmath>

#include <fmt/format.h>

#include "common/csv.hpp"
#include "common/error.hpp"
#include "common/io.hpp"

namespace gbias::pipeline {

namespace {

double round1(double v) { return std::round(v * 10.0) / 10.0; }

}  // namespace

std::string format_percent(double fraction) { return fmt::format("{:.1f}", 100.0 * fraction); }

std::string format_signed_points(double points) {
  double r = round1(points);
  if (r == 0.0) return "0.0";
  return fmt::format("{:+.1f}", r);
}

std::string validation_table_csv(std::span<const ModelValidation> rows) {
  std::string out = "model,acc_ppl,acc_apx,mrr_ppl,mrr_apx\n";
  for (const auto& r : rows)
    out += csv::join({r.model, format_percent(r.report.accuracy_ppl), format_percent(r.report.accuracy_apx),
                      format_percent(r.report.mrr_ppl), format_percent(r.report.mrr_apx)}) +
           "\n";
  return out;
}

std::string accuracy_table_csv(std::span<const profileanalysis::Task> tasks, std::span<const double> chance,
                               std::span<const ModelAccuracy> rows) {
  if (chance.size() != tasks.size()) fail(ErrorCode::InvalidArgument, "accuracy table: one chance level per task");
  std::vector<std::string> header = {"model"};
  for (auto t : tasks) header.emplace_back(profileanalysis::to_string(t));
  std::string out = csv::join(header) + "\n";
  std::vector<std::string> line = {"Chance Level"};
  for (double c : chance) line.push_back(format_double(round1(100.0 * c)));
  out += csv::join(line) + "\n";
  for (const auto& r : rows) {
    if (r.accuracy.size() != tasks.size()) fail(ErrorCode::InvalidArgument, "accuracy table: one value per task");
    line = {r.model};
    for (double a : r.accuracy) line.push_back(format_percent(a));
    out += csv::join(line) + "\n";
  }
  return out;
}

std::string elimination_table_csv(std::size_t task_index, std::span<const ModelElimination> models) {
  std::vector<std::string> header = {"feature"};
  for (const auto& m : models) header.push_back(m.model);
  std::string out = csv::join(header) + "\n";
  if (models.empty()) return out;
  std::vector<std::string> line = {"Overall Accuracy (%)"};
  for (const auto& m : models) line.push_back(format_percent(m.report.baseline_accuracy.at(task_index)));
  out += csv::join(line) + "\n";
  const auto& first = models.front().report.rows;
  for (std::size_t r = 0; r < first.size(); ++r) {
    line = {std::string(profileanalysis::to_string(first[r].removed))};
    for (const auto& m : models) {
      if (m.report.rows.size() != first.size() || m.report.rows[r].removed != first[r].removed)
        fail(ErrorCode::InvalidArgument, "elimination table: models eliminated different features");
      line.push_back(format_signed_points(m.report.rows[r].delta_points.at(task_index)));
    }
    out += csv::join(line) + "\n";
  }
  return out;
}

std::string jsd_table_csv(std::span<const ModelJsd> models) {
  std::string out = "model,feature,rank,word,contribution,groups\n";
  for (const auto& m : models) {
    std::size_t rank = 0;
    std::string_view last_feature;
    for (const auto& e : m.entries) {
      auto feature = profileanalysis::to_string(e.feature);
      rank = feature == last_feature ? rank + 1 : 1;
      last_feature = feature;
      std::string groups;
      for (const auto& g : e.groups) groups += (groups.empty() ? "" : ", ") + g;
      out += csv::join({m.model, std::string(feature), std::to_string(rank), e.word, fmt::format("{:.6f}", e.contribution),
                        groups}) +
             "\n";
    }
  }
  return out;
}

}  // namespace gbias::pipeline
