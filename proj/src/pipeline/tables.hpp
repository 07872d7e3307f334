#pragma once

// Report tables. Percentages carry one decimal; signed deltas carry an
// explicit sign except for zero.

#include <span>
#include <string>
#include <vector>

#include "evalstats/evalstats.hpp"
#include "profileanalysis/profileanalysis.hpp"

namespace gbias::pipeline {

std::string format_percent(double fraction);
std::string format_signed_points(double points);

struct ModelValidation {
  std::string model;
  evalstats::ValidationReport report;
};

// model,acc_ppl,acc_apx,mrr_ppl,mrr_apx
std::string validation_table_csv(std::span<const ModelValidation> rows);

struct ModelAccuracy {
  std::string model;
  std::vector<double> accuracy;  // per task, fraction
};

// model,<task>... with a leading "Chance Level" row.
std::string accuracy_table_csv(std::span<const profileanalysis::Task> tasks, std::span<const double> chance,
                               std::span<const ModelAccuracy> rows);

struct ModelElimination {
  std::string model;
  profileanalysis::EliminationReport report;
};

// feature,<model>... : an "Overall Accuracy (%)" row, then one signed delta
// row per eliminated feature.
std::string elimination_table_csv(std::size_t task_index, std::span<const ModelElimination> models);

struct ModelJsd {
  std::string model;
  std::vector<profileanalysis::JsdShiftEntry> entries;
};

// model,feature,rank,word,contribution,groups
std::string jsd_table_csv(std::span<const ModelJsd> models);

}  // namespace gbias::pipeline
