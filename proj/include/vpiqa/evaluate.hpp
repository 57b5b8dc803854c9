// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vpiqa/backend.hpp"
#include "vpiqa/data.hpp"
#include "vpiqa/metrics.hpp"
#include "vpiqa/prompt.hpp"

namespace vpiqa {

struct EvalReport {
  std::size_t n = 0;
  std::optional<double> srcc;  // empty when undefined (see error)
  std::optional<double> plcc;
  std::optional<LogisticPlcc> plcc_logistic;  // only when requested
  double mse = 0.0;
  std::string error;
  std::string prompt_checkpoint;
  std::string dataset_id;
  std::string backend;

  bool ok() const { return srcc.has_value() && plcc.has_value(); }
};

struct SamplePrediction {
  std::string id;
  double target = 0.0;
  double score = 0.0;
};

struct EvalOptions {
  bool logistic_plcc = false;
  unsigned workers = 1;
  std::string prompt_checkpoint;  // label recorded in the report
  std::string dataset_id;
};

struct EvalResult {
  EvalReport report;
  std::vector<SamplePrediction> predictions;  // sample order
};

/// Scores every sample in order (prompt applied, no augmentation) and
/// correlates scores with targets. A sample that cannot be scored aborts
/// with an error naming it.
EvalResult evaluate(const VisualPrompt& prompt, std::span<const Sample> samples, const FrozenScorer& scorer,
                    const EvalOptions& options = {});

/// `path,y,s` per sample.
std::string predictions_csv(std::span<const SamplePrediction> predictions);
/// Header plus one row: n,srcc,plcc,plcc_logistic,mse,dataset,backend,checkpoint,error.
std::string report_csv(const EvalReport& report);
/// One JSON object on a single line.
std::string report_json_line(const EvalReport& report);
/// Human-readable table.
std::string report_table(const EvalReport& report);

}  // namespace vpiqa
