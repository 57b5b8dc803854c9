// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

namespace vpiqa {

/// 1-based ranks; tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

/// Spearman rank correlation: Pearson correlation of average ranks.
/// Throws UndefinedCorrelation if either input is constant, InputError on
/// length mismatch, n < 2 or non-finite values.
double srcc(std::span<const double> preds, std::span<const double> targets);

/// Pearson linear correlation.
double plcc(std::span<const double> preds, std::span<const double> targets);

/// b2 + (b1 - b2) / (1 + exp(-(x - b3) / b4))
double logistic4(double x, const std::array<double, 4>& b);

struct LogisticPlcc {
  double value = 0.0;
  bool fitted = false;            // false: fit failed, value is the raw PLCC
  std::array<double, 4> params{};  // b1..b4 when fitted
  std::string note;
};

/// PLCC between targets and a least-squares 4-parameter logistic mapping of
/// preds onto targets.
LogisticPlcc plcc_with_logistic(std::span<const double> preds, std::span<const double> targets);

}  // namespace vpiqa
