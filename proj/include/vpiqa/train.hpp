// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vpiqa/backend.hpp"
#include "vpiqa/data.hpp"
#include "vpiqa/error.hpp"
#include "vpiqa/prompt.hpp"

namespace vpiqa {

struct LrPhase {
  int epochs = 1;
  double lr = 0.0;
  friend bool operator==(const LrPhase&, const LrPhase&) = default;
};

struct TrainConfig {
  std::size_t batch_size = 32;
  double lr = 60.0;
  int epochs = 25;
  /// Overrides (epochs, lr) when non-empty.
  std::vector<LrPhase> lr_schedule;
  std::uint64_t shuffle_seed = 0;
  /// Epochs between numbered snapshots (epoch_NNN.vpq). last.vpq is
  /// refreshed after every epoch.
  int checkpoint_every = 1;
  unsigned workers = 1;
  bool augment = true;

  void validate() const;
  std::vector<LrPhase> phases() const;
  int total_epochs() const;
  /// Learning rate for 0-based epoch index.
  double lr_at(int epoch) const;
};

/// Named recipes: "kadid" (32 / 60 / 25, plus 25 epochs at 20 for 30px
/// padding), "koniq" (4 / 60 / 25), "agiqa" (4 / 60 / 35), and "toy" for
/// the desk-scale scorer.
TrainConfig train_preset(std::string_view name, const PromptShape& shape);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double lr = 0.0;
  double train_mse = 0.0;
  double val_mse = 0.0;
  double val_srcc = 0.0;  // NaN when undefined
  double val_plcc = 0.0;  // NaN when undefined
  double wall_seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  /// Equality of everything except wall-clock time (NaN == NaN).
  bool same_trajectory(const TrainHistory& other) const;
};

std::string history_csv(const TrainHistory& history);
TrainHistory parse_history_csv(std::string_view text);

/// (1/N) sum (s_i - y_i)^2.
double mse_loss(std::span<const double> scores, std::span<const double> targets);

/// raw <- raw - lr * grad; plain SGD. Parameters are kept at float32
/// precision, the precision of the checkpoint format.
VisualPrompt sgd_step(const VisualPrompt& prompt, std::span<const double> grad, double lr);

struct BatchGradient {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d raw params, mean over the batch
  std::vector<double> scores;
};

/// MSE over `batch` and its gradient w.r.t. the prompt's raw parameters.
/// Per-sample gradients are reduced in sample order.
BatchGradient loss_and_gradient(const VisualPrompt& prompt, std::span<const Sample> batch, const FrozenScorer& scorer,
                                unsigned workers = 1);

/// Scores every sample with the prompt applied (no augmentation, no grad).
std::vector<double> predict(const VisualPrompt& prompt, std::span<const Sample> samples, const FrozenScorer& scorer,
                            unsigned workers = 1);

struct TrainOptions {
  /// When set: history.csv, best.vpq and last.vpq are written here.
  std::optional<std::filesystem::path> run_dir;
  /// Continue from run_dir/last.vpq and run_dir/history.csv when present.
  bool resume = false;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  VisualPrompt best;
  VisualPrompt last;
  TrainHistory history;
  int best_epoch = 0;
};

/// Thrown on a non-finite loss/gradient or a backend failure. Carries the
/// last prompt whose loss was finite; it has also been written to
/// run_dir/last.vpq when a run directory is in use.
class TrainingAborted : public Error {
 public:
  TrainingAborted(const std::string& what, VisualPrompt last_good, TrainHistory history)
      : Error(what), last_good_(std::move(last_good)), history_(std::move(history)) {}
  const VisualPrompt& last_good() const { return last_good_; }
  const TrainHistory& history() const { return history_; }

 private:
  VisualPrompt last_good_;
  TrainHistory history_;
};

/// Mini-batch SGD on the MSE objective. Each epoch shuffles with a seed
/// derived from (shuffle_seed, epoch), augments, steps, then evaluates on
/// `val`. Returns the prompt with the best validation SRCC (ties: lower
/// validation MSE).
TrainResult train_prompt(std::span<const Sample> train, std::span<const Sample> val, VisualPrompt prompt,
                         const FrozenScorer& scorer, const TrainConfig& cfg, const TrainOptions& options = {});

}  // namespace vpiqa
