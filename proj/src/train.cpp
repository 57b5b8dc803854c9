// SPDX-License-Identifier: Apache-2.0
#include "vpiqa/train.hpp"

#include <chrono>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "vpiqa/checkpoint.hpp"
#include "vpiqa/io.hpp"
#include "vpiqa/metrics.hpp"
#include "vpiqa/parallel.hpp"

namespace vpiqa {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train.batch_size: must be positive");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr: must be a finite non-negative number");
  if (lr_schedule.empty() && epochs < 1) throw ConfigError("train.epochs: must be at least 1");
  for (const auto& p : lr_schedule) {
    if (p.epochs < 1) throw ConfigError("train.lr_schedule: every phase needs at least 1 epoch");
    if (!(p.lr >= 0.0) || !std::isfinite(p.lr)) throw ConfigError("train.lr_schedule: learning rates must be finite and >= 0");
  }
  if (checkpoint_every < 1) throw ConfigError("train.checkpoint_every: must be at least 1");
}

std::vector<LrPhase> TrainConfig::phases() const {
  if (!lr_schedule.empty()) return lr_schedule;
  return {{epochs, lr}};
}

int TrainConfig::total_epochs() const {
  int total = 0;
  for (const auto& p : phases()) total += p.epochs;
  return total;
}

double TrainConfig::lr_at(int epoch) const {
  int start = 0;
  const auto ph = phases();
  for (const auto& p : ph) {
    if (epoch < start + p.epochs) return p.lr;
    start += p.epochs;
  }
  return ph.back().lr;
}

TrainConfig train_preset(std::string_view name, const PromptShape& shape) {
  TrainConfig cfg;
  if (name == "kadid") {
    cfg.batch_size = 32;
    cfg.lr = 60.0;
    cfg.epochs = 25;
    if (shape.kind == PromptKind::Padding && shape.size == 30) cfg.lr_schedule = {{25, 60.0}, {25, 20.0}};
  } else if (name == "koniq") {
    cfg.batch_size = 4;
    cfg.lr = 60.0;
    cfg.epochs = 25;
  } else if (name == "agiqa") {
    cfg.batch_size = 4;
    cfg.lr = 60.0;
    cfg.epochs = 35;
  } else if (name == "toy") {
    cfg.batch_size = 16;
    cfg.lr = 30.0;
    cfg.epochs = 30;
  } else {
    throw ConfigError("unknown training preset '" + std::string(name) + "'");
  }
  return cfg;
}

namespace {

bool same_real(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

bool TrainHistory::same_trajectory(const TrainHistory& other) const {
  if (epochs.size() != other.epochs.size()) return false;
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    const auto& a = epochs[i];
    const auto& b = other.epochs[i];
    if (a.epoch != b.epoch || !same_real(a.lr, b.lr) || !same_real(a.train_mse, b.train_mse) ||
        !same_real(a.val_mse, b.val_mse) || !same_real(a.val_srcc, b.val_srcc) || !same_real(a.val_plcc, b.val_plcc))
      return false;
  }
  return true;
}

std::string history_csv(const TrainHistory& history) {
  std::string out = "epoch,phase_lr,train_mse,val_mse,val_srcc,val_plcc\n";
  for (const auto& r : history.epochs) {
    out += std::to_string(r.epoch) + ',' + fmt_real(r.lr) + ',' + fmt_real(r.train_mse) + ',' + fmt_real(r.val_mse) +
           ',' + fmt_real(r.val_srcc) + ',' + fmt_real(r.val_plcc) + '\n';
  }
  return out;
}

TrainHistory parse_history_csv(std::string_view text) {
  TrainHistory h;
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != "epoch,phase_lr,train_mse,val_mse,val_srcc,val_plcc")
    throw IngestionError("history.csv: unexpected header");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 6) throw IngestionError("history.csv:" + std::to_string(lineno) + ": expected 6 fields");
    auto real = [&](const std::string& s) {
      double v = 0.0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size())
        throw IngestionError("history.csv:" + std::to_string(lineno) + ": bad number '" + s + "'");
      return v;
    };
    EpochRecord r;
    r.epoch = static_cast<int>(real(f[0]));
    r.lr = real(f[1]);
    r.train_mse = real(f[2]);
    r.val_mse = real(f[3]);
    r.val_srcc = real(f[4]);
    r.val_plcc = real(f[5]);
    h.epochs.push_back(r);
  }
  return h;
}

double mse_loss(std::span<const double> scores, std::span<const double> targets) {
  if (scores.size() != targets.size())
    throw InputError("mse_loss: " + std::to_string(scores.size()) + " scores vs " + std::to_string(targets.size()) +
                     " targets");
  if (scores.empty()) throw InputError("mse_loss: empty batch");
  double acc = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double r = scores[i] - targets[i];
    acc += r * r;
  }
  return acc / static_cast<double>(scores.size());
}

VisualPrompt sgd_step(const VisualPrompt& prompt, std::span<const double> grad, double lr) {
  if (grad.size() != prompt.size())
    throw ShapeError("gradient has " + std::to_string(grad.size()) + " entries, prompt has " +
                     std::to_string(prompt.size()));
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw InputError("learning rate must be finite and non-negative");
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!std::isfinite(grad[i])) throw InputError("non-finite gradient entry at parameter " + std::to_string(i));
  const auto raw = prompt.raw_params();
  std::vector<double> next(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = static_cast<float>(raw[i] - lr * grad[i]);
    if (!std::isfinite(v)) throw InputError("parameter " + std::to_string(i) + " overflowed float32 after the step");
    next[i] = v;
  }
  return prompt.with_params(std::move(next));
}

BatchGradient loss_and_gradient(const VisualPrompt& prompt, std::span<const Sample> batch, const FrozenScorer& scorer,
                                unsigned workers) {
  if (batch.empty()) throw InputError("loss_and_gradient: empty batch");
  const auto n = batch.size();
  std::vector<std::vector<double>> per_sample(n);
  BatchGradient out;
  out.scores.resize(n);
  parallel_for(n, workers, [&](std::size_t i) {
    const auto& s = batch[i];
    const auto composed = apply(prompt, s.image, s.id);
    auto scored = score_image(scorer, composed, true);
    out.scores[i] = scored.score.value;
    Image& g = *scored.grad_wrt_image;
    const double coeff = 2.0 * (scored.score.value - s.target) / static_cast<double>(n);
    for (auto& v : g.pixels) v *= coeff;
    per_sample[i] = apply_backward(prompt, s.image, g);
  });
  out.grad.assign(prompt.size(), 0.0);
  for (const auto& g : per_sample)
    for (std::size_t j = 0; j < g.size(); ++j) out.grad[j] += g[j];
  std::vector<double> targets(n);
  for (std::size_t i = 0; i < n; ++i) targets[i] = batch[i].target;
  out.loss = mse_loss(out.scores, targets);
  return out;
}

std::vector<double> predict(const VisualPrompt& prompt, std::span<const Sample> samples, const FrozenScorer& scorer,
                            unsigned workers) {
  std::vector<double> scores(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t i) {
    try {
      scores[i] = score_image(scorer, apply(prompt, samples[i].image, samples[i].id), false).score.value;
    } catch (const Error& e) {
      throw BackendError("sample '" + samples[i].id + "': " + e.what());
    }
  });
  return scores;
}

namespace {

struct Validation {
  double mse;
  double srcc;
  double plcc;
};

Validation validate_prompt(const VisualPrompt& prompt, std::span<const Sample> val, const FrozenScorer& scorer,
                           unsigned workers) {
  const auto scores = predict(prompt, val, scorer, workers);
  std::vector<double> targets(val.size());
  for (std::size_t i = 0; i < val.size(); ++i) targets[i] = val[i].target;
  Validation v{mse_loss(scores, targets), std::numeric_limits<double>::quiet_NaN(),
               std::numeric_limits<double>::quiet_NaN()};
  try {
    v.srcc = srcc(scores, targets);
    v.plcc = plcc(scores, targets);
  } catch (const Error&) {
    // Constant predictions or a single sample: left as NaN.
  }
  return v;
}

/// Higher SRCC wins; ties go to lower MSE. NaN SRCC never wins.
bool improves(const EpochRecord& candidate, const EpochRecord* best) {
  if (!best) return true;
  if (std::isnan(candidate.val_srcc)) return false;
  if (std::isnan(best->val_srcc)) return true;
  if (candidate.val_srcc != best->val_srcc) return candidate.val_srcc > best->val_srcc;
  return candidate.val_mse < best->val_mse;
}

}  // namespace

TrainResult train_prompt(std::span<const Sample> train, std::span<const Sample> val, VisualPrompt prompt,
                         const FrozenScorer& scorer, const TrainConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  if (train.empty()) throw InputError("training set is empty");
  if (val.empty()) throw InputError("validation set is empty");
  const auto& bcfg = scorer.config();
  if (prompt.shape().height != bcfg.input_height || prompt.shape().width != bcfg.input_width)
    throw ShapeError("prompt is " + std::to_string(prompt.shape().height) + "x" + std::to_string(prompt.shape().width) +
                     " but backend expects " + std::to_string(bcfg.input_height) + "x" +
                     std::to_string(bcfg.input_width));

  const auto& dir = options.run_dir;
  if (dir) std::filesystem::create_directories(*dir);

  TrainResult result{prompt, prompt, {}, 0};
  int start_epoch = 0;
  if (options.resume && dir && std::filesystem::exists(*dir / "last.vpq") &&
      std::filesystem::exists(*dir / "history.csv")) {
    result.last = load_checkpoint(*dir / "last.vpq");
    if (!(result.last.shape() == prompt.shape())) throw CheckpointError("last.vpq shape differs from the configured prompt");
    result.history = parse_history_csv(read_file_text(*dir / "history.csv"));
    start_epoch = static_cast<int>(result.history.epochs.size());
    const EpochRecord* best = nullptr;
    for (const auto& r : result.history.epochs)
      if (improves(r, best)) best = &r;
    if (best) {
      result.best_epoch = best->epoch;
      result.best = std::filesystem::exists(*dir / "best.vpq") ? load_checkpoint(*dir / "best.vpq") : result.last;
    } else {
      result.best = result.last;
    }
    prompt = result.last;
  }

  auto abort_with = [&](const std::string& why, const VisualPrompt& last_good) -> TrainingAborted {
    if (dir) {
      save_checkpoint(last_good, *dir / "last.vpq");
      write_text_atomic(*dir / "history.csv", history_csv(result.history));
    }
    return TrainingAborted(why, last_good, result.history);
  };

  const int total = cfg.total_epochs();
  const std::size_t n = train.size();
  std::vector<Sample> batch;
  batch.reserve(cfg.batch_size);

  for (int epoch = start_epoch; epoch < total; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = cfg.lr_at(epoch);
    const auto order = seeded_permutation(n, mix_seed(cfg.shuffle_seed, 2 * static_cast<std::uint64_t>(epoch)));
    AugmentRng rng(mix_seed(cfg.shuffle_seed, 2 * static_cast<std::uint64_t>(epoch) + 1));

    std::vector<double> sq_err(n, 0.0);  // by sample index, so the sum ignores shuffle order
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      batch.clear();
      for (std::size_t k = begin; k < end; ++k) {
        const auto& s = train[order[k]];
        batch.push_back({s.id, cfg.augment ? augment(s.image, rng) : s.image, s.target});
      }
      BatchGradient bg;
      try {
        bg = loss_and_gradient(prompt, batch, scorer, cfg.workers);
      } catch (const Error& e) {
        throw abort_with(std::string("backend failure in epoch ") + std::to_string(epoch + 1) + ": " + e.what(), prompt);
      }
      if (!std::isfinite(bg.loss)) throw abort_with("non-finite loss in epoch " + std::to_string(epoch + 1), prompt);
      try {
        prompt = sgd_step(prompt, bg.grad, lr);
      } catch (const InputError& e) {
        throw abort_with(std::string("optimizer step failed in epoch ") + std::to_string(epoch + 1) + ": " + e.what(),
                         prompt);
      }
      for (std::size_t k = begin; k < end; ++k) {
        const double e = bg.scores[k - begin] - batch[k - begin].target;
        sq_err[order[k]] = e * e;
      }
    }

    Validation v{};
    try {
      v = validate_prompt(prompt, val, scorer, cfg.workers);
    } catch (const Error& e) {
      throw abort_with(std::string("validation failed in epoch ") + std::to_string(epoch + 1) + ": " + e.what(), prompt);
    }
    EpochRecord rec{epoch + 1,
                    lr,
                    std::accumulate(sq_err.begin(), sq_err.end(), 0.0) / static_cast<double>(n),
                    v.mse,
                    v.srcc,
                    v.plcc,
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
    if (!std::isfinite(rec.val_mse)) throw abort_with("non-finite validation loss", prompt);

    const EpochRecord* best = nullptr;
    for (const auto& r : result.history.epochs)
      if (r.epoch == result.best_epoch) best = &r;
    result.history.epochs.push_back(rec);
    result.last = prompt;
    const bool is_best = improves(rec, best);
    if (is_best) {
      result.best = prompt;
      result.best_epoch = rec.epoch;
    }

    if (dir) {
      if (is_best) save_checkpoint(prompt, *dir / "best.vpq");
      save_checkpoint(prompt, *dir / "last.vpq");
      if ((epoch + 1) % cfg.checkpoint_every == 0) {
        char name[32];
        std::snprintf(name, sizeof name, "epoch_%03d.vpq", epoch + 1);
        save_checkpoint(prompt, *dir / name);
      }
      write_text_atomic(*dir / "history.csv", history_csv(result.history));
    }
    if (options.on_epoch) options.on_epoch(rec);
  }
  return result;
}

}  // namespace vpiqa
