// SPDX-License-Identifier: Apache-2.0
// Desk-scale acceptance checks. Run with --criterion N for one, or with no
// arguments for all. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>

#include "oracles.hpp"
#include "vpiqa/checkpoint.hpp"
#include "vpiqa/io.hpp"
#include "vpiqa/metrics.hpp"
#include "vpiqa/scoring.hpp"
#include "vpiqa/synthetic.hpp"
#include "vpiqa/toy_scorer.hpp"
#include "vpiqa/train.hpp"

using namespace vpiqa;

namespace {

// Tolerances and limits.
constexpr double kC1Seconds = 1.0;
constexpr double kC2GradRel = 1e-6;
constexpr double kC2Step = 1e-6;
constexpr double kC2Seconds = 5.0;
constexpr double kC3GradRel = 1e-3;
constexpr double kC3Step = 1e-4;
constexpr double kC3Seconds = 30.0;
constexpr double kC4LossGap = 1e-3;
constexpr double kC4GridStep = 1e-3;
constexpr double kC4Seconds = 60.0;
constexpr double kC5MseRatio = 0.5;
constexpr double kC5MinSrcc = 0.9;
constexpr double kC5PinRel = 1e-6;
constexpr double kC5Seconds = 300.0;
constexpr double kC6MetricAbs = 1e-9;
constexpr double kC6AffineAbs = 1e-12;
constexpr double kC6Seconds = 10.0;

// Values pinned from the first verified run (toy preset, default synthetic
// dataset, ratio_80_10_10 split with seed 0, zero full-overlay start).
constexpr double kPinBaselineValMse = 0.087037579839109827;
constexpr double kPinBaselineValSrcc = 0.91855883845548159;

struct Report {
  bool ok = true;
  std::string detail;

  void check(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string f(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

PromptShape random_shape(std::mt19937_64& rng, int h, int w) {
  switch (rng() % 4) {
    case 0: return PromptShape::padding(1 + static_cast<int>(rng() % ((std::min(h, w) - 1) / 2)), h, w);
    case 1: return PromptShape::patch_center(1 + static_cast<int>(rng() % std::min(h, w)), h, w);
    case 2: return PromptShape::patch_top_left(1 + static_cast<int>(rng() % std::min(h, w)), h, w);
    default: return PromptShape::full_overlay(h, w);
  }
}

// 1. Parameter counts.
Report criterion1() {
  Report r;
  struct Row {
    const char* name;
    PromptShape shape;
    std::size_t published;
  };
  const Row rows[] = {
      {"overlay 448", PromptShape::full_overlay(448, 448), 602112},
      {"padding S=30", PromptShape::padding(30, 448, 448), 155880},
      {"patch S=30", PromptShape::patch_center(30, 448, 448), 2700},
      {"patch S=10", PromptShape::patch_top_left(10, 448, 448), 300},
  };
  for (const auto& row : rows) {
    const auto got = param_count(row.shape);
    const auto cells = oracle::mask_count(row.shape);
    r.check(got == cells, std::string(row.name) + ": count " + std::to_string(got) + " != mask " +
                              std::to_string(cells));
    r.check(got == row.published, std::string(row.name) + ": count " + std::to_string(got) + " != table value " +
                                      std::to_string(row.published) + " (mask has " + std::to_string(cells) +
                                      " cells; 3*2S(W+H-S) counts the four SxS corners twice)");
  }
  std::mt19937_64 rng(101);
  int mismatches = 0;
  for (int t = 0; t < 200; ++t) {
    const int h = 3 + static_cast<int>(rng() % 100), w = 3 + static_cast<int>(rng() % 100);
    const auto s = random_shape(rng, h, w);
    mismatches += param_count(s) != oracle::mask_count(s);
  }
  r.check(mismatches == 0, std::to_string(mismatches) + "/200 random shapes disagree with the mask count");
  if (r.ok) r.note("4 table values, 200 random shapes");
  return r;
}

// 2. Score formula properties and gradient.
Report criterion2() {
  Report r;
  std::mt19937_64 rng(202);
  int range_bad = 0, shift_bad = 0, mono_bad = 0, swap_bad = 0;
  double worst_shift = 0, worst_swap = 0;
  for (int t = 0; t < 10000; ++t) {
    const std::size_t v = 2 + rng() % 31;
    std::uniform_real_distribution<double> u(-8.0, 8.0);
    LogitVector l;
    l.values.resize(v);
    for (auto& x : l.values) x = u(rng);
    std::vector<TokenId> ids(v);
    std::iota(ids.begin(), ids.end(), 0u);
    std::shuffle(ids.begin(), ids.end(), rng);
    const std::size_t np = 1 + rng() % (v - 1), nn = 1 + rng() % (v - np);
    TokenSets sets;
    sets.positive.assign(ids.begin(), ids.begin() + np);
    sets.negative.assign(ids.begin() + np, ids.begin() + np + nn);

    const double s = quality_score(l, sets).value;
    range_bad += !(s > 0.0 && s < 1.0);

    LogitVector shifted = l;
    const double c = std::uniform_real_distribution<double>(-100.0, 100.0)(rng);
    for (auto& x : shifted.values) x += c;
    const double ds = std::fabs(quality_score(shifted, sets).value - s);
    worst_shift = std::max(worst_shift, ds);
    shift_bad += ds > 1e-12;

    // raising a positive logit never lowers s; raising a negative one never raises it
    LogitVector up = l;
    up.values[sets.positive[rng() % np]] += 0.5;
    LogitVector down = l;
    down.values[sets.negative[rng() % nn]] += 0.5;
    mono_bad += !(quality_score(up, sets).value > s) || !(quality_score(down, sets).value < s);

    const double sw = quality_score(l, sets.swapped()).value;
    worst_swap = std::max(worst_swap, std::fabs(sw - (1.0 - s)));
    swap_bad += std::fabs(sw - (1.0 - s)) > 1e-12;

    if (t < 100) {
      std::vector<double> g = quality_score_gradient(l, sets);
      // extended-precision differences; saturated scores have gradients near 1e-7
      std::vector<double> fd(v);
      std::vector<double> x = l.values;
      for (std::size_t i = 0; i < v; ++i) {
        x[i] = l.values[i] + kC2Step;
        const long double hi = oracle::quality(x, sets.positive, sets.negative);
        x[i] = l.values[i] - kC2Step;
        const long double lo = oracle::quality(x, sets.positive, sets.negative);
        x[i] = l.values[i];
        fd[i] = static_cast<double>((hi - lo) / (2.0L * kC2Step));
      }
      const double rel = oracle::rel_error(g, fd);
      if (!(rel < kC2GradRel)) {
        r.check(false, "gradient case " + std::to_string(t) + " rel " + f("%.2e", rel));
      }
    }
  }
  r.check(range_bad == 0, std::to_string(range_bad) + " scores outside (0,1)");
  r.check(shift_bad == 0, std::to_string(shift_bad) + " shift violations (worst " + f("%.1e", worst_shift) + ")");
  r.check(mono_bad == 0, std::to_string(mono_bad) + " monotonicity violations");
  r.check(swap_bad == 0, std::to_string(swap_bad) + " swap violations (worst " + f("%.1e", worst_swap) + ")");
  if (r.ok)
    r.note("10000 vectors; worst shift " + f("%.1e", worst_shift) + ", worst swap " + f("%.1e", worst_swap) +
           "; 100 gradients");
  return r;
}

// 3. End-to-end gradient of the MSE objective.
Report criterion3() {
  Report r;
  std::mt19937_64 rng(303);
  const ToyScorer toy;
  std::vector<Sample> batch;
  for (int i = 0; i < 4; ++i)
    batch.push_back({"b" + std::to_string(i), oracle::smooth_safe_image(rng, 32, 32, 0.06, 0.01), 0.55 + 0.1 * i});
  // prompt values stay well inside the |difference| and clamp margins
  for (const auto& s : {PromptShape::padding(4, 32, 32), PromptShape::patch_center(8, 32, 32),
                        PromptShape::patch_top_left(8, 32, 32), PromptShape::full_overlay(32, 32)}) {
    const auto raw = oracle::random_params(rng, param_count(s), 0.02);
    const auto analytic = loss_and_gradient(VisualPrompt(s, raw), batch, toy).grad;
    auto loss = [&](const std::vector<double>& q) { return loss_and_gradient(VisualPrompt(s, q), batch, toy).loss; };
    const double rel = oracle::rel_error(analytic, oracle::central_diff(loss, raw, kC3Step));
    r.check(rel < kC3GradRel, std::string(to_string(s.kind)) + " rel " + f("%.2e", rel));
    r.note(std::string(to_string(s.kind)) + " " + f("%.1e", rel));
  }
  return r;
}

// 4. One-parameter brightness subspace: gradient descent vs grid search.
Report criterion4() {
  Report r;
  const auto data = make_blur_dataset({});
  const std::vector<Sample> train(data.samples.begin(), data.samples.begin() + 40);
  const ToyScorer toy;
  const auto shape = PromptShape::full_overlay(32, 32);
  const std::size_t n = param_count(shape);

  // Grid oracle: composed = clamp(x + b, 0, 1) for b in [-1, 1].
  auto grid_loss = [&](double b) {
    double acc = 0.0;
    for (const auto& s : train) {
      Image y = s.image;
      for (auto& v : y.pixels) v = std::clamp(v + b, 0.0, 1.0);
      const double e = toy.score(y, false).score.value - s.target;
      acc += e * e;
    }
    return acc / static_cast<double>(train.size());
  };
  double grid_min = 1e9, grid_arg = 0;
  const int steps = static_cast<int>(std::lround(2.0 / kC4GridStep));
  for (int i = 0; i <= steps; ++i) {
    const double b = -1.0 + i * kC4GridStep;
    const double l = grid_loss(b);
    if (l < grid_min) {
      grid_min = l;
      grid_arg = b;
    }
  }

  // Full-batch gradient descent on the tied raw parameter theta.
  double theta = 0.0;
  // the loss is flat for brightness below about -0.55, so steps must stay short
  const double lr = 0.1;
  double loss = 0.0;
  for (int it = 0; it < 300; ++it) {
    const auto bg = loss_and_gradient(VisualPrompt(shape, std::vector<double>(n, theta)), train, toy);
    loss = bg.loss;
    theta -= lr * std::accumulate(bg.grad.begin(), bg.grad.end(), 0.0);
  }
  loss = loss_and_gradient(VisualPrompt(shape, std::vector<double>(n, theta)), train, toy).loss;
  const double gap = loss - grid_min;
  r.check(gap <= kC4LossGap, "endpoint loss " + f("%.6f", loss) + " vs grid minimum " + f("%.6f", grid_min));
  r.note("GD brightness " + f("%.4f", std::tanh(theta)) + " loss " + f("%.6f", loss) + "; grid " +
         f("%.3f", grid_arg) + " loss " + f("%.6f", grid_min) + "; gap " + f("%.1e", gap));
  return r;
}

std::vector<Sample> pick(const BlurDataset& d, const SampleManifest& m) {
  std::vector<Sample> out;
  for (const auto& e : m.entries)
    for (const auto& s : d.samples)
      if (s.id == e.image_ref) out.push_back(s);
  return out;
}

// 5. Convergence on the synthetic blur dataset.
Report criterion5() {
  Report r;
  const auto data = make_blur_dataset({});
  const auto parts = split(data.manifest, {SplitPolicy::Ratio80_10_10, 0, {}});
  const auto train = pick(data, parts.train), val = pick(data, parts.val);
  const ToyScorer toy;
  const auto shape = PromptShape::full_overlay(32, 32);
  const auto zero = create_prompt(shape);

  const auto base_scores = predict(zero, val, toy);
  std::vector<double> targets;
  for (const auto& s : val) targets.push_back(s.target);
  const double base_mse = mse_loss(base_scores, targets);
  const double base_srcc = srcc(base_scores, targets);
  r.check(std::fabs(base_mse - kPinBaselineValMse) <= kC5PinRel * kPinBaselineValMse,
          "baseline val MSE " + f("%.12f", base_mse) + " != pinned " + f("%.12f", kPinBaselineValMse));
  r.check(std::fabs(base_srcc - kPinBaselineValSrcc) <= kC5PinRel,
          "baseline val SRCC " + f("%.12f", base_srcc) + " != pinned " + f("%.12f", kPinBaselineValSrcc));

  const auto cfg = train_preset("toy", shape);
  const auto res = train_prompt(train, val, zero, toy, cfg);
  const auto& best = res.history.epochs.at(res.best_epoch - 1);
  const auto& first = res.history.epochs.front();
  const auto& last = res.history.epochs.back();
  r.check(best.val_mse <= kC5MseRatio * base_mse,
          "best val MSE " + f("%.5f", best.val_mse) + " > " + f("%.2f", kC5MseRatio) + " x baseline " +
              f("%.5f", base_mse));
  r.check(best.val_srcc >= kC5MinSrcc, "best val SRCC " + f("%.4f", best.val_srcc));
  r.check(last.train_mse <= 0.5 * first.train_mse,
          "final train MSE " + f("%.5f", last.train_mse) + " > half of epoch 1 " + f("%.5f", first.train_mse));
  r.note("baseline val MSE " + f("%.5f", base_mse) + "; best epoch " + std::to_string(res.best_epoch) + " val MSE " +
         f("%.5f", best.val_mse) + " (" + f("%.2f", best.val_mse / base_mse) + "x), SRCC " +
         f("%.4f", best.val_srcc) + "; train MSE " + f("%.5f", first.train_mse) + " -> " +
         f("%.5f", last.train_mse));
  return r;
}

// 6. Metrics against the brute-force reference.
Report criterion6() {
  Report r;
  std::mt19937_64 rng(606);
  int tied = 0;
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + rng() % 999;
    const bool ties = t % 5 < 2;  // 40%
    std::vector<double> a(n), b(n);
    std::normal_distribution<double> g;
    const int levels = 2 + static_cast<int>(rng() % 6);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = ties ? static_cast<double>(rng() % levels) : g(rng);
      b[i] = ties ? static_cast<double>(rng() % (levels + 1)) * 0.25 + 0.1 * a[i] : g(rng) + 0.3 * a[i];
    }
    a[0] = 0.0;  // never constant
    a[n - 1] = 10.0;
    b[0] = -1.0;
    b[n - 1] = 5.0;
    tied += ties;
    const double es = std::fabs(srcc(a, b) - static_cast<double>(oracle::spearman(a, b)));
    const double ep = std::fabs(plcc(a, b) - static_cast<double>(oracle::pearson(a, b)));
    worst = std::max({worst, es, ep});
    if (es > kC6MetricAbs || ep > kC6MetricAbs) r.check(false, "vector " + std::to_string(t));

    if (t % 10 == 0) {
      std::vector<double> mono(n), aff(n), neg(n);
      for (std::size_t i = 0; i < n; ++i) {
        mono[i] = std::exp(0.7 * a[i]) + a[i] * a[i] * a[i];
        aff[i] = 2.5 * a[i] + 7.0;
        neg[i] = -0.5 * a[i] + 1.0;
      }
      if (srcc(mono, b) != srcc(a, b)) r.check(false, "SRCC changed under a monotone map at " + std::to_string(t));
      if (std::fabs(plcc(aff, b) - plcc(a, b)) > kC6AffineAbs)
        r.check(false, "PLCC changed under an affine map at " + std::to_string(t));
      if (std::fabs(plcc(neg, b) + plcc(a, b)) > kC6AffineAbs)
        r.check(false, "PLCC did not negate at " + std::to_string(t));
    }
  }
  r.check(tied >= 300, std::to_string(tied) + " tie-heavy cases");
  r.note("1000 vectors, " + std::to_string(tied) + " tie-heavy, worst deviation " + f("%.1e", worst));
  return r;
}

// 7. Determinism, frozen backend, checkpoint round trip.
Report criterion7() {
  Report r;
  BlurDatasetSpec spec;
  spec.count = 60;
  const auto data = make_blur_dataset(spec);
  const std::span<const Sample> all(data.samples);
  const ToyScorer toy;
  const auto h0 = toy.state_hash();
  auto cfg = train_preset("toy", PromptShape::full_overlay(32, 32));
  cfg.epochs = 5;
  cfg.shuffle_seed = 77;
  const auto p0 = create_prompt(PromptShape::full_overlay(32, 32), InitPolicy::uniform_small(1e-3, 4));
  const auto a = train_prompt(all.first(48), all.subspan(48), p0, toy, cfg);
  const auto b = train_prompt(all.first(48), all.subspan(48), p0, toy, cfg);
  r.check(a.history.same_trajectory(b.history), "histories differ");
  r.check(history_csv(a.history) == history_csv(b.history), "history CSV differs");
  r.check(a.last == b.last, "final prompts differ");
  r.check(toy.state_hash() == h0, "backend state hash changed");

  const auto dir = std::filesystem::temp_directory_path() / ("vpiqa_accept_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  save_checkpoint(a.best, dir / "a.vpq");
  const auto loaded = load_checkpoint(dir / "a.vpq");
  save_checkpoint(loaded, dir / "b.vpq");
  r.check(loaded == a.best, "loaded prompt differs");
  r.check(read_file_bytes(dir / "a.vpq") == read_file_bytes(dir / "b.vpq"), "re-saved checkpoint differs");
  std::filesystem::remove_all(dir);
  if (r.ok) r.note("5-epoch runs identical, hash " + std::to_string(h0) + " unchanged, checkpoint bytes identical");
  return r;
}

// 8. Composition invariants.
Report criterion8() {
  Report r;
  std::mt19937_64 rng(808);
  int out_of_range = 0, not_identity = 0;
  for (int t = 0; t < 1000; ++t) {
    const int h = 3 + static_cast<int>(rng() % 40), w = 3 + static_cast<int>(rng() % 40);
    const auto s = random_shape(rng, h, w);
    const double scale = std::uniform_real_distribution<double>(0.0, 6.0)(rng);
    const VisualPrompt p(s, oracle::random_params(rng, param_count(s), scale));
    const Image x = oracle::random_image(rng, h, w);
    for (double v : apply(p, x).pixels.pixels) out_of_range += !(v >= 0.0 && v <= 1.0);
    not_identity += !(apply(create_prompt(s), x).pixels == x);
  }
  r.check(out_of_range == 0, std::to_string(out_of_range) + " composed values outside [0,1]");
  r.check(not_identity == 0, std::to_string(not_identity) + " zero prompts changed the image");

  // Normalization order: scoring must see normalize(clamp(x + delta)).
  auto cfg = ToyScorer::default_config();
  cfg.normalization.mean = {0.48, 0.46, 0.41};
  cfg.normalization.std = {0.27, 0.26, 0.28};
  const ToyScorer toy(cfg);
  Image x(3, 32, 32);
  for (auto& v : x.pixels) v = 0.4;
  for (int i = 0; i < 32; ++i) x.at(1, i, i) = 0.9;
  const auto shape = PromptShape::full_overlay(32, 32);
  const VisualPrompt p(shape, std::vector<double>(param_count(shape), 0.3));
  const auto got = score_image(toy, apply(p, x), false).logits.values;
  const auto after = toy.logits_from_normalized(normalize(apply(p, x).pixels, cfg.normalization)).values;
  Image before = normalize(x, cfg.normalization);
  const Image d = materialize(p);
  for (std::size_t i = 0; i < before.size(); ++i) before.pixels[i] += d.pixels[i];
  const auto wrong = toy.logits_from_normalized(before).values;
  double match = 0, differ = 0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    match = std::max(match, std::fabs(got[i] - after[i]));
    differ = std::max(differ, std::fabs(got[i] - wrong[i]));
  }
  r.check(match < 1e-12, "scorer output differs from normalize-after-prompt by " + f("%.1e", match));
  r.check(differ > 0.1, "normalize-before is indistinguishable (" + f("%.1e", differ) + ")");
  r.note("1000 pairs; normalize-after matches to " + f("%.0e", match) + ", normalize-before off by " +
         f("%.2f", differ));
  return r;
}

struct Criterion {
  int id;
  const char* title;
  double limit_seconds;
  Report (*run)();
};

const Criterion kCriteria[] = {
    {1, "parameter counts", kC1Seconds, criterion1},
    {2, "score formula", kC2Seconds, criterion2},
    {3, "end-to-end gradient", kC3Seconds, criterion3},
    {4, "optimization oracle", kC4Seconds, criterion4},
    {5, "convergence regression", kC5Seconds, criterion5},
    {6, "metrics oracle", kC6Seconds, criterion6},
    {7, "determinism and frozen backend", 0.0, criterion7},
    {8, "composition invariants", 0.0, criterion8},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]\n", argv[0]);
      return 2;
    }
  }
  bool all_ok = true;
  bool ran = false;
  for (const auto& c : kCriteria) {
    if (only != 0 && c.id != only) continue;
    ran = true;
    const auto t0 = std::chrono::steady_clock::now();
    Report r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r.ok = false;
      r.detail = std::string("exception: ") + e.what();
    }
    const double secs = seconds_since(t0);
    if (c.limit_seconds > 0 && secs > c.limit_seconds) {
      r.ok = false;
      r.detail += "; took " + f("%.2f", secs) + " s, limit " + f("%.0f", c.limit_seconds) + " s";
    }
    std::printf("criterion %d %-31s %s  [%.2f s]  %s\n", c.id, c.title, r.ok ? "PASS" : "FAIL", secs,
                r.detail.c_str());
    std::fflush(stdout);
    all_ok &= r.ok;
  }
  if (!ran) {
    std::fprintf(stderr, "no criterion %d\n", only);
    return 2;
  }
  return all_ok ? 0 : 1;
}
