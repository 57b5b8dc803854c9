// SPDX-License-Identifier: Apache-2.0
#include "vpiqa/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>

#include "CLI11.hpp"
#include "vpiqa/checkpoint.hpp"
#include "vpiqa/config.hpp"
#include "vpiqa/error.hpp"
#include "vpiqa/evaluate.hpp"
#include "vpiqa/io.hpp"
#include "vpiqa/synthetic.hpp"
#include "vpiqa/train.hpp"

namespace vpiqa {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

/// Pulls `--section.key value` / `--section.key=value` out of argv. CLI
/// options proper never contain a dot.
ConfigOverrides take_overrides(std::vector<std::string>& args) {
  ConfigOverrides overrides;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const auto& a = args[i];
    const bool dotted = a.size() > 2 && a.rfind("--", 0) == 0 && a.find('.') != std::string::npos &&
                        a.find('.') < a.find('=');
    if (!dotted) {
      rest.push_back(a);
      continue;
    }
    const auto eq = a.find('=');
    if (eq != std::string::npos) {
      overrides.emplace_back(a.substr(2, eq - 2), a.substr(eq + 1));
    } else {
      if (i + 1 >= args.size()) throw ConfigError(a + ": missing value");
      overrides.emplace_back(a.substr(2), args[++i]);
    }
  }
  args = std::move(rest);
  return overrides;
}

std::string describe_tokens(const TokenSets& sets) {
  auto one = [&](const std::vector<TokenId>& ids) {
    std::string s;
    for (auto id : ids) {
      if (!s.empty()) s += ' ';
      const auto it = sets.labels.find(id);
      s += (it == sets.labels.end() ? std::string("?") : it->second) + '=' + std::to_string(id);
    }
    return s;
  };
  return "positive tokens: " + one(sets.positive) + "\nnegative tokens: " + one(sets.negative) + '\n';
}

std::vector<Sample> load_split(const SampleManifest& m, const RunConfig& cfg) {
  return load_samples(m, cfg.backend.height, cfg.backend.width);
}

const SampleManifest& pick_split(const ManifestSplit& s, const std::string& name) {
  if (name == "train") return s.train;
  if (name == "val") return s.val;
  return s.test;
}

void write_eval_outputs(const EvalResult& res, const fs::path& dir, const std::string& prefix) {
  fs::create_directories(dir);
  write_text_atomic(dir / (prefix + "_report.csv"), report_csv(res.report));
  write_text_atomic(dir / (prefix + "_report.json"), report_json_line(res.report));
  write_text_atomic(dir / (prefix + "_predictions.csv"), predictions_csv(res.predictions));
}

int cmd_train(const fs::path& config_path, const ConfigOverrides& overrides, bool resume, std::ostream& out) {
  const RunConfig cfg = load_config(config_path, overrides);
  std::vector<std::string> warnings;
  const BackendConfig backend = resolve_backend(cfg, &warnings);
  const std::string snapshot = resolved_config_text(cfg);

  out << "# resolved configuration\n" << snapshot << '\n' << describe_tokens(backend.token_sets);
  for (const auto& w : warnings) out << "warning: " << w << '\n';

  const auto splits = resolve_splits(cfg);
  if (splits.train.size() == 0) throw ConfigError("data: training split is empty");
  if (splits.val.size() == 0) throw ConfigError("data: validation split is empty");
  const auto train = load_split(splits.train, cfg);
  const auto val = load_split(splits.val, cfg);
  out << "samples: train " << train.size() << ", val " << val.size() << ", test " << splits.test.size() << '\n';

  const auto scorer = make_scorer(backend, cfg);
  const auto hash_before = scorer->state_hash();

  fs::create_directories(cfg.output_dir);
  write_text_atomic(cfg.output_dir / "config.snapshot", snapshot);
  write_manifest_csv(splits.train, cfg.output_dir / "split_train.csv");
  write_manifest_csv(splits.val, cfg.output_dir / "split_val.csv");
  if (splits.test.size() > 0) write_manifest_csv(splits.test, cfg.output_dir / "split_test.csv");

  const auto prompt = create_prompt(cfg.prompt_shape(), cfg.prompt.init);
  out << "prompt: " << to_string(prompt.shape().kind) << " size " << prompt.shape().size << ", " << prompt.size()
      << " parameters\n";

  TrainOptions opts;
  opts.run_dir = cfg.output_dir;
  opts.resume = resume;
  opts.on_epoch = [&out](const EpochRecord& e) {
    out << "epoch " << e.epoch << "  lr " << fmt("%g", e.lr) << "  train_mse " << fmt("%.6f", e.train_mse)
        << "  val_mse " << fmt("%.6f", e.val_mse) << "  val_srcc " << fmt("%.4f", e.val_srcc) << "  val_plcc "
        << fmt("%.4f", e.val_plcc) << '\n';
    out.flush();
  };

  TrainResult result = [&] {
    try {
      return train_prompt(train, val, prompt, *scorer, cfg.train, opts);
    } catch (const TrainingAborted& e) {
      throw Error(std::string("training aborted: ") + e.what() + " (last good prompt saved to " +
                  (cfg.output_dir / "last.vpq").string() + ")");
    }
  }();
  if (scorer->state_hash() != hash_before) throw Error("backend state changed during training");

  out << "best epoch " << result.best_epoch << ", checkpoint " << (cfg.output_dir / "best.vpq").string() << '\n';

  if (splits.test.size() > 0) {
    const auto test = load_split(splits.test, cfg);
    EvalOptions eo;
    eo.logistic_plcc = cfg.eval.logistic_plcc;
    eo.workers = cfg.eval.workers;
    eo.prompt_checkpoint = "best.vpq";
    eo.dataset_id = cfg.data.dataset_id;
    const auto res = evaluate(result.best, test, *scorer, eo);
    write_eval_outputs(res, cfg.output_dir, "test");
    out << "\n# test split\n" << report_table(res.report);
  }
  return kExitOk;
}

int cmd_evaluate(const fs::path& config_path, const fs::path& checkpoint, const ConfigOverrides& overrides,
                 const std::optional<fs::path>& out_dir, bool json, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = load_config(config_path, overrides);
  const BackendConfig backend = resolve_backend(cfg);
  const VisualPrompt prompt = load_checkpoint(checkpoint);
  const auto& sh = prompt.shape();
  if (sh.height != backend.input_height || sh.width != backend.input_width || sh.channels != 3) {
    throw ConfigError("checkpoint prompt is " + std::to_string(sh.channels) + "x" + std::to_string(sh.height) + "x" +
                      std::to_string(sh.width) + " but the backend expects 3x" +
                      std::to_string(backend.input_height) + "x" + std::to_string(backend.input_width));
  }

  const auto splits = resolve_splits(cfg);
  const auto& manifest = pick_split(splits, cfg.eval.split);
  if (manifest.size() == 0) throw ConfigError("eval.split: the " + cfg.eval.split + " split is empty");
  const auto samples = load_split(manifest, cfg);
  const auto scorer = make_scorer(backend, cfg);

  EvalOptions eo;
  eo.logistic_plcc = cfg.eval.logistic_plcc;
  eo.workers = cfg.eval.workers;
  eo.prompt_checkpoint = checkpoint.filename().string();
  eo.dataset_id = cfg.data.dataset_id;
  const auto res = evaluate(prompt, samples, *scorer, eo);
  write_eval_outputs(res, out_dir.value_or(cfg.output_dir), "eval_" + cfg.eval.split);

  out << (json ? report_json_line(res.report) : report_table(res.report));
  if (!res.report.ok()) {
    err << "error: " << res.report.error << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_export(const fs::path& checkpoint, const fs::path& image_path, int scale, std::ostream& out) {
  const VisualPrompt prompt = load_checkpoint(checkpoint);
  const Image delta = materialize(prompt);
  Image vis(delta.channels, delta.height * scale, delta.width * scale);
  for (int c = 0; c < vis.channels; ++c)
    for (int r = 0; r < vis.height; ++r)
      for (int col = 0; col < vis.width; ++col) vis.at(c, r, col) = 0.5 + 0.5 * delta.at(c, r / scale, col / scale);
  write_image_file(image_path, vis);
  out << "wrote " << image_path.string() << " (" << vis.width << "x" << vis.height << ")\n";
  return kExitOk;
}

int cmd_inspect(const fs::path& checkpoint, std::ostream& out) {
  const Bytes bytes = read_file_bytes(checkpoint);
  const CheckpointHeader h = decode_checkpoint_header(bytes);
  const VisualPrompt prompt = decode_checkpoint(bytes);

  const auto raw = prompt.raw_params();
  double lo = 0.0, hi = 0.0, sum = 0.0, sq = 0.0, dlo = 0.0, dhi = 0.0;
  std::size_t zeros = 0;
  if (!raw.empty()) {
    lo = hi = raw[0];
    dlo = dhi = std::tanh(raw[0]);
  }
  for (double v : raw) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
    sq += v * v;
    const double d = std::tanh(v);
    dlo = std::min(dlo, d);
    dhi = std::max(dhi, d);
    zeros += v == 0.0;
  }
  const double n = static_cast<double>(std::max<std::size_t>(raw.size(), 1));
  out << "file        " << checkpoint.string() << " (" << bytes.size() << " bytes)\n"
      << "kind        " << to_string(h.shape.kind) << '\n'
      << "size        " << h.shape.size << '\n'
      << "input       " << h.shape.channels << "x" << h.shape.height << "x" << h.shape.width << '\n'
      << "params      " << h.param_count << '\n'
      << "id          " << prompt.id() << '\n'
      << "raw min     " << fmt("%.6g", lo) << '\n'
      << "raw max     " << fmt("%.6g", hi) << '\n'
      << "raw mean    " << fmt("%.6g", sum / n) << '\n'
      << "raw rms     " << fmt("%.6g", std::sqrt(sq / n)) << '\n'
      << "delta range " << fmt("%.6g", dlo) << " .. " << fmt("%.6g", dhi) << '\n'
      << "zeros       " << zeros << '\n';
  return kExitOk;
}

int cmd_make_toy(const fs::path& dir, std::size_t count, std::uint64_t seed, std::ostream& out) {
  BlurDatasetSpec spec;
  spec.count = count;
  spec.seed = seed;
  const auto data = make_blur_dataset(spec);
  const auto csv = write_blur_dataset(data, dir);
  const std::string ini =
      "[backend]\n"
      "name = toy\n\n"
      "[data]\n"
      "dataset_id = " + data.manifest.dataset_id + "\n"
      "manifest = manifest.csv\n"
      "mos_lo = " + fmt("%g", spec.mos_lo) + "\n"
      "mos_hi = " + fmt("%g", spec.mos_hi) + "\n"
      "split_policy = ratio_80_10_10\n"
      "seed = 0\n\n"
      "[prompt]\n"
      "kind = full_overlay\n"
      "size = 0\n\n"
      "[train]\n"
      "preset = toy\n\n"
      "[output]\n"
      "dir = runs/" + data.manifest.dataset_id + "\n";
  write_text_atomic(dir / "toy.ini", ini);
  out << "wrote " << data.samples.size() << " images, " << csv.string() << " and " << (dir / "toy.ini").string()
      << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Visual prompt tuning for image quality scoring", "vpiqa"};
  app.require_subcommand(1);

  std::string config, checkpoint, image;
  std::optional<std::string> out_dir;
  bool resume = false, json = false;
  int scale = 1;
  std::size_t count = 200;
  std::uint64_t seed = 2024;

  auto* train = app.add_subcommand("train", "Train a visual prompt");
  train->add_option("config", config, "Run configuration file")->required();
  train->add_flag("--resume", resume, "Continue from last.vpq in the output directory");
  train->footer("Any config key can be overridden with --section.key value.");

  auto* eval = app.add_subcommand("evaluate", "Score a checkpoint on a data split");
  eval->add_option("config", config, "Run configuration file")->required();
  eval->add_option("checkpoint", checkpoint, "Prompt checkpoint")->required();
  eval->add_option("--out", out_dir, "Directory for report files (default: output dir)");
  eval->add_flag("--json", json, "Print the report as one JSON line");

  auto* exp = app.add_subcommand("export-prompt", "Render a prompt as an image");
  exp->add_option("checkpoint", checkpoint, "Prompt checkpoint")->required();
  exp->add_option("image", image, "Output image (format from extension)")->required();
  exp->add_option("--scale", scale, "Integer upscaling factor")->check(CLI::Range(1, 64));

  auto* insp = app.add_subcommand("inspect", "Print checkpoint header and parameter statistics");
  insp->add_option("checkpoint", checkpoint, "Prompt checkpoint")->required();

  auto* toy = app.add_subcommand("make-toy-dataset", "Write the synthetic blur dataset and a toy config");
  toy->add_option("dir", image, "Output directory")->required();
  toy->add_option("--count", count, "Number of images");
  toy->add_option("--seed", seed, "Generator seed");

  try {
    std::vector<std::string> args = argv;
    const ConfigOverrides overrides = take_overrides(args);
    std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
    try {
      app.parse(args);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? kExitOk : kExitConfig;
    }
    if (!overrides.empty() && !train->parsed() && !eval->parsed())
      throw ConfigError("config overrides apply to train and evaluate only");

    if (train->parsed()) return cmd_train(config, overrides, resume, out);
    if (eval->parsed()) {
      std::optional<fs::path> dir;
      if (out_dir) dir = *out_dir;
      return cmd_evaluate(config, checkpoint, overrides, dir, json, out, err);
    }
    if (exp->parsed()) return cmd_export(checkpoint, image, scale, out);
    if (insp->parsed()) return cmd_inspect(checkpoint, out);
    if (toy->parsed()) return cmd_make_toy(image, count, seed, out);
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace vpiqa
