// SPDX-License-Identifier: Apache-2.0
#pragma once

/// Run configuration.
///
/// INI-style text with sections:
///
///   [backend]  name (toy | http), url, timeout, height, width, vocab_size,
///              vocab_file, mean, std, positive, negative, positive_ids,
///              negative_ids, textual_prompt
///   [data]     dataset_id, manifest | train_manifest + val_manifest
///              [+ test_manifest], mos_lo, mos_hi, split_policy, seed,
///              official_split
///   [prompt]   kind, size, init (zeros | uniform), init_epsilon, init_seed
///   [train]    preset, batch_size, lr, epochs, lr_schedule ("25@60,25@20"),
///              shuffle_seed, checkpoint_every, workers, augment
///   [eval]     split (train | val | test), logistic_plcc, workers
///   [output]   dir
///
/// Lists are comma separated. Relative input paths resolve against the
/// directory holding the config file. A relative output dir resolves
/// against $VPIQA_RUN_ROOT when set, else the working directory.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vpiqa/backend.hpp"
#include "vpiqa/data.hpp"
#include "vpiqa/prompt.hpp"
#include "vpiqa/train.hpp"

namespace vpiqa {

inline constexpr const char* kRunRootEnv = "VPIQA_RUN_ROOT";

struct BackendSection {
  std::string name = "toy";
  std::string url;
  int timeout_seconds = 600;
  int height = 32;
  int width = 32;
  std::size_t vocab_size = 4;
  std::optional<std::filesystem::path> vocab_file;
  Normalization normalization;
  std::vector<std::string> positive_labels = default_positive_labels();
  std::vector<std::string> negative_labels = default_negative_labels();
  /// When both are set they are used as-is and labels are descriptive.
  std::vector<TokenId> positive_ids;
  std::vector<TokenId> negative_ids;
  std::string textual_prompt = kDefaultTextualPrompt;
};

struct DataSection {
  std::string dataset_id;
  std::optional<std::filesystem::path> manifest;
  std::optional<std::filesystem::path> train_manifest;
  std::optional<std::filesystem::path> val_manifest;
  std::optional<std::filesystem::path> test_manifest;
  MosRange mos_range;
  SplitSpec split;
};

struct PromptSection {
  PromptKind kind = PromptKind::FullOverlay;
  int size = 0;
  InitPolicy init;
};

struct EvalSection {
  std::string split = "test";
  bool logistic_plcc = false;
  unsigned workers = 1;
};

struct RunConfig {
  BackendSection backend;
  DataSection data;
  PromptSection prompt;
  std::string train_preset;  // informational once resolved into `train`
  TrainConfig train;
  EvalSection eval;
  std::filesystem::path output_dir;

  PromptShape prompt_shape() const;
};

/// `section.key` -> value pairs, applied after the file is read.
using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

/// Parses and validates. Every problem found is reported in one
/// ConfigError, one per line, each naming its key.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir,
                       const ConfigOverrides& overrides = {});
RunConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});

/// Fully resolved config as INI text: absolute paths, explicit training
/// fields and token IDs. Parsing it yields the same RunConfig.
std::string resolved_config_text(const RunConfig& config);

/// Backend config with token sets resolved against the backend vocabulary.
BackendConfig resolve_backend(const RunConfig& config, std::vector<std::string>* warnings = nullptr);

/// Toy scorer or HTTP adapter client, per backend.name.
std::unique_ptr<FrozenScorer> make_scorer(const BackendConfig& backend, const RunConfig& config);

/// train / val / test manifests per the data section.
ManifestSplit resolve_splits(const RunConfig& config);

}  // namespace vpiqa
