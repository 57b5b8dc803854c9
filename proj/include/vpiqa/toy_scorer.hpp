// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>

#include "vpiqa/backend.hpp"

namespace vpiqa {

/// Deterministic stand-in for a frozen multimodal model.
///
/// On the normalized input it computes four features:
///   f0  mean of all samples
///   f1  mean of the central (H/2 x W/2) crop
///   f2  mean |horizontal first difference|
///   f3  mean |vertical first difference|
/// and returns logits A f + b over the vocabulary
/// {0: "good", 1: "fine", 2: "poor", 3: "bad"}.
///
/// The |.| subgradient at exactly zero difference is taken as 0.
class ToyScorer final : public FrozenScorer {
 public:
  using Features = std::array<double, 4>;
  using Weights = std::array<std::array<double, 4>, 4>;

  static constexpr Weights kWeights{{
      {4.0, 0.0, 8.0, 8.0},
      {2.0, 2.0, 6.0, 6.0},
      {-4.0, 0.0, -8.0, -8.0},
      {-2.0, -2.0, -6.0, -6.0},
  }};
  static constexpr std::array<double, 4> kBias{0.0, 0.0, 0.0, 0.0};

  /// 32x32 input, identity normalization, P = {good, fine}, N = {poor, bad}.
  static BackendConfig default_config();
  static Vocabulary vocabulary();

  explicit ToyScorer(BackendConfig cfg = default_config());

  const BackendConfig& config() const override { return cfg_; }
  ScorerOutput score(const Image& composed, bool want_grad) const override;
  std::uint64_t state_hash() const override;

  Features features(const Image& normalized) const;
  LogitVector logits_from_normalized(const Image& normalized) const;

 private:
  BackendConfig cfg_;
  Weights weights_ = kWeights;
  std::array<double, 4> bias_ = kBias;
};

}  // namespace vpiqa
