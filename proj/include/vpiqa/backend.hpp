// SPDX-License-Identifier: Apache-2.0
#pragma once

/// Frozen scorer contract.
///
/// A scorer receives the composed (prompted) image with values in [0, 1],
/// applies its own input normalization, and returns the final-position
/// logit vector. When asked, it also returns d(quality score)/d(composed
/// pixels), with the normalization Jacobian already folded in, so callers
/// can chain straight into the prompt parameters.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "vpiqa/image.hpp"
#include "vpiqa/prompt.hpp"
#include "vpiqa/scoring.hpp"

namespace vpiqa {

inline constexpr const char* kDefaultTextualPrompt = "Rate the technical quality of the image.";

struct Normalization {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> std{1.0, 1.0, 1.0};

  void validate() const;
  friend bool operator==(const Normalization&, const Normalization&) = default;
};

struct BackendConfig {
  std::string name = "toy";
  int input_height = 32;
  int input_width = 32;
  std::size_t vocab_size = 4;
  std::string textual_prompt = kDefaultTextualPrompt;
  Normalization normalization;
  TokenSets token_sets;

  /// Throws ConfigError on non-positive dims/std or invalid token sets.
  void validate() const;
  /// Deterministic digest of every field.
  std::uint64_t hash() const;
};

struct ScorerOutput {
  LogitVector logits;
  QualityScore score;
  std::optional<Image> grad_wrt_image;
};

class FrozenScorer {
 public:
  virtual ~FrozenScorer() = default;

  virtual const BackendConfig& config() const = 0;
  /// `composed` is unnormalized, in [0, 1], sized input_height x input_width.
  virtual ScorerOutput score(const Image& composed, bool want_grad) const = 0;
  /// Digest of configuration and frozen weights; must never change.
  virtual std::uint64_t state_hash() const = 0;
};

/// Validates dims and range, then delegates to the scorer.
ScorerOutput score_image(const FrozenScorer& scorer, const PromptedImage& prompted, bool want_grad);
ScorerOutput score_image(const FrozenScorer& scorer, const Image& composed, bool want_grad);

/// (pixel - mean_c) / std_c per channel.
Image normalize(const Image& image, const Normalization& norm);

/// Bilinear resampling with half-pixel centres (align_corners = false), no
/// antialiasing. Source coordinates are clamped at the borders.
Image resize_bilinear(const Image& image, int height, int width);
/// Crops the central height x width window; offsets round down.
Image center_crop(const Image& image, int height, int width);

/// Shorter side resized to max(height, width) keeping aspect ratio, then
/// center-cropped to height x width, values scaled to [0, 1].
Image preprocess(const RawImage& raw, int height, int width);

/// Decodes any format OpenCV can read into 8-bit RGB. Throws IngestionError.
RawImage decode_image_file(const std::filesystem::path& path);
/// Writes a 3-channel [0, 1] image as 8-bit (format from the extension).
void write_image_file(const std::filesystem::path& path, const Image& image);
/// Planar [0, 1] image to 8-bit interleaved RGB (round-to-nearest).
RawImage to_raw(const Image& image);

}  // namespace vpiqa
