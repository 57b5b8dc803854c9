// SPDX-License-Identifier: Apache-2.0
#pragma once

/// Pixel-space visual prompts: geometry, parameter layout, tanh constraint
/// and additive composition with an input image.
///
/// A prompt stores unconstrained ("raw") parameters for the pixels of its
/// active region. The delta added to an image is tanh(raw) on that region
/// and 0 elsewhere; the composed image is clamped to [0, 1].

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vpiqa/image.hpp"

namespace vpiqa {

enum class PromptKind : std::uint8_t {
  Padding = 1,
  PatchCenter = 2,
  PatchTopLeft = 3,
  FullOverlay = 4,
};

std::string_view to_string(PromptKind kind);
/// Accepts "padding", "patch_center", "patch_top_left", "full_overlay".
PromptKind parse_prompt_kind(std::string_view name);

struct PromptShape {
  PromptKind kind = PromptKind::FullOverlay;
  int size = 0;  // border width or patch side; 0 for FullOverlay
  int height = 0;
  int width = 0;
  int channels = 3;

  static PromptShape padding(int size, int height, int width);
  static PromptShape patch_center(int size, int height, int width);
  static PromptShape patch_top_left(int size, int height, int width);
  static PromptShape full_overlay(int height, int width);

  /// Throws ShapeError if the geometry is not realisable.
  void validate() const;

  friend bool operator==(const PromptShape&, const PromptShape&) = default;
};

/// Number of trainable parameters: active-region pixels times channels.
std::size_t param_count(const PromptShape& shape);

/// True if pixel (row, col) is covered by the prompt.
bool is_active(const PromptShape& shape, int row, int col);

struct PixelCoord {
  int channel = 0;
  int row = 0;
  int col = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

/// Fixed bijection between flat parameter index and active-region pixel.
///
/// Order is channel-major. Within a channel, patches and overlays are
/// row-major. Padding enumerates the top strip (rows 0..S-1, full width),
/// then the bottom strip, then the left strip and the right strip of the
/// middle band, each row-major.
class PromptLayout {
 public:
  explicit PromptLayout(const PromptShape& shape);

  std::size_t size() const { return coords_.size(); }
  PixelCoord coord(std::size_t index) const { return coords_[index]; }
  /// Inverse mapping; nullopt for inactive pixels.
  std::optional<std::size_t> index_of(const PixelCoord& pixel) const;
  /// Offset of parameter `index` inside a C x H x W image buffer.
  std::size_t pixel_offset(std::size_t index) const { return offsets_[index]; }

 private:
  PromptShape shape_;
  std::vector<PixelCoord> coords_;
  std::vector<std::size_t> offsets_;
  std::vector<std::int64_t> inverse_;
};

class VisualPrompt {
 public:
  VisualPrompt(PromptShape shape, std::vector<double> raw_params);

  const PromptShape& shape() const { return shape_; }
  const PromptLayout& layout() const { return *layout_; }
  std::span<const double> raw_params() const { return raw_; }
  std::size_t size() const { return raw_.size(); }

  /// Same geometry, new parameters. Length must match.
  VisualPrompt with_params(std::vector<double> raw_params) const;

  /// Stable content hash of geometry and parameters, as 16 hex digits.
  std::string id() const;

  friend bool operator==(const VisualPrompt& a, const VisualPrompt& b) {
    return a.shape_ == b.shape_ && a.raw_ == b.raw_;
  }

 private:
  PromptShape shape_;
  std::shared_ptr<const PromptLayout> layout_;
  std::vector<double> raw_;
};

struct InitPolicy {
  enum class Kind { Zeros, UniformSmall };
  Kind kind = Kind::Zeros;
  double epsilon = 1e-3;
  std::uint64_t seed = 0;

  static InitPolicy zeros() { return {}; }
  static InitPolicy uniform_small(double eps, std::uint64_t seed = 0) {
    return {Kind::UniformSmall, eps, seed};
  }
};

VisualPrompt create_prompt(const PromptShape& shape, const InitPolicy& init = InitPolicy::zeros());

/// C x H x W delta: tanh(raw) on the active region, exactly 0 elsewhere.
Image materialize(const VisualPrompt& prompt);

struct PromptedImage {
  Image pixels;
  std::string source_id;
  std::string prompt_id;
};

/// clamp(image + materialize(prompt), 0, 1). The image must already be in
/// [0, 1] and match the prompt dimensions.
PromptedImage apply(const VisualPrompt& prompt, const Image& image, std::string source_id = {});

/// Chains d(loss)/d(composed pixels) back to d(loss)/d(raw params).
/// The clamp passes gradient only where 0 < image + delta < 1.
std::vector<double> apply_backward(const VisualPrompt& prompt, const Image& image,
                                   const Image& pixel_grad);

}  // namespace vpiqa
