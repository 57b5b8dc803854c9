// SPDX-License-Identifier: Apache-2.0
#include "vpiqa/prompt.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "vpiqa/error.hpp"
#include "vpiqa/io.hpp"

namespace vpiqa {

std::string_view to_string(PromptKind kind) {
  switch (kind) {
    case PromptKind::Padding: return "padding";
    case PromptKind::PatchCenter: return "patch_center";
    case PromptKind::PatchTopLeft: return "patch_top_left";
    case PromptKind::FullOverlay: return "full_overlay";
  }
  return "unknown";
}

PromptKind parse_prompt_kind(std::string_view name) {
  for (auto k : {PromptKind::Padding, PromptKind::PatchCenter, PromptKind::PatchTopLeft,
                 PromptKind::FullOverlay}) {
    if (to_string(k) == name) return k;
  }
  throw ShapeError("unknown prompt kind '" + std::string(name) + "'");
}

PromptShape PromptShape::padding(int size, int height, int width) {
  return {PromptKind::Padding, size, height, width, 3};
}
PromptShape PromptShape::patch_center(int size, int height, int width) {
  return {PromptKind::PatchCenter, size, height, width, 3};
}
PromptShape PromptShape::patch_top_left(int size, int height, int width) {
  return {PromptKind::PatchTopLeft, size, height, width, 3};
}
PromptShape PromptShape::full_overlay(int height, int width) {
  return {PromptKind::FullOverlay, 0, height, width, 3};
}

void PromptShape::validate() const {
  std::ostringstream why;
  if (height <= 0 || width <= 0) {
    why << "image dims must be positive, got " << height << "x" << width;
  } else if (channels != 3) {
    why << "channel count must be 3, got " << channels;
  } else {
    const int shorter = std::min(height, width);
    switch (kind) {
      case PromptKind::Padding:
        if (size <= 0 || 2 * size >= shorter)
          why << "padding needs 0 < S and 2S < min(H, W); got S=" << size << " for " << height << "x"
              << width;
        break;
      case PromptKind::PatchCenter:
      case PromptKind::PatchTopLeft:
        if (size <= 0 || size > shorter)
          why << "patch needs 0 < S <= min(H, W); got S=" << size << " for " << height << "x" << width;
        break;
      case PromptKind::FullOverlay:
        if (size != 0) why << "full overlay takes no size, got S=" << size;
        break;
      default:
        why << "invalid prompt kind code " << static_cast<int>(kind);
    }
  }
  if (!why.str().empty()) throw ShapeError(why.str());
}

namespace {

struct PatchOrigin {
  int row;
  int col;
};

PatchOrigin patch_origin(const PromptShape& s) {
  if (s.kind == PromptKind::PatchCenter) return {(s.height - s.size) / 2, (s.width - s.size) / 2};
  return {0, 0};
}

}  // namespace

std::size_t param_count(const PromptShape& shape) {
  shape.validate();
  const std::size_t c = shape.channels;
  const std::size_t h = shape.height;
  const std::size_t w = shape.width;
  const std::size_t s = shape.size;
  switch (shape.kind) {
    case PromptKind::Padding: return c * 2 * s * (w + h - 2 * s);
    case PromptKind::PatchCenter:
    case PromptKind::PatchTopLeft: return c * s * s;
    case PromptKind::FullOverlay: return c * h * w;
  }
  return 0;
}

bool is_active(const PromptShape& shape, int row, int col) {
  if (row < 0 || col < 0 || row >= shape.height || col >= shape.width) return false;
  switch (shape.kind) {
    case PromptKind::Padding:
      return row < shape.size || row >= shape.height - shape.size || col < shape.size ||
             col >= shape.width - shape.size;
    case PromptKind::PatchCenter:
    case PromptKind::PatchTopLeft: {
      const auto o = patch_origin(shape);
      return row >= o.row && row < o.row + shape.size && col >= o.col && col < o.col + shape.size;
    }
    case PromptKind::FullOverlay: return true;
  }
  return false;
}

PromptLayout::PromptLayout(const PromptShape& shape) : shape_(shape) {
  shape.validate();
  const int h = shape.height;
  const int w = shape.width;
  const int s = shape.size;
  coords_.reserve(param_count(shape));

  auto block = [&](int c, int r0, int r1, int c0, int c1) {
    for (int r = r0; r < r1; ++r)
      for (int col = c0; col < c1; ++col) coords_.push_back({c, r, col});
  };

  for (int c = 0; c < shape.channels; ++c) {
    switch (shape.kind) {
      case PromptKind::Padding:
        block(c, 0, s, 0, w);
        block(c, h - s, h, 0, w);
        block(c, s, h - s, 0, s);
        block(c, s, h - s, w - s, w);
        break;
      case PromptKind::PatchCenter:
      case PromptKind::PatchTopLeft: {
        const auto o = patch_origin(shape);
        block(c, o.row, o.row + s, o.col, o.col + s);
        break;
      }
      case PromptKind::FullOverlay:
        block(c, 0, h, 0, w);
        break;
    }
  }

  inverse_.assign(static_cast<std::size_t>(shape.channels) * h * w, -1);
  offsets_.resize(coords_.size());
  for (std::size_t i = 0; i < coords_.size(); ++i) {
    const auto& p = coords_[i];
    offsets_[i] = (static_cast<std::size_t>(p.channel) * h + p.row) * w + p.col;
    inverse_[offsets_[i]] = static_cast<std::int64_t>(i);
  }
}

std::optional<std::size_t> PromptLayout::index_of(const PixelCoord& p) const {
  if (p.channel < 0 || p.channel >= shape_.channels || p.row < 0 || p.row >= shape_.height ||
      p.col < 0 || p.col >= shape_.width)
    return std::nullopt;
  const auto v = inverse_[(static_cast<std::size_t>(p.channel) * shape_.height + p.row) * shape_.width + p.col];
  if (v < 0) return std::nullopt;
  return static_cast<std::size_t>(v);
}

VisualPrompt::VisualPrompt(PromptShape shape, std::vector<double> raw_params)
    : shape_(shape), layout_(std::make_shared<const PromptLayout>(shape)), raw_(std::move(raw_params)) {
  if (raw_.size() != layout_->size()) {
    throw ShapeError("prompt expects " + std::to_string(layout_->size()) + " parameters, got " +
                     std::to_string(raw_.size()));
  }
  for (double v : raw_) {
    if (!std::isfinite(v)) throw InputError("prompt parameters must be finite");
  }
}

VisualPrompt VisualPrompt::with_params(std::vector<double> raw_params) const {
  if (raw_params.size() != raw_.size())
    throw ShapeError("parameter count mismatch: " + std::to_string(raw_params.size()) + " vs " +
                     std::to_string(raw_.size()));
  for (double v : raw_params) {
    if (!std::isfinite(v)) throw InputError("prompt parameters must be finite");
  }
  VisualPrompt out = *this;
  out.raw_ = std::move(raw_params);
  return out;
}

std::string VisualPrompt::id() const {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(shape_.kind));
  w.u32(shape_.size);
  w.u32(shape_.height);
  w.u32(shape_.width);
  w.u32(shape_.channels);
  for (double v : raw_) w.f64(v);
  return hex64(fnv1a(w.bytes()));
}

VisualPrompt create_prompt(const PromptShape& shape, const InitPolicy& init) {
  shape.validate();
  std::vector<double> raw(param_count(shape), 0.0);
  if (init.kind == InitPolicy::Kind::UniformSmall) {
    if (!(init.epsilon >= 0.0) || !std::isfinite(init.epsilon))
      throw InputError("uniform_small epsilon must be a finite non-negative number");
    std::mt19937_64 rng(init.seed);
    for (auto& v : raw) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
      // Stored at float32 precision, the checkpoint precision.
      v = static_cast<float>(init.epsilon * (2.0 * u - 1.0));
      v = std::clamp(v, -init.epsilon, init.epsilon);
    }
  }
  return VisualPrompt(shape, std::move(raw));
}

Image materialize(const VisualPrompt& prompt) {
  const auto& s = prompt.shape();
  Image delta(s.channels, s.height, s.width, 0.0);
  const auto& layout = prompt.layout();
  const auto raw = prompt.raw_params();
  for (std::size_t i = 0; i < raw.size(); ++i) delta.pixels[layout.pixel_offset(i)] = std::tanh(raw[i]);
  return delta;
}

namespace {

void check_image(const VisualPrompt& prompt, const Image& image) {
  const auto& s = prompt.shape();
  if (image.channels != s.channels || image.height != s.height || image.width != s.width) {
    std::ostringstream msg;
    msg << "image is " << image.channels << "x" << image.height << "x" << image.width
        << " but prompt expects " << s.channels << "x" << s.height << "x" << s.width;
    throw ShapeError(msg.str());
  }
  if (image.pixels.size() != image.size() || !in_unit_range(image))
    throw InputError("image values must lie in [0, 1] before prompt composition");
}

}  // namespace

bool in_unit_range(const Image& image) {
  return std::all_of(image.pixels.begin(), image.pixels.end(),
                     [](double v) { return v >= 0.0 && v <= 1.0; });
}

PromptedImage apply(const VisualPrompt& prompt, const Image& image, std::string source_id) {
  check_image(prompt, image);
  PromptedImage out{image, std::move(source_id), prompt.id()};
  const auto& layout = prompt.layout();
  const auto raw = prompt.raw_params();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto& px = out.pixels.pixels[layout.pixel_offset(i)];
    px = std::clamp(px + std::tanh(raw[i]), 0.0, 1.0);
  }
  return out;
}

std::vector<double> apply_backward(const VisualPrompt& prompt, const Image& image,
                                   const Image& pixel_grad) {
  check_image(prompt, image);
  if (!pixel_grad.same_dims(image)) throw ShapeError("pixel gradient dims differ from image dims");
  const auto& layout = prompt.layout();
  const auto raw = prompt.raw_params();
  std::vector<double> grad(raw.size(), 0.0);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto off = layout.pixel_offset(i);
    const double t = std::tanh(raw[i]);
    const double z = image.pixels[off] + t;
    if (z > 0.0 && z < 1.0) grad[i] = pixel_grad.pixels[off] * (1.0 - t * t);
  }
  return grad;
}

}  // namespace vpiqa
