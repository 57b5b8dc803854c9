// SPDX-License-Identifier: Apache-2.0
#include "vpiqa/backend.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vpiqa/error.hpp"
#include "vpiqa/io.hpp"

namespace vpiqa {

void Normalization::validate() const {
  for (int c = 0; c < 3; ++c) {
    if (!std::isfinite(mean[c])) throw ConfigError("normalization mean must be finite");
    if (!(std[c] > 0.0) || !std::isfinite(std[c]))
      throw ConfigError("normalization std components must be strictly positive");
  }
}

void BackendConfig::validate() const {
  if (input_height <= 0 || input_width <= 0) throw ConfigError("backend input dims must be positive");
  if (vocab_size == 0) throw ConfigError("backend vocabulary size must be positive");
  normalization.validate();
  token_sets.validate(vocab_size);
}

std::uint64_t BackendConfig::hash() const {
  ByteWriter w;
  w.raw(name);
  w.u8(0);
  w.u32(static_cast<std::uint32_t>(input_height));
  w.u32(static_cast<std::uint32_t>(input_width));
  w.u64(vocab_size);
  w.raw(textual_prompt);
  w.u8(0);
  for (int c = 0; c < 3; ++c) {
    w.f64(normalization.mean[c]);
    w.f64(normalization.std[c]);
  }
  w.u64(token_sets.positive.size());
  for (auto id : token_sets.positive) w.u32(id);
  w.u64(token_sets.negative.size());
  for (auto id : token_sets.negative) w.u32(id);
  return fnv1a(w.bytes());
}

ScorerOutput score_image(const FrozenScorer& scorer, const Image& composed, bool want_grad) {
  const auto& cfg = scorer.config();
  if (composed.channels != 3 || composed.height != cfg.input_height || composed.width != cfg.input_width) {
    std::ostringstream msg;
    msg << "backend '" << cfg.name << "' expects 3x" << cfg.input_height << "x" << cfg.input_width << ", got "
        << composed.channels << "x" << composed.height << "x" << composed.width;
    throw ShapeError(msg.str());
  }
  if (!in_unit_range(composed)) throw InputError("composed image values must lie in [0, 1]");
  auto out = scorer.score(composed, want_grad);
  if (out.logits.values.size() != cfg.vocab_size)
    throw BackendError("backend returned " + std::to_string(out.logits.values.size()) + " logits, expected " +
                       std::to_string(cfg.vocab_size));
  if (want_grad && (!out.grad_wrt_image || !out.grad_wrt_image->same_dims(composed)))
    throw BackendError("backend did not return an image-shaped gradient");
  return out;
}

ScorerOutput score_image(const FrozenScorer& scorer, const PromptedImage& prompted, bool want_grad) {
  return score_image(scorer, prompted.pixels, want_grad);
}

Image normalize(const Image& image, const Normalization& norm) {
  if (image.channels != 3) throw ShapeError("normalization expects 3 channels");
  Image out = image;
  const std::size_t plane = static_cast<std::size_t>(image.height) * image.width;
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      auto& v = out.pixels[c * plane + i];
      v = (v - norm.mean[c]) / norm.std[c];
    }
  }
  return out;
}

namespace {

struct Tap {
  int lo;
  int hi;
  double frac;  // weight of `hi`
};

std::vector<Tap> taps(int in, int out) {
  std::vector<Tap> t(out);
  const double scale = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    double src = (i + 0.5) * scale - 0.5;
    src = std::max(src, 0.0);
    int lo = std::min(static_cast<int>(std::floor(src)), in - 1);
    int hi = std::min(lo + 1, in - 1);
    t[i] = {lo, hi, src - lo};
  }
  return t;
}

}  // namespace

Image resize_bilinear(const Image& image, int height, int width) {
  if (height <= 0 || width <= 0) throw ShapeError("resize target must be positive");
  if (image.height == height && image.width == width) return image;
  const auto ty = taps(image.height, height);
  const auto tx = taps(image.width, width);
  Image out(image.channels, height, width);
  for (int c = 0; c < image.channels; ++c) {
    for (int r = 0; r < height; ++r) {
      const auto& y = ty[r];
      for (int col = 0; col < width; ++col) {
        const auto& x = tx[col];
        const double top = image.at(c, y.lo, x.lo) * (1.0 - x.frac) + image.at(c, y.lo, x.hi) * x.frac;
        const double bot = image.at(c, y.hi, x.lo) * (1.0 - x.frac) + image.at(c, y.hi, x.hi) * x.frac;
        out.at(c, r, col) = top * (1.0 - y.frac) + bot * y.frac;
      }
    }
  }
  return out;
}

Image center_crop(const Image& image, int height, int width) {
  if (height > image.height || width > image.width)
    throw ShapeError("crop window larger than image");
  const int top = (image.height - height) / 2;
  const int left = (image.width - width) / 2;
  Image out(image.channels, height, width);
  for (int c = 0; c < image.channels; ++c)
    for (int r = 0; r < height; ++r)
      for (int col = 0; col < width; ++col) out.at(c, r, col) = image.at(c, top + r, left + col);
  return out;
}

Image preprocess(const RawImage& raw, int height, int width) {
  if (raw.height < 1 || raw.width < 1 || raw.rgb.size() != static_cast<std::size_t>(raw.height) * raw.width * 3)
    throw IngestionError("raw image is empty or malformed");
  Image img(3, raw.height, raw.width);
  for (int r = 0; r < raw.height; ++r)
    for (int col = 0; col < raw.width; ++col)
      for (int c = 0; c < 3; ++c) img.at(c, r, col) = raw.at(r, col, c) / 255.0;

  const int target = std::max(height, width);
  int new_h = target;
  int new_w = target;
  // torchvision convention: the longer side is truncated, not rounded.
  if (raw.height <= raw.width) {
    new_w = static_cast<int>(static_cast<long long>(raw.width) * target / raw.height);
  } else {
    new_h = static_cast<int>(static_cast<long long>(raw.height) * target / raw.width);
  }
  return center_crop(resize_bilinear(img, new_h, new_w), height, width);
}

RawImage to_raw(const Image& image) {
  if (image.channels != 3) throw ShapeError("expected a 3-channel image");
  RawImage raw{image.height, image.width, {}};
  raw.rgb.resize(static_cast<std::size_t>(image.height) * image.width * 3);
  for (int r = 0; r < image.height; ++r)
    for (int col = 0; col < image.width; ++col)
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(image.at(c, r, col), 0.0, 1.0);
        raw.rgb[(static_cast<std::size_t>(r) * image.width + col) * 3 + c] =
            static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
  return raw;
}

}  // namespace vpiqa
