// SPDX-License-Identifier: Apache-2.0
#include "vpiqa/toy_scorer.hpp"

#include <cmath>

#include "vpiqa/error.hpp"
#include "vpiqa/io.hpp"

namespace vpiqa {

namespace {

struct CropWindow {
  int top, left, height, width;
};

CropWindow central_half(int h, int w) { return {h / 4, w / 4, h / 2, w / 2}; }

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

BackendConfig ToyScorer::default_config() {
  BackendConfig cfg;
  cfg.name = "toy";
  cfg.input_height = 32;
  cfg.input_width = 32;
  cfg.vocab_size = 4;
  cfg.token_sets = resolve_token_sets(default_positive_labels(), default_negative_labels(), vocabulary());
  return cfg;
}

Vocabulary ToyScorer::vocabulary() {
  return Vocabulary({{"good", {0}}, {"fine", {1}}, {"poor", {2}}, {"bad", {3}}}, 4);
}

ToyScorer::ToyScorer(BackendConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (cfg_.vocab_size != 4) throw ConfigError("toy backend has a vocabulary of exactly 4 tokens");
  if (cfg_.input_height < 2 || cfg_.input_width < 2)
    throw ConfigError("toy backend needs at least 2x2 inputs");
}

ToyScorer::Features ToyScorer::features(const Image& x) const {
  const int h = x.height;
  const int w = x.width;
  const auto crop = central_half(h, w);
  double total = 0.0, center = 0.0, dx = 0.0, dy = 0.0;
  for (int c = 0; c < x.channels; ++c) {
    for (int r = 0; r < h; ++r) {
      for (int col = 0; col < w; ++col) {
        const double v = x.at(c, r, col);
        total += v;
        if (r >= crop.top && r < crop.top + crop.height && col >= crop.left && col < crop.left + crop.width)
          center += v;
        if (col + 1 < w) dx += std::abs(x.at(c, r, col + 1) - v);
        if (r + 1 < h) dy += std::abs(x.at(c, r + 1, col) - v);
      }
    }
  }
  const double n = static_cast<double>(x.channels) * h * w;
  return {total / n, center / (static_cast<double>(x.channels) * crop.height * crop.width),
          dx / (static_cast<double>(x.channels) * h * (w - 1)), dy / (static_cast<double>(x.channels) * (h - 1) * w)};
}

LogitVector ToyScorer::logits_from_normalized(const Image& normalized) const {
  const auto f = features(normalized);
  LogitVector out;
  out.values.resize(4);
  for (int k = 0; k < 4; ++k) {
    double v = bias_[k];
    for (int j = 0; j < 4; ++j) v += weights_[k][j] * f[j];
    out.values[k] = v;
  }
  out.position = 0;
  return out;
}

ScorerOutput ToyScorer::score(const Image& composed, bool want_grad) const {
  const Image x = normalize(composed, cfg_.normalization);
  ScorerOutput out;
  out.logits = logits_from_normalized(x);
  out.score = quality_score(out.logits, cfg_.token_sets);
  if (!want_grad) return out;

  // d s / d f = A^T d s / d logits
  const auto ds_dl = quality_score_gradient(out.logits, cfg_.token_sets);
  Features ds_df{};
  for (int j = 0; j < 4; ++j)
    for (int k = 0; k < 4; ++k) ds_df[j] += weights_[k][j] * ds_dl[k];

  const int h = x.height;
  const int w = x.width;
  const auto crop = central_half(h, w);
  const double c_all = ds_df[0] / (3.0 * h * w);
  const double c_center = ds_df[1] / (3.0 * crop.height * crop.width);
  const double c_dx = ds_df[2] / (3.0 * h * (w - 1));
  const double c_dy = ds_df[3] / (3.0 * (h - 1) * w);

  Image grad(3, h, w, 0.0);
  for (int c = 0; c < 3; ++c) {
    for (int r = 0; r < h; ++r) {
      for (int col = 0; col < w; ++col) {
        double g = c_all;
        if (r >= crop.top && r < crop.top + crop.height && col >= crop.left && col < crop.left + crop.width)
          g += c_center;
        if (col + 1 < w) {
          const double s = sign(x.at(c, r, col + 1) - x.at(c, r, col));
          grad.at(c, r, col + 1) += c_dx * s;
          g -= c_dx * s;
        }
        if (r + 1 < h) {
          const double s = sign(x.at(c, r + 1, col) - x.at(c, r, col));
          grad.at(c, r + 1, col) += c_dy * s;
          g -= c_dy * s;
        }
        grad.at(c, r, col) += g;
      }
    }
  }
  // Chain through the normalization: d(normalized)/d(pixel) = 1 / std_c.
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < plane; ++i) grad.pixels[c * plane + i] /= cfg_.normalization.std[c];
  out.grad_wrt_image = std::move(grad);
  return out;
}

std::uint64_t ToyScorer::state_hash() const {
  ByteWriter w;
  w.u64(cfg_.hash());
  for (const auto& row : weights_)
    for (double v : row) w.f64(v);
  for (double v : bias_) w.f64(v);
  return fnv1a(w.bytes());
}

}  // namespace vpiqa
