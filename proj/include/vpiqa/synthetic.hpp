// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vpiqa/data.hpp"

namespace vpiqa {

/// Synthetic blur-graded dataset for desk-scale runs.
///
/// Image i gets blur level i % levels. Its content is a grid of
/// block x block tiles, each channel of each tile drawn uniformly at random
/// amplitude around a random mean brightness, smoothed by `level`
/// passes of a 3x3 box filter (edge-replicated), and kept inside
/// [0.02, 0.98], then quantized to 8 bits so that a PNG round trip is
/// lossless. Raw MOS is mos_sharp - mos_step * level on the nominal
/// [mos_lo, mos_hi] scale, so sharper images score higher. The defaults
/// (5, 0.5 on a 1..5 scale) put normalized targets in [0.5, 1], which is
/// the range the toy scorer can express.
struct BlurDatasetSpec {
  std::size_t count = 200;
  int levels = 5;
  int height = 32;
  int width = 32;
  std::uint64_t seed = 2024;
  int block = 2;
  double brightness_lo = 0.27;
  double brightness_hi = 0.33;
  double amplitude_lo = 0.18;
  double amplitude_hi = 0.22;
  double mos_lo = 1.0;
  double mos_hi = 5.0;
  double mos_sharp = 5.0;
  double mos_step = 0.5;
};

struct BlurDataset {
  SampleManifest manifest;
  std::vector<Sample> samples;  // same order as manifest entries
};

BlurDataset make_blur_dataset(const BlurDatasetSpec& spec);

/// One 3x3 box-filter pass with edge replication.
Image box_blur(const Image& image);

/// Writes PNGs plus `manifest.csv` into `dir`; returns the manifest path.
std::filesystem::path write_blur_dataset(const BlurDataset& data, const std::filesystem::path& dir);

}  // namespace vpiqa
