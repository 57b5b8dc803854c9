// SPDX-License-Identifier: Apache-2.0
#include "vpiqa/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "vpiqa/backend.hpp"
#include "vpiqa/error.hpp"

namespace vpiqa {

Image box_blur(const Image& image) {
  Image out(image.channels, image.height, image.width);
  const int h = image.height;
  const int w = image.width;
  for (int c = 0; c < image.channels; ++c) {
    for (int r = 0; r < h; ++r) {
      for (int col = 0; col < w; ++col) {
        double acc = 0.0;
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc)
            acc += image.at(c, std::clamp(r + dr, 0, h - 1), std::clamp(col + dc, 0, w - 1));
        out.at(c, r, col) = acc / 9.0;
      }
    }
  }
  return out;
}

namespace {

double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

BlurDataset make_blur_dataset(const BlurDatasetSpec& spec) {
  if (spec.count == 0 || spec.levels < 2 || spec.height < 2 || spec.width < 2 || spec.block < 1)
    throw ConfigError("blur dataset needs count > 0, levels >= 2 and dims >= 2");
  if (!(spec.mos_hi > spec.mos_lo) || spec.mos_sharp > spec.mos_hi ||
      spec.mos_sharp - spec.mos_step * (spec.levels - 1) < spec.mos_lo)
    throw ConfigError("blur dataset MOS values fall outside [mos_lo, mos_hi]");
  std::mt19937_64 rng(spec.seed);
  BlurDataset data;
  std::vector<std::pair<std::string, double>> rows;
  for (std::size_t i = 0; i < spec.count; ++i) {
    const int level = static_cast<int>(i % spec.levels);
    const double mean = spec.brightness_lo + (spec.brightness_hi - spec.brightness_lo) * uniform(rng);
    const double amplitude = spec.amplitude_lo + (spec.amplitude_hi - spec.amplitude_lo) * uniform(rng);
    Image img(3, spec.height, spec.width);
    for (int c = 0; c < 3; ++c)
      for (int br = 0; br < spec.height; br += spec.block)
        for (int bc = 0; bc < spec.width; bc += spec.block) {
          const double v = mean + amplitude * (2.0 * uniform(rng) - 1.0);
          for (int r = br; r < std::min(br + spec.block, spec.height); ++r)
            for (int col = bc; col < std::min(bc + spec.block, spec.width); ++col) img.at(c, r, col) = v;
        }
    for (int k = 0; k < level; ++k) img = box_blur(img);
    for (auto& v : img.pixels) v = std::round(std::clamp(v, 0.02, 0.98) * 255.0) / 255.0;

    char name[32];
    std::snprintf(name, sizeof name, "img_%04zu.png", i);
    const double mos = spec.mos_sharp - spec.mos_step * level;
    rows.emplace_back(name, mos);
    data.samples.push_back({name, std::move(img), 0.0});
  }
  data.manifest = make_manifest("synthetic_blur", std::move(rows), {spec.mos_lo, spec.mos_hi});
  for (std::size_t i = 0; i < data.samples.size(); ++i) data.samples[i].target = data.manifest.entries[i].mos_norm;
  return data;
}

std::filesystem::path write_blur_dataset(const BlurDataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& s : data.samples) write_image_file(dir / s.id, s.image);
  auto manifest = data.manifest;
  manifest.base_dir = dir;
  const auto csv = dir / "manifest.csv";
  write_manifest_csv(manifest, csv);
  return csv;
}

}  // namespace vpiqa
