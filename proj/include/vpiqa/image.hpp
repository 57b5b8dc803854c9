// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace vpiqa {

/// Planar C x H x W image with real-valued samples (channel-major).
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w),
        pixels(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t index(int c, int r, int col) const {
    return (static_cast<std::size_t>(c) * height + r) * width + col;
  }
  double& at(int c, int r, int col) { return pixels[index(c, r, col)]; }
  double at(int c, int r, int col) const { return pixels[index(c, r, col)]; }

  std::size_t size() const { return pixels.size(); }
  bool same_dims(const Image& other) const {
    return channels == other.channels && height == other.height && width == other.width;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Interleaved 8-bit RGB raster as decoded from disk.
struct RawImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  std::uint8_t at(int r, int col, int c) const {
    return rgb[(static_cast<std::size_t>(r) * width + col) * 3 + c];
  }
};

/// True when every sample lies in [0, 1].
bool in_unit_range(const Image& image);

}  // namespace vpiqa
