// SPDX-License-Identifier: Apache-2.0
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "vpiqa/backend.hpp"
#include "vpiqa/error.hpp"
#include "vpiqa/io.hpp"

namespace vpiqa {

RawImage decode_image_file(const std::filesystem::path& path) {
  cv::Mat bgr;
  try {
    bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    throw IngestionError("cannot decode " + path.string() + ": " + e.what());
  }
  if (bgr.empty()) throw IngestionError("cannot decode image " + path.string());
  RawImage raw{bgr.rows, bgr.cols, {}};
  raw.rgb.resize(static_cast<std::size_t>(bgr.rows) * bgr.cols * 3);
  for (int r = 0; r < bgr.rows; ++r) {
    const auto* row = bgr.ptr<cv::Vec3b>(r);
    for (int col = 0; col < bgr.cols; ++col) {
      auto* px = &raw.rgb[(static_cast<std::size_t>(r) * bgr.cols + col) * 3];
      px[0] = row[col][2];
      px[1] = row[col][1];
      px[2] = row[col][0];
    }
  }
  return raw;
}

void write_image_file(const std::filesystem::path& path, const Image& image) {
  const auto raw = to_raw(image);
  cv::Mat bgr(raw.height, raw.width, CV_8UC3);
  for (int r = 0; r < raw.height; ++r) {
    auto* row = bgr.ptr<cv::Vec3b>(r);
    for (int col = 0; col < raw.width; ++col) row[col] = {raw.at(r, col, 2), raw.at(r, col, 1), raw.at(r, col, 0)};
  }
  std::vector<uchar> encoded;
  bool ok = false;
  try {
    ok = cv::imencode(path.extension().string(), bgr, encoded);
  } catch (const cv::Exception& e) {
    throw Error("cannot encode image " + path.string() + ": " + e.what());
  }
  if (!ok) throw Error("cannot encode image " + path.string());
  write_file_atomic(path, encoded);
}

}  // namespace vpiqa
