// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vpiqa/image.hpp"

namespace vpiqa {

struct MosRange {
  double lo = 0.0;
  double hi = 1.0;
};

struct ManifestEntry {
  std::string image_ref;
  double mos_raw = 0.0;
  double mos_norm = 0.0;
};

struct SampleManifest {
  std::string dataset_id;
  MosRange mos_range;
  std::vector<ManifestEntry> entries;
  /// Directory that relative image_refs are resolved against.
  std::filesystem::path base_dir;

  std::size_t size() const { return entries.size(); }
  std::filesystem::path resolve(const ManifestEntry& e) const;
};

/// Min-max over the nominal range, clipped to [0, 1].
double normalize_mos(double raw, const MosRange& range);

/// Builds a manifest from (image_ref, raw MOS) rows; enforces unique refs
/// and hi > lo.
SampleManifest make_manifest(std::string dataset_id, std::vector<std::pair<std::string, double>> rows,
                             const MosRange& range, std::filesystem::path base_dir = {});

/// Reads a `path,mos` CSV (header required). Row order is preserved.
SampleManifest load_manifest(const std::filesystem::path& csv_path, const MosRange& range,
                             std::string dataset_id = {});
void write_manifest_csv(const SampleManifest& manifest, const std::filesystem::path& csv_path);

enum class SplitPolicy { Official, Ratio80_10_10, Ratio60_20_20 };

std::string to_string(SplitPolicy policy);
SplitPolicy parse_split_policy(const std::string& name);

struct SplitSpec {
  SplitPolicy policy = SplitPolicy::Ratio80_10_10;
  std::uint64_t seed = 0;
  /// CSV `path,split` with split in {train, val, test}; Official only.
  std::optional<std::filesystem::path> official_split_file;
};

struct ManifestSplit {
  SampleManifest train;
  SampleManifest val;
  SampleManifest test;
};

/// Ratio policies: seeded shuffle, then contiguous train/val/test slices
/// with val and test sizes rounded to nearest. Official: per-path lookup.
ManifestSplit split(const SampleManifest& manifest, const SplitSpec& spec);

/// Deterministic Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Explicit augmentation RNG state, one per worker.
class AugmentRng {
 public:
  explicit AugmentRng(std::uint64_t seed) : engine_(seed) {}
  bool next_flip() { return (engine_() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
};

/// Reverses columns.
Image hflip(const Image& image);
/// Horizontal flip with probability 0.5. Applied before prompt composition.
Image augment(const Image& image, AugmentRng& rng);

/// A decoded, preprocessed sample ready for scoring.
struct Sample {
  std::string id;
  Image image;
  double target = 0.0;
};

/// Decodes and preprocesses every manifest entry to height x width.
/// Failures name the offending entry.
std::vector<Sample> load_samples(const SampleManifest& manifest, int height, int width);

}  // namespace vpiqa
