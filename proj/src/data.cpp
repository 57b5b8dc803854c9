// SPDX-License-Identifier: Apache-2.0
#include "vpiqa/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "vpiqa/backend.hpp"
#include "vpiqa/error.hpp"
#include "vpiqa/io.hpp"

namespace vpiqa {

std::filesystem::path SampleManifest::resolve(const ManifestEntry& e) const {
  std::filesystem::path p(e.image_ref);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

double normalize_mos(double raw, const MosRange& range) {
  if (!(range.hi > range.lo)) throw ConfigError("MOS range needs hi > lo");
  return std::clamp((raw - range.lo) / (range.hi - range.lo), 0.0, 1.0);
}

SampleManifest make_manifest(std::string dataset_id, std::vector<std::pair<std::string, double>> rows,
                             const MosRange& range, std::filesystem::path base_dir) {
  if (!(range.hi > range.lo))
    throw ConfigError("MOS range needs hi > lo, got [" + std::to_string(range.lo) + ", " +
                      std::to_string(range.hi) + "]");
  SampleManifest m{std::move(dataset_id), range, {}, std::move(base_dir)};
  std::set<std::string> seen;
  m.entries.reserve(rows.size());
  for (auto& [ref, mos] : rows) {
    if (!seen.insert(ref).second) throw IngestionError("duplicate image path in manifest: " + ref);
    if (!std::isfinite(mos)) throw IngestionError("non-finite MOS for " + ref);
    m.entries.push_back({std::move(ref), mos, normalize_mos(mos, range)});
  }
  return m;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

/// Splits one CSV record; supports double-quoted fields with "" escapes.
std::optional<std::vector<std::string>> parse_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      if (!trim(cur).empty()) return std::nullopt;
      cur.clear();
      quoted = was_quoted = true;
    } else if (ch == ',') {
      fields.push_back(was_quoted ? cur : trim(cur));
      cur.clear();
      was_quoted = false;
    } else {
      cur.push_back(ch);
    }
  }
  if (quoted) return std::nullopt;
  fields.push_back(was_quoted ? cur : trim(cur));
  return fields;
}

std::optional<double> parse_real(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

struct CsvTable {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;  // (line number, fields)
};

CsvTable read_csv(const std::filesystem::path& path, const std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    if (trim(line).empty()) continue;
    auto fields = parse_csv_line(line);
    if (!fields) throw IngestionError(path.string() + ":" + std::to_string(lineno) + ": malformed CSV row");
    if (!have_header) {
      if (*fields != header) {
        std::string want;
        for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
        throw IngestionError(path.string() + ":" + std::to_string(lineno) + ": expected header '" + want + "'");
      }
      have_header = true;
      continue;
    }
    if (fields->size() != header.size())
      throw IngestionError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                           std::to_string(header.size()) + " fields, got " + std::to_string(fields->size()));
    table.rows.emplace_back(lineno, std::move(*fields));
  }
  if (!have_header) throw IngestionError(path.string() + ": missing header");
  return table;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

}  // namespace

SampleManifest load_manifest(const std::filesystem::path& csv_path, const MosRange& range, std::string dataset_id) {
  if (!(range.hi > range.lo)) throw ConfigError("MOS range needs hi > lo");
  const auto table = read_csv(csv_path, {"path", "mos"});
  std::vector<std::pair<std::string, double>> rows;
  std::map<std::string, std::size_t> first_line;
  for (const auto& [lineno, f] : table.rows) {
    const auto mos = parse_real(f[1]);
    if (f[0].empty() || !mos)
      throw IngestionError(csv_path.string() + ":" + std::to_string(lineno) + ": malformed row");
    if (auto [it, fresh] = first_line.emplace(f[0], lineno); !fresh)
      throw IngestionError(csv_path.string() + ":" + std::to_string(lineno) + ": duplicate path '" + f[0] +
                           "' (first seen on line " + std::to_string(it->second) + ")");
    rows.emplace_back(f[0], *mos);
  }
  if (dataset_id.empty()) dataset_id = csv_path.stem().string();
  return make_manifest(std::move(dataset_id), std::move(rows), range, csv_path.parent_path());
}

void write_manifest_csv(const SampleManifest& manifest, const std::filesystem::path& csv_path) {
  std::ostringstream out;
  out.precision(17);
  out << "path,mos\n";
  for (const auto& e : manifest.entries) out << csv_field(e.image_ref) << ',' << e.mos_raw << '\n';
  write_text_atomic(csv_path, out.str());
}

std::string to_string(SplitPolicy policy) {
  switch (policy) {
    case SplitPolicy::Official: return "official";
    case SplitPolicy::Ratio80_10_10: return "ratio_80_10_10";
    case SplitPolicy::Ratio60_20_20: return "ratio_60_20_20";
  }
  return "unknown";
}

SplitPolicy parse_split_policy(const std::string& name) {
  for (auto p : {SplitPolicy::Official, SplitPolicy::Ratio80_10_10, SplitPolicy::Ratio60_20_20})
    if (to_string(p) == name) return p;
  throw ConfigError("unknown split policy '" + name + "'");
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  // Plain modulo draw: identical across standard library implementations.
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
  return idx;
}

ManifestSplit split(const SampleManifest& manifest, const SplitSpec& spec) {
  auto subset = [&](const std::string& suffix) {
    SampleManifest m{manifest.dataset_id + "/" + suffix, manifest.mos_range, {}, manifest.base_dir};
    return m;
  };
  ManifestSplit out{subset("train"), subset("val"), subset("test")};

  if (spec.policy == SplitPolicy::Official) {
    if (!spec.official_split_file) throw ConfigError("official split policy needs a split file");
    if (!std::filesystem::exists(*spec.official_split_file))
      throw IngestionError("official split file not found: " + spec.official_split_file->string());
    const auto table = read_csv(*spec.official_split_file, {"path", "split"});
    std::map<std::string, std::string> assignment;
    for (const auto& [lineno, f] : table.rows) {
      if (f[1] != "train" && f[1] != "val" && f[1] != "test")
        throw IngestionError(spec.official_split_file->string() + ":" + std::to_string(lineno) +
                             ": split must be train, val or test");
      if (!assignment.emplace(f[0], f[1]).second)
        throw IngestionError(spec.official_split_file->string() + ":" + std::to_string(lineno) +
                             ": duplicate path '" + f[0] + "'");
    }
    for (const auto& e : manifest.entries) {
      auto it = assignment.find(e.image_ref);
      if (it == assignment.end()) throw IngestionError("no official split assignment for " + e.image_ref);
      auto& target = it->second == "train" ? out.train : (it->second == "val" ? out.val : out.test);
      target.entries.push_back(e);
    }
    return out;
  }

  const std::size_t n = manifest.size();
  if (n < 10) throw ConfigError("ratio splits need at least 10 samples, got " + std::to_string(n));
  const double r_val = spec.policy == SplitPolicy::Ratio80_10_10 ? 0.1 : 0.2;
  const auto n_val = static_cast<std::size_t>(std::llround(n * r_val));
  const auto n_test = n_val;
  const auto n_train = n - n_val - n_test;
  const auto perm = seeded_permutation(n, spec.seed);
  for (std::size_t i = 0; i < n; ++i) {
    auto& target = i < n_train ? out.train : (i < n_train + n_val ? out.val : out.test);
    target.entries.push_back(manifest.entries[perm[i]]);
  }
  return out;
}

Image hflip(const Image& image) {
  Image out = image;
  for (int c = 0; c < image.channels; ++c)
    for (int r = 0; r < image.height; ++r)
      for (int col = 0; col < image.width; ++col) out.at(c, r, col) = image.at(c, r, image.width - 1 - col);
  return out;
}

Image augment(const Image& image, AugmentRng& rng) { return rng.next_flip() ? hflip(image) : image; }

std::vector<Sample> load_samples(const SampleManifest& manifest, int height, int width) {
  std::vector<Sample> out;
  out.reserve(manifest.size());
  for (const auto& e : manifest.entries) {
    try {
      out.push_back({e.image_ref, preprocess(decode_image_file(manifest.resolve(e)), height, width), e.mos_norm});
    } catch (const Error& err) {
      throw IngestionError("sample '" + e.image_ref + "': " + err.what());
    }
  }
  return out;
}

}  // namespace vpiqa
