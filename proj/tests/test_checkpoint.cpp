// SPDX-License-Identifier: Apache-2.0
#include <unistd.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "vpiqa/checkpoint.hpp"
#include "vpiqa/error.hpp"
#include "vpiqa/io.hpp"

using namespace vpiqa;
namespace fs = std::filesystem;

namespace {

VisualPrompt sample_prompt(const PromptShape& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto raw = oracle::random_params(rng, param_count(s), 2.0);
  for (auto& v : raw) v = static_cast<float>(v);
  return VisualPrompt(s, raw);
}

fs::path temp_dir(const char* name) {
  auto d = fs::temp_directory_path() / ("vpiqa_" + std::string(name) + "_" + std::to_string(::getpid()));
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("header layout") {
  const auto p = sample_prompt(PromptShape::padding(2, 10, 12), 1);
  const Bytes b = encode_checkpoint(p);
  REQUIRE(b.size() == 4 + 1 + 16 + 8 + 4 * p.size());
  CHECK(std::memcmp(b.data(), "VPQ1", 4) == 0);
  CHECK(b[4] == 1);
  CHECK(b[5] == 2);    // S, little-endian
  CHECK(b[9] == 10);   // H
  CHECK(b[13] == 12);  // W
  CHECK(b[17] == 3);   // C
  const auto h = decode_checkpoint_header(b);
  CHECK(h.shape == p.shape());
  CHECK(h.param_count == p.size());
}

TEST_CASE("round trip is byte-identical") {
  const auto dir = temp_dir("ckpt");
  for (const auto& s : {PromptShape::padding(3, 16, 16), PromptShape::patch_center(4, 16, 16),
                        PromptShape::patch_top_left(5, 16, 16), PromptShape::full_overlay(16, 16)}) {
    const auto p = sample_prompt(s, 9);
    save_checkpoint(p, dir / "a.vpq");
    const auto q = load_checkpoint(dir / "a.vpq");
    CHECK(q == p);
    save_checkpoint(q, dir / "b.vpq");
    CHECK(read_file_bytes(dir / "a.vpq") == read_file_bytes(dir / "b.vpq"));
  }
  fs::remove_all(dir);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const auto p = sample_prompt(PromptShape::patch_top_left(2, 8, 8), 2);
  const Bytes good = encode_checkpoint(p);

  Bytes bad = good;
  bad[0] = 'X';
  CHECK_THROWS_WITH_AS(decode_checkpoint(bad), doctest::Contains("bad checkpoint header"), CheckpointError);

  bad = good;
  bad[4] = 9;
  CHECK_THROWS_AS(decode_checkpoint(bad), CheckpointError);

  bad = good;
  bad.pop_back();
  CHECK_THROWS_AS(decode_checkpoint(bad), CheckpointError);

  bad = good;
  bad.push_back(0);
  CHECK_THROWS_AS(decode_checkpoint(bad), CheckpointError);

  bad = good;
  bad[21] = 13;  // declared count disagrees with the geometry
  CHECK_THROWS_AS(decode_checkpoint(bad), CheckpointError);

  bad = good;
  bad[5] = 0;  // S = 0 is not a valid patch
  CHECK_THROWS_AS(decode_checkpoint(bad), CheckpointError);

  CHECK_THROWS_AS(decode_checkpoint(Bytes{}), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/prompt.vpq"), CheckpointError);
}
