// SPDX-License-Identifier: Apache-2.0
#pragma once

/// Prompt checkpoint format (all integers little-endian):
///
///   "VPQ1"                magic, 4 bytes
///   kind                  u8   (1 padding, 2 patch_center, 3 patch_top_left, 4 full_overlay)
///   S, H, W, C            u32 each
///   param count           u64
///   raw params            f32 x count, in layout order

#include <cstdint>
#include <filesystem>
#include <span>

#include "vpiqa/io.hpp"
#include "vpiqa/prompt.hpp"

namespace vpiqa {

struct CheckpointHeader {
  PromptShape shape;
  std::uint64_t param_count = 0;
};

Bytes encode_checkpoint(const VisualPrompt& prompt);
VisualPrompt decode_checkpoint(std::span<const std::uint8_t> bytes);
/// Parses and validates only the header.
CheckpointHeader decode_checkpoint_header(std::span<const std::uint8_t> bytes);

void save_checkpoint(const VisualPrompt& prompt, const std::filesystem::path& path);
VisualPrompt load_checkpoint(const std::filesystem::path& path);

}  // namespace vpiqa
