// SPDX-License-Identifier: Apache-2.0
#include "vpiqa/checkpoint.hpp"

#include <cstring>

#include "vpiqa/error.hpp"

namespace vpiqa {

namespace {

constexpr char kMagic[4] = {'V', 'P', 'Q', '1'};

CheckpointHeader read_header(ByteReader<CheckpointError>& in, std::size_t total) {
  if (total < 4 || in.str(4) != std::string_view(kMagic, 4)) throw CheckpointError("bad checkpoint header");
  CheckpointHeader h;
  const auto kind = in.u8();
  if (kind < 1 || kind > 4) throw CheckpointError("bad checkpoint header: unknown prompt kind " + std::to_string(kind));
  h.shape.kind = static_cast<PromptKind>(kind);
  h.shape.size = static_cast<int>(in.u32());
  h.shape.height = static_cast<int>(in.u32());
  h.shape.width = static_cast<int>(in.u32());
  h.shape.channels = static_cast<int>(in.u32());
  h.param_count = in.u64();
  try {
    h.shape.validate();
  } catch (const ShapeError& e) {
    throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
  }
  const auto expected = param_count(h.shape);
  if (h.param_count != expected) {
    throw CheckpointError("checkpoint declares " + std::to_string(h.param_count) +
                          " parameters but its shape requires " + std::to_string(expected));
  }
  return h;
}

}  // namespace

Bytes encode_checkpoint(const VisualPrompt& prompt) {
  const auto& s = prompt.shape();
  ByteWriter w;
  w.raw(std::string_view(kMagic, 4));
  w.u8(static_cast<std::uint8_t>(s.kind));
  w.u32(static_cast<std::uint32_t>(s.size));
  w.u32(static_cast<std::uint32_t>(s.height));
  w.u32(static_cast<std::uint32_t>(s.width));
  w.u32(static_cast<std::uint32_t>(s.channels));
  w.u64(prompt.size());
  for (double v : prompt.raw_params()) w.f32(static_cast<float>(v));
  return std::move(w).bytes();
}

CheckpointHeader decode_checkpoint_header(std::span<const std::uint8_t> bytes) {
  ByteReader<CheckpointError> in(bytes);
  return read_header(in, bytes.size());
}

VisualPrompt decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader<CheckpointError> in(bytes);
  const auto h = read_header(in, bytes.size());
  if (in.remaining() != h.param_count * 4) {
    throw CheckpointError("checkpoint payload holds " + std::to_string(in.remaining()) + " bytes, expected " +
                          std::to_string(h.param_count * 4));
  }
  std::vector<double> raw(h.param_count);
  for (auto& v : raw) v = in.f32();
  try {
    return VisualPrompt(h.shape, std::move(raw));
  } catch (const InputError& e) {
    throw CheckpointError(std::string("checkpoint parameters invalid: ") + e.what());
  }
}

void save_checkpoint(const VisualPrompt& prompt, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(prompt));
}

VisualPrompt load_checkpoint(const std::filesystem::path& path) {
  Bytes bytes;
  try {
    bytes = read_file_bytes(path);
  } catch (const IngestionError& e) {
    throw CheckpointError(e.what());
  }
  return decode_checkpoint(bytes);
}

}  // namespace vpiqa
