// SPDX-License-Identifier: Apache-2.0
#pragma once

/// Out-of-process scorer adapter.
///
/// Request (little-endian):
///   u32 C, u32 H, u32 W
///   f32 x C*H*W          composed image in [0, 1], channel-major, unnormalized
///   u32 n, u8 x n        textual prompt, UTF-8
///   u8                   want_grad (0 or 1)
///   u32 |P|, u32 x |P|   positive token IDs
///   u32 |N|, u32 x |N|   negative token IDs
///
/// Response (little-endian):
///   u32 V
///   f64 x V              final-position logits
///   u8                   has_grad
///   if has_grad: u32 C, u32 H, u32 W, f32 x C*H*W
///                        d(quality score)/d(composed pixels)
///
/// The HTTP transport posts the request body to `<url>/score` with content
/// type application/octet-stream and expects the response as the body.

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>

#include "vpiqa/backend.hpp"
#include "vpiqa/io.hpp"

namespace httplib {
class Server;
}

namespace vpiqa {

struct AdapterRequest {
  Image image;
  std::string textual_prompt;
  bool want_grad = false;
  std::vector<TokenId> positive;
  std::vector<TokenId> negative;
};

struct AdapterResponse {
  std::vector<double> logits;
  std::optional<Image> grad;
};

Bytes encode_request(const AdapterRequest& req);
AdapterRequest decode_request(std::span<const std::uint8_t> bytes);
Bytes encode_response(const AdapterResponse& resp);
AdapterResponse decode_response(std::span<const std::uint8_t> bytes);

/// Frozen scorer reached over HTTP. Normalization is owned by the server.
class HttpScorer final : public FrozenScorer {
 public:
  HttpScorer(BackendConfig cfg, std::string url, int timeout_seconds = 600);

  const BackendConfig& config() const override { return cfg_; }
  ScorerOutput score(const Image& composed, bool want_grad) const override;
  std::uint64_t state_hash() const override;

 private:
  BackendConfig cfg_;
  std::string url_;
  int timeout_seconds_;
};

/// Serves any FrozenScorer with the adapter wire contract.
class AdapterServer {
 public:
  explicit AdapterServer(const FrozenScorer& scorer);
  ~AdapterServer();
  AdapterServer(const AdapterServer&) = delete;
  AdapterServer& operator=(const AdapterServer&) = delete;

  /// Binds to an ephemeral port on `host` and serves on a background thread.
  int start(const std::string& host = "127.0.0.1");
  void stop();

 private:
  const FrozenScorer& scorer_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace vpiqa
