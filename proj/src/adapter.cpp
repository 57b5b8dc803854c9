// SPDX-License-Identifier: Apache-2.0
#include "vpiqa/adapter.hpp"

#include <cmath>

#include "httplib.h"
#include "vpiqa/error.hpp"

namespace vpiqa {

namespace {

constexpr std::uint32_t kMaxDim = 1u << 15;

void put_tensor(ByteWriter& w, const Image& image) {
  w.u32(static_cast<std::uint32_t>(image.channels));
  w.u32(static_cast<std::uint32_t>(image.height));
  w.u32(static_cast<std::uint32_t>(image.width));
  for (double v : image.pixels) w.f32(static_cast<float>(v));
}

Image get_tensor(ByteReader<BackendError>& in) {
  const auto c = in.u32();
  const auto h = in.u32();
  const auto wd = in.u32();
  if (c == 0 || h == 0 || wd == 0 || c > 16 || h > kMaxDim || wd > kMaxDim)
    throw BackendError("adapter tensor has invalid dims");
  Image image(static_cast<int>(c), static_cast<int>(h), static_cast<int>(wd));
  if (in.remaining() < image.size() * 4) throw BackendError("truncated data");
  for (auto& v : image.pixels) v = in.f32();
  return image;
}

void put_ids(ByteWriter& w, const std::vector<TokenId>& ids) {
  w.u32(static_cast<std::uint32_t>(ids.size()));
  for (auto id : ids) w.u32(id);
}

std::vector<TokenId> get_ids(ByteReader<BackendError>& in) {
  const auto n = in.u32();
  if (in.remaining() < std::size_t{n} * 4) throw BackendError("truncated data");
  std::vector<TokenId> ids(n);
  for (auto& id : ids) id = in.u32();
  return ids;
}

}  // namespace

Bytes encode_request(const AdapterRequest& req) {
  ByteWriter w;
  put_tensor(w, req.image);
  w.u32(static_cast<std::uint32_t>(req.textual_prompt.size()));
  w.raw(req.textual_prompt);
  w.u8(req.want_grad ? 1 : 0);
  put_ids(w, req.positive);
  put_ids(w, req.negative);
  return std::move(w).bytes();
}

AdapterRequest decode_request(std::span<const std::uint8_t> bytes) {
  ByteReader<BackendError> in(bytes);
  AdapterRequest req;
  req.image = get_tensor(in);
  req.textual_prompt = in.str(in.u32());
  const auto flag = in.u8();
  if (flag > 1) throw BackendError("want_grad flag must be 0 or 1");
  req.want_grad = flag == 1;
  req.positive = get_ids(in);
  req.negative = get_ids(in);
  if (in.remaining() != 0) throw BackendError("trailing bytes in adapter request");
  return req;
}

Bytes encode_response(const AdapterResponse& resp) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(resp.logits.size()));
  for (double v : resp.logits) w.f64(v);
  w.u8(resp.grad ? 1 : 0);
  if (resp.grad) put_tensor(w, *resp.grad);
  return std::move(w).bytes();
}

AdapterResponse decode_response(std::span<const std::uint8_t> bytes) {
  ByteReader<BackendError> in(bytes);
  AdapterResponse resp;
  const auto v = in.u32();
  if (in.remaining() < std::size_t{v} * 8) throw BackendError("truncated data");
  resp.logits.resize(v);
  for (auto& l : resp.logits) l = in.f64();
  const auto has_grad = in.u8();
  if (has_grad > 1) throw BackendError("has_grad flag must be 0 or 1");
  if (has_grad) resp.grad = get_tensor(in);
  if (in.remaining() != 0) throw BackendError("trailing bytes in adapter response");
  return resp;
}

HttpScorer::HttpScorer(BackendConfig cfg, std::string url, int timeout_seconds)
    : cfg_(std::move(cfg)), url_(std::move(url)), timeout_seconds_(timeout_seconds) {
  cfg_.validate();
  if (url_.empty()) throw ConfigError("http backend needs a url");
}

ScorerOutput HttpScorer::score(const Image& composed, bool want_grad) const {
  AdapterRequest req{composed, cfg_.textual_prompt, want_grad, cfg_.token_sets.positive,
                     cfg_.token_sets.negative};
  const auto body = encode_request(req);

  httplib::Client client(url_);
  client.set_read_timeout(timeout_seconds_, 0);
  client.set_write_timeout(timeout_seconds_, 0);
  auto res = client.Post("/score", reinterpret_cast<const char*>(body.data()), body.size(),
                         "application/octet-stream");
  if (!res) throw BackendError("backend unavailable at " + url_ + ": " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw BackendError("backend at " + url_ + " answered HTTP " + std::to_string(res->status) + ": " + res->body);

  const auto* data = reinterpret_cast<const std::uint8_t*>(res->body.data());
  auto resp = decode_response({data, res->body.size()});

  ScorerOutput out;
  out.logits.values = std::move(resp.logits);
  for (double v : out.logits.values)
    if (!std::isfinite(v)) throw BackendError("backend returned a non-finite logit");
  if (out.logits.values.size() != cfg_.vocab_size)
    throw BackendError("backend returned " + std::to_string(out.logits.values.size()) + " logits, expected " +
                       std::to_string(cfg_.vocab_size));
  out.score = quality_score(out.logits, cfg_.token_sets);
  if (want_grad) {
    if (!resp.grad || !resp.grad->same_dims(composed)) throw BackendError("backend returned no usable gradient");
    out.grad_wrt_image = std::move(resp.grad);
  }
  return out;
}

std::uint64_t HttpScorer::state_hash() const {
  ByteWriter w;
  w.u64(cfg_.hash());
  w.raw(url_);
  return fnv1a(w.bytes());
}

AdapterServer::AdapterServer(const FrozenScorer& scorer) : scorer_(scorer) {}

AdapterServer::~AdapterServer() { stop(); }

int AdapterServer::start(const std::string& host) {
  server_ = std::make_unique<httplib::Server>();
  server_->Post("/score", [this](const httplib::Request& http_req, httplib::Response& http_res) {
    try {
      const auto* data = reinterpret_cast<const std::uint8_t*>(http_req.body.data());
      auto req = decode_request({data, http_req.body.size()});
      const auto& sets = scorer_.config().token_sets;
      if (req.want_grad && (req.positive != sets.positive || req.negative != sets.negative))
        throw BackendError("requested token sets differ from the served scorer's sets");
      auto out = score_image(scorer_, req.image, req.want_grad);
      AdapterResponse resp{std::move(out.logits.values), std::move(out.grad_wrt_image)};
      const auto bytes = encode_response(resp);
      http_res.set_content(std::string(bytes.begin(), bytes.end()), "application/octet-stream");
    } catch (const std::exception& e) {
      http_res.status = 400;
      http_res.set_content(e.what(), "text/plain");
    }
  });
  const int port = server_->bind_to_any_port(host);
  if (port < 0) throw BackendError("cannot bind adapter server on " + host);
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port;
}

void AdapterServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
  server_.reset();
}

}  // namespace vpiqa
