// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Client for a remote reconstruction service speaking the JSON oracle
// protocol:
//
//   GET  /v1/health       -> {"model_id", "patch_size", "image_side"}
//   POST /v1/reconstruct  {"image", "height", "width", "channels",
//                          "patch_size", "unmasked"}
//                         -> {"masked_mse", "full_mse", "per_patch_mse",
//                             "model_id"}
//   errors                -> non-2xx with {"code", "message"}
//
// "image" is base64 of little-endian float32 pixels, row-major and
// channel-interleaved, in [0,1].

#ifndef KPP_ORACLE_CLIENT_HPP_
#define KPP_ORACLE_CLIENT_HPP_

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "kpp/error.hpp"
#include "kpp/oracle.hpp"
#include "kpp/patch_grid.hpp"
#include "kpp/patch_set.hpp"

namespace kpp::remote {

class ConnectionError : public OracleError {
 public:
  using OracleError::OracleError;
};

class TimeoutError : public ConnectionError {
 public:
  using ConnectionError::ConnectionError;
};

// Malformed or invariant-violating payloads.
class ProtocolError : public OracleError {
 public:
  using OracleError::OracleError;
};

class GeometryMismatch : public OracleError {
 public:
  using OracleError::OracleError;
};

// The server answered with an error envelope.
class ServerError : public OracleError {
 public:
  ServerError(std::string code, std::string message, int status)
      : OracleError("server error " + code + ": " + message),
        code_(std::move(code)), message_(std::move(message)), status_(status) {}
  const std::string& code() const { return code_; }
  const std::string& server_message() const { return message_; }
  int status() const { return status_; }

 private:
  std::string code_;
  std::string message_;
  int status_;
};

inline std::string base64_encode(std::string_view in) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((in.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < in.size(); i += 3) {
    const std::uint32_t v = (std::uint8_t(in[i]) << 16) |
                            (std::uint8_t(in[i + 1]) << 8) | std::uint8_t(in[i + 2]);
    out += kAlphabet[v >> 18 & 63];
    out += kAlphabet[v >> 12 & 63];
    out += kAlphabet[v >> 6 & 63];
    out += kAlphabet[v & 63];
  }
  if (i < in.size()) {
    std::uint32_t v = std::uint8_t(in[i]) << 16;
    if (i + 1 < in.size()) v |= std::uint8_t(in[i + 1]) << 8;
    out += kAlphabet[v >> 18 & 63];
    out += kAlphabet[v >> 12 & 63];
    out += i + 1 < in.size() ? kAlphabet[v >> 6 & 63] : '=';
    out += '=';
  }
  return out;
}

inline std::string base64_decode(std::string_view in) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (in.size() % 4 != 0) throw ProtocolError("base64: length not a multiple of 4");
  std::string out;
  out.reserve(in.size() / 4 * 3);
  for (std::size_t i = 0; i < in.size(); i += 4) {
    int v[4];
    int pad = 0;
    for (int j = 0; j < 4; ++j) {
      const char c = in[i + j];
      if (c == '=' && i + 4 == in.size() && j >= 2) {
        v[j] = 0;
        ++pad;
      } else if (pad > 0 || (v[j] = value(c)) < 0) {
        throw ProtocolError("base64: invalid character");
      }
    }
    const std::uint32_t bits = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
    out += static_cast<char>(bits >> 16 & 0xFF);
    if (pad < 2) out += static_cast<char>(bits >> 8 & 0xFF);
    if (pad < 1) out += static_cast<char>(bits & 0xFF);
  }
  return out;
}

// Pixels to little-endian float32 bytes.
inline std::string pack_f32(std::span<const float> values) {
  std::string bytes(values.size() * 4, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) bytes[i * 4 + b] = static_cast<char>(bits >> (8 * b) & 0xFF);
  }
  return bytes;
}

inline std::vector<float> unpack_f32(std::string_view bytes) {
  if (bytes.size() % 4 != 0) throw ProtocolError("float32 payload length not a multiple of 4");
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= std::uint32_t(std::uint8_t(bytes[i * 4 + b])) << (8 * b);
    }
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

struct OracleRequest {
  std::vector<float> image;  // h*w*c
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::size_t patch_size = 0;
  std::vector<PatchIndex> unmasked;  // sorted, distinct

  std::size_t n_patches() const {
    return patch_size == 0 ? 0 : (height / patch_size) * (width / patch_size);
  }

  // Throws ProtocolError whose message starts with the protocol error code.
  void validate() const {
    if (height == 0 || width == 0 || channels == 0 || patch_size == 0 ||
        height % patch_size != 0 || width % patch_size != 0) {
      throw ProtocolError("INVALID_GEOMETRY: bad image or patch dimensions");
    }
    if (image.size() != height * width * channels) {
      throw ProtocolError("INVALID_IMAGE: pixel count does not match dimensions");
    }
    for (std::size_t i = 0; i < unmasked.size(); ++i) {
      if (unmasked[i] >= n_patches() || (i > 0 && unmasked[i] <= unmasked[i - 1])) {
        throw ProtocolError("INVALID_INDICES: unmasked must be sorted, distinct and in range");
      }
    }
  }

  static OracleRequest from_image(const ImageTensor& img, std::size_t patch_size,
                                  const PatchSet& unmasked) {
    OracleRequest req;
    req.image.reserve(img.size());
    for (double v : img.data()) req.image.push_back(static_cast<float>(v));
    req.height = img.height();
    req.width = img.width();
    req.channels = img.channels();
    req.patch_size = patch_size;
    req.unmasked = unmasked.sorted();
    return req;
  }

  friend bool operator==(const OracleRequest&, const OracleRequest&) = default;
};

inline nlohmann::json to_json(const OracleRequest& req) {
  return nlohmann::json{{"image", base64_encode(pack_f32(req.image))},
                        {"height", req.height},
                        {"width", req.width},
                        {"channels", req.channels},
                        {"patch_size", req.patch_size},
                        {"unmasked", req.unmasked}};
}

inline OracleRequest request_from_json(const nlohmann::json& j) {
  try {
    OracleRequest req;
    req.image = unpack_f32(base64_decode(j.at("image").get<std::string>()));
    req.height = j.at("height").get<std::size_t>();
    req.width = j.at("width").get<std::size_t>();
    req.channels = j.at("channels").get<std::size_t>();
    req.patch_size = j.at("patch_size").get<std::size_t>();
    req.unmasked = j.at("unmasked").get<std::vector<PatchIndex>>();
    return req;
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed request: ") + e.what());
  }
}

struct OracleResponse {
  double masked_mse = 0.0;
  double full_mse = 0.0;
  std::vector<double> per_patch_mse;
  std::string model_id;

  void validate(std::size_t expected_patches) const {
    if (per_patch_mse.size() != expected_patches) {
      throw ProtocolError("per_patch_mse has " + std::to_string(per_patch_mse.size()) +
                          " entries, expected " + std::to_string(expected_patches));
    }
    auto bad = [](double v) { return !(v >= 0.0) || !std::isfinite(v); };
    if (bad(masked_mse) || bad(full_mse)) {
      throw ProtocolError("negative or non-finite loss in response");
    }
    for (double v : per_patch_mse) {
      if (bad(v)) throw ProtocolError("negative or non-finite per-patch loss in response");
    }
  }

  friend bool operator==(const OracleResponse&, const OracleResponse&) = default;
};

inline nlohmann::json to_json(const OracleResponse& r) {
  return nlohmann::json{{"masked_mse", r.masked_mse},
                        {"full_mse", r.full_mse},
                        {"per_patch_mse", r.per_patch_mse},
                        {"model_id", r.model_id}};
}

inline OracleResponse response_from_json(const nlohmann::json& j) {
  try {
    OracleResponse r;
    r.masked_mse = j.at("masked_mse").get<double>();
    r.full_mse = j.at("full_mse").get<double>();
    r.per_patch_mse = j.at("per_patch_mse").get<std::vector<double>>();
    r.model_id = j.at("model_id").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed response: ") + e.what());
  }
}

struct HealthInfo {
  std::string model_id;
  std::size_t patch_size = 0;
  std::size_t image_side = 0;
};

struct ClientConfig {
  std::string url;
  std::chrono::milliseconds timeout{30000};
  int retries = 2;
  std::size_t max_in_flight = 4;
};

// KPP_ORACLE_URL unless a non-empty override is given.
inline std::string resolve_oracle_url(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("KPP_ORACLE_URL")) return env;
  return "";
}

class OracleClient {
 public:
  explicit OracleClient(ClientConfig config)
      : config_(std::move(config)),
        slots_(static_cast<std::ptrdiff_t>(
            std::clamp<std::size_t>(config_.max_in_flight, 1, kMaxInFlight))) {
    if (config_.url.empty()) throw std::invalid_argument("oracle URL is empty");
  }

  const ClientConfig& config() const { return config_; }

  HealthInfo health() const {
    const std::string body = round_trip("GET", "/v1/health", "");
    try {
      const auto j = nlohmann::json::parse(body);
      return HealthInfo{j.at("model_id").get<std::string>(),
                        j.at("patch_size").get<std::size_t>(),
                        j.at("image_side").get<std::size_t>()};
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError(std::string("malformed health response: ") + e.what());
    }
  }

  // Throws GeometryMismatch unless the server's geometry equals grid.
  HealthInfo require_geometry(const GridSpec& grid) const {
    HealthInfo h = health();
    if (h.patch_size != grid.patch_side() || h.image_side != grid.image_side()) {
      throw GeometryMismatch(
          "server geometry (image_side " + std::to_string(h.image_side) +
          ", patch_size " + std::to_string(h.patch_size) +
          ") does not match local grid (image_side " +
          std::to_string(grid.image_side()) + ", patch_size " +
          std::to_string(grid.patch_side()) + ")");
    }
    return h;
  }

  OracleResponse reconstruct_remote(const OracleRequest& req) const {
    req.validate();
    const std::string body =
        round_trip("POST", "/v1/reconstruct", to_json(req).dump());
    OracleResponse resp;
    try {
      resp = response_from_json(nlohmann::json::parse(body));
    } catch (const nlohmann::json::parse_error& e) {
      throw ProtocolError(std::string("response is not JSON: ") + e.what());
    }
    resp.validate(req.n_patches());
    return resp;
  }

 private:
  static constexpr std::size_t kMaxInFlight = 64;

  // One HTTP exchange with retry on timeout. Returns the 2xx body.
  std::string round_trip(const std::string& method, const std::string& path,
                         const std::string& body) const {
    slots_.acquire();
    struct Release {
      std::counting_semaphore<kMaxInFlight>& s;
      ~Release() { s.release(); }
    } release{slots_};

    for (int attempt = 0;; ++attempt) {
      httplib::Client cli(config_.url);
      const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
      const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(
          config_.timeout - secs);
      cli.set_connection_timeout(secs.count(), usecs.count());
      cli.set_read_timeout(secs.count(), usecs.count());
      cli.set_write_timeout(secs.count(), usecs.count());
      httplib::Result res = method == "GET"
                                ? cli.Get(path)
                                : cli.Post(path, body, "application/json");
      if (!res) {
        const auto err = res.error();
        const bool timed_out = err == httplib::Error::Read ||
                               err == httplib::Error::Write ||
                               err == httplib::Error::ConnectionTimeout;
        if (timed_out && attempt < config_.retries) continue;
        const std::string what = method + " " + path + " to " + config_.url +
                                 " failed: " + httplib::to_string(err);
        if (timed_out) throw TimeoutError(what);
        throw ConnectionError(what);
      }
      if (res->status < 200 || res->status >= 300) {
        std::string code = "HTTP_" + std::to_string(res->status);
        std::string message = res->body;
        try {
          const auto j = nlohmann::json::parse(res->body);
          code = j.at("code").get<std::string>();
          message = j.at("message").get<std::string>();
        } catch (const nlohmann::json::exception&) {
          throw ProtocolError("HTTP " + std::to_string(res->status) +
                              " without error envelope: " + res->body);
        }
        throw ServerError(code, message, res->status);
      }
      return res->body;
    }
  }

  ClientConfig config_;
  mutable std::counting_semaphore<kMaxInFlight> slots_;
};

// OracleInterface adapter. The model regenerates every patch through its
// decoder, so it is not pass-through; only per-patch errors come back.
class RemoteOracle final : public Oracle {
 public:
  RemoteOracle(ClientConfig config, GridSpec grid)
      : client_(std::move(config)), grid_(grid) {}

  // Fetches /v1/health and checks geometry; call once before use.
  HealthInfo connect() {
    health_ = client_.require_geometry(grid_);
    return health_;
  }

  std::string id() const override {
    return health_.model_id.empty() ? "remote" : "remote:" + health_.model_id;
  }
  bool pass_through() const override { return false; }

  Reconstruction reconstruct(const PatchArray& truth,
                             const PatchSet& unmasked) const override {
    const ImageTensor img = assemble(truth, grid_);
    const OracleResponse resp = client_.reconstruct_remote(
        OracleRequest::from_image(img, grid_.patch_side(), unmasked));
    Reconstruction r;
    r.per_patch_sq_err = resp.per_patch_mse;
    return r;
  }

  const OracleClient& client() const { return client_; }

 private:
  OracleClient client_;
  GridSpec grid_;
  HealthInfo health_;
};

}  // namespace kpp::remote

#endif  // KPP_ORACLE_CLIENT_HPP_
