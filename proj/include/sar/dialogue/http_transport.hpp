#pragma once
// Build with CPPHTTPLIB_OPENSSL_SUPPORT for https endpoints.

#include <cstdlib>
#include <memory>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "sar/dialogue/transport.hpp"
#include "sar/dialogue/types.hpp"

namespace sar::dialogue {

/// POSTs to {base_url}/chat/completions with a bearer key. A fresh client per
/// call keeps concurrent turns independent.
class HttpTransport final : public Transport {
 public:
  HttpTransport(const std::string& base_url, std::string api_key) : key_(std::move(api_key)) {
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorKind::Config, "llm base_url needs a scheme");
    const auto path_start = base_url.find('/', scheme_end + 3);
    origin_ = base_url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "" : base_url.substr(path_start);
    while (!path_.empty() && path_.back() == '/') path_.pop_back();
    path_ += "/chat/completions";
    if (!httplib::Client(origin_).is_valid()) {
      throw Error(ErrorKind::Config, "unsupported llm base_url (https needs TLS support): " + origin_);
    }
  }

  std::string post(const nlohmann::json& body, std::chrono::milliseconds timeout) override {
    httplib::Client cli(origin_);
    cli.set_connection_timeout(timeout);
    cli.set_read_timeout(timeout);
    cli.set_write_timeout(timeout);
    cli.set_bearer_token_auth(key_);
    auto res = cli.Post(path_, body.dump(), "application/json");
    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
        throw Error(ErrorKind::Timeout, "llm request timed out: " + httplib::to_string(err));
      }
      throw Error(ErrorKind::Transport, "llm request failed: " + httplib::to_string(err));
    }
    if (res->status < 200 || res->status >= 300) {
      throw Error(ErrorKind::Transport, "llm endpoint returned HTTP " + std::to_string(res->status));
    }
    return res->body;
  }

  [[nodiscard]] const std::string& path() const noexcept { return path_; }
  [[nodiscard]] const std::string& origin() const noexcept { return origin_; }

 private:
  std::string origin_;
  std::string path_;
  std::string key_;
};

/// Stub for "stub:" URLs, otherwise HTTP with the key read from the
/// environment variable named by api_key_ref. A missing key fails here, at
/// startup, not on the first turn.
inline std::unique_ptr<Transport> make_transport(const LlmEndpoint& endpoint) {
  validate(endpoint);
  if (endpoint.is_stub()) return std::make_unique<StubTransport>(endpoint.stub);
  const char* key = std::getenv(endpoint.api_key_ref.c_str());
  if (key == nullptr || *key == '\0') {
    throw Error(ErrorKind::Config, "environment variable " + endpoint.api_key_ref + " is not set");
  }
  return std::make_unique<HttpTransport>(endpoint.base_url, key);
}

}  // namespace sar::dialogue
