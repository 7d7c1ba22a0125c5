// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "plugblend/error.hpp"

namespace plugblend::detail {

inline constexpr const char* kJsonType = "application/json";

inline void reply(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), kJsonType);
}

inline nlohmann::json error_body(Errc code, const std::string& message) {
  return {{"error", {{"code", errc_name(code)}, {"message", message}}}};
}

// Error shape of the /v1 provider protocol: a string message plus the kind.
inline nlohmann::json protocol_error_body(Errc code, const std::string& message) {
  return {{"error", message}, {"code", errc_name(code)}};
}

inline nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::InvalidArgument, std::string("request body is not JSON: ") + e.what());
  }
}

/// Owns an httplib server and the thread that runs it.
class ServerRunner {
 public:
  explicit ServerRunner(httplib::Server& server) : server_(server) {}
  ~ServerRunner() { stop(); }

  int start(const std::string& host, int port) {
    if (thread_.joinable()) throw Error(Errc::Conflict, "server is already running");
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw Error(Errc::ProviderUnavailable, "cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  void listen(const std::string& host, int port) {
    port_ = port;
    if (!server_.listen(host, port)) {
      throw Error(Errc::ProviderUnavailable, "cannot listen on " + host + ":" + std::to_string(port));
    }
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const noexcept { return port_; }

 private:
  httplib::Server& server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace plugblend::detail
