// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "plugblend/providers.hpp"

namespace httplib {
class Client;
}

namespace plugblend::detail {

/// JSON-over-HTTP client with a retry budget. Transport failures and 5xx
/// responses are retried and end as ProviderUnavailable; 4xx answers keep
/// the error kind named in their "code" field.
/// Requests are serialized through one lock.
class JsonHttpClient {
 public:
  JsonHttpClient(const std::string& url, RemoteOptions options);
  ~JsonHttpClient();

  nlohmann::json get(const std::string& path) const;
  nlohmann::json post(const std::string& path, const nlohmann::json& body) const;

  const std::string& url() const noexcept { return url_; }

 private:
  std::string url_;
  std::string prefix_;
  RemoteOptions options_;
  std::unique_ptr<httplib::Client> client_;
  mutable std::mutex mu_;
};

}  // namespace plugblend::detail
