// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#include "http_client.hpp"

#include <httplib.h>

namespace plugblend::detail {

using nlohmann::json;

namespace {

std::string describe_failure(const httplib::Result& res) {
  if (!res) return httplib::to_string(res.error());
  std::string detail = "HTTP " + std::to_string(res->status);
  auto body = json::parse(res->body, nullptr, false);
  if (body.is_object() && body.contains("error") && body["error"].is_string()) {
    detail += ": " + body["error"].get<std::string>();
  }
  return detail;
}

// 4xx answers naming a known error kind are raised as that kind.
[[noreturn]] void raise_failure(const httplib::Result& res, const std::string& where, const std::string& detail) {
  if (res && res->status >= 400 && res->status < 500) {
    auto body = json::parse(res->body, nullptr, false);
    if (body.is_object() && body.contains("code") && body["code"].is_string()) {
      if (auto code = errc_from_name(body["code"].get<std::string>())) throw Error(*code, where + ": " + detail);
    }
  }
  throw Error(Errc::ProviderUnavailable, where + ": " + detail);
}

}  // namespace

JsonHttpClient::JsonHttpClient(const std::string& url, RemoteOptions options) : url_(url), options_(options) {
  if (url.starts_with("https://")) {
    throw Error(Errc::InvalidArgument, "https endpoints are not supported by this build: " + url);
  }
  if (!url.starts_with("http://")) throw Error(Errc::InvalidArgument, "not an http URL: " + url);
  std::string origin = url;
  const auto slash = url.find('/', 7);
  if (slash != std::string::npos) {
    origin = url.substr(0, slash);
    prefix_ = url.substr(slash);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  }
  while (!url_.empty() && url_.back() == '/') url_.pop_back();
  client_ = std::make_unique<httplib::Client>(origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
  client_->set_connection_timeout(secs.count(), usecs.count());
  client_->set_read_timeout(secs.count(), usecs.count());
  client_->set_write_timeout(secs.count(), usecs.count());
}

JsonHttpClient::~JsonHttpClient() = default;

json JsonHttpClient::get(const std::string& path) const {
  std::lock_guard lock(mu_);
  std::string last;
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    auto res = client_->Get(prefix_ + path);
    if (res && res->status == 200) {
      auto body = json::parse(res->body, nullptr, false);
      if (body.is_discarded() || !body.is_object()) {
        throw Error(Errc::ProviderUnavailable, url_ + path + ": malformed JSON response");
      }
      return body;
    }
    last = describe_failure(res);
    if (res && res->status < 500) raise_failure(res, url_ + path, last);
  }
  throw Error(Errc::ProviderUnavailable, url_ + path + ": " + last);
}

json JsonHttpClient::post(const std::string& path, const json& body) const {
  const auto payload = body.dump();
  std::lock_guard lock(mu_);
  std::string last;
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    auto res = client_->Post(prefix_ + path, payload, "application/json");
    if (res && res->status == 200) {
      auto parsed = json::parse(res->body, nullptr, false);
      if (parsed.is_discarded() || !parsed.is_object()) {
        throw Error(Errc::ProviderUnavailable, url_ + path + ": malformed JSON response");
      }
      return parsed;
    }
    last = describe_failure(res);
    if (res && res->status < 500) raise_failure(res, url_ + path, last);
  }
  throw Error(Errc::ProviderUnavailable, url_ + path + ": " + last);
}

}  // namespace plugblend::detail
