// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#include "http_client.hpp"
#include "plugblend/providers.hpp"

namespace plugblend {

using nlohmann::json;

namespace {

std::vector<std::string> parse_codes(const json& meta, const std::string& url) {
  std::vector<std::string> codes;
  if (!meta.contains("codes")) return codes;
  if (!meta["codes"].is_array()) throw Error(Errc::ProviderUnavailable, url + "/v1/meta: 'codes' must be an array");
  for (const auto& c : meta["codes"]) {
    if (!c.is_string()) throw Error(Errc::ProviderUnavailable, url + "/v1/meta: codes must be strings");
    codes.push_back(c.get<std::string>());
  }
  return codes;
}

}  // namespace

RemoteLM::RemoteLM(std::string url, RemoteOptions options)
    : url_(std::move(url)), http_(std::make_unique<detail::JsonHttpClient>(url_, options)) {
  auto meta = http_->get("/v1/meta");
  if (!meta.contains("vocab_size") || !meta["vocab_size"].is_number_integer() ||
      meta["vocab_size"].get<long long>() <= 0) {
    throw Error(Errc::ProviderUnavailable, url_ + "/v1/meta: missing positive 'vocab_size'");
  }
  vocab_size_ = meta["vocab_size"].get<std::size_t>();
  codes_ = parse_codes(meta, url_);
  if (auto it = meta.find("priors"); it != meta.end() && it->is_object()) {
    for (const auto& code : codes_) {
      auto p = it->find(code);
      if (p == it->end() || !p->is_number() || !(p->get<double>() > 0.0)) {
        throw Error(Errc::ProviderUnavailable, url_ + "/v1/meta: prior for '" + code + "' must be positive");
      }
      priors_.emplace(code, p->get<double>());
    }
  }
}

double RemoteLM::prior(std::string_view code) const {
  if (priors_.empty()) return ClassConditionalModel::prior(code);
  require_code(code);
  return priors_.find(code)->second;
}

RemoteLM::~RemoteLM() = default;

std::vector<std::string> RemoteLM::live_codes() const { return parse_codes(http_->get("/v1/meta"), url_); }

void RemoteLM::check_context(std::span<const TokenId> context) const {
  for (TokenId t : context) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab_size_) {
      throw Error(Errc::VocabMismatch, "context token " + std::to_string(t) + " outside vocabulary of size " +
                                           std::to_string(vocab_size_));
    }
  }
}

LogitVector RemoteLM::fetch_logits(std::span<const TokenId> context, const std::string* code) const {
  check_context(context);
  json body;
  body["context"] = std::vector<TokenId>(context.begin(), context.end());
  body["code"] = code ? json(*code) : json(nullptr);
  auto res = http_->post("/v1/logits", body);
  if (!res.contains("logits") || !res["logits"].is_array()) {
    throw Error(Errc::ProviderUnavailable, url_ + "/v1/logits: missing 'logits' array");
  }
  LogitVector logits;
  logits.reserve(res["logits"].size());
  for (const auto& v : res["logits"]) {
    if (!v.is_number()) throw Error(Errc::InvalidLogits, url_ + "/v1/logits: non-numeric logit");
    logits.push_back(v.get<double>());
  }
  if (logits.size() != vocab_size_) {
    throw Error(Errc::VocabMismatch, url_ + "/v1/logits: returned " + std::to_string(logits.size()) +
                                         " logits, advertised vocabulary is " + std::to_string(vocab_size_));
  }
  check_finite(logits);
  return logits;
}

LogitVector RemoteLM::next_logits(std::span<const TokenId> context) const {
  return fetch_logits(context, nullptr);
}

LogitVector RemoteLM::cc_next_logits(std::span<const TokenId> context, std::string_view code) const {
  require_code(code);
  const std::string label(code);
  return fetch_logits(context, &label);
}

std::vector<TokenId> RemoteLM::tokenize(std::string_view text) const {
  auto res = http_->post("/v1/tokenize", json{{"text", std::string(text)}});
  if (!res.contains("tokens") || !res["tokens"].is_array()) {
    throw Error(Errc::ProviderUnavailable, url_ + "/v1/tokenize: missing 'tokens' array");
  }
  std::vector<TokenId> tokens;
  for (const auto& t : res["tokens"]) {
    if (!t.is_number_integer()) throw Error(Errc::ProviderUnavailable, url_ + "/v1/tokenize: non-integer token");
    tokens.push_back(t.get<TokenId>());
  }
  check_context(tokens);
  return tokens;
}

std::string RemoteLM::detokenize(std::span<const TokenId> tokens) const {
  check_context(tokens);
  auto res = http_->post("/v1/detokenize", json{{"tokens", std::vector<TokenId>(tokens.begin(), tokens.end())}});
  if (!res.contains("text") || !res["text"].is_string()) {
    throw Error(Errc::ProviderUnavailable, url_ + "/v1/detokenize: missing 'text'");
  }
  return res["text"].get<std::string>();
}

}  // namespace plugblend
