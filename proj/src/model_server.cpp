// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#include "plugblend/server.hpp"
#include "server_common.hpp"

namespace plugblend {

using nlohmann::json;

int http_status_for(Errc code) noexcept {
  switch (code) {
    case Errc::NotFound: return 404;
    case Errc::Conflict: return 409;
    case Errc::ProviderUnavailable:
    case Errc::InvalidLogits: return 502;
    default: return 400;
  }
}

struct ModelServer::Impl {
  std::shared_ptr<const LanguageModel> base;
  std::shared_ptr<const ClassConditionalModel> guide;
  std::shared_ptr<const Classifier> classifier;
  httplib::Server server;
  detail::ServerRunner runner{server};

  void routes();
};

namespace {

std::vector<TokenId> token_list(const json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || !it->is_array()) throw Error(Errc::InvalidArgument, std::string("'") + key + "' must be an array");
  std::vector<TokenId> out;
  for (const auto& t : *it) {
    if (!t.is_number_integer()) throw Error(Errc::InvalidArgument, std::string("'") + key + "' must hold integers");
    out.push_back(t.get<TokenId>());
  }
  return out;
}

std::string text_field(const json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || !it->is_string()) throw Error(Errc::InvalidArgument, std::string("'") + key + "' must be a string");
  return it->get<std::string>();
}

}  // namespace

void ModelServer::Impl::routes() {
  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      detail::reply(res, http_status_for(e.code()), detail::protocol_error_body(e.code(), e.what()));
    } catch (const std::exception& e) {
      detail::reply(res, 500, detail::protocol_error_body(Errc::InvalidArgument, e.what()));
    }
  });

  server.Get("/v1/meta", [this](const httplib::Request&, httplib::Response& res) {
    json meta;
    meta["vocab_size"] = base ? base->vocab_size() : guide ? guide->vocab_size() : 0;
    meta["codes"] = guide ? guide->codes() : std::vector<std::string>{};
    if (guide) {
      json priors = json::object();
      for (const auto& c : guide->codes()) priors[c] = guide->prior(c);
      meta["priors"] = std::move(priors);
    }
    meta["classifier"] = classifier != nullptr;
    detail::reply(res, 200, meta);
  });

  server.Post("/v1/logits", [this](const httplib::Request& req, httplib::Response& res) {
    const auto body = detail::parse_body(req);
    const auto context = token_list(body, "context");
    auto code = body.find("code");
    LogitVector logits;
    if (code == body.end() || code->is_null()) {
      if (!base) throw Error(Errc::NotFound, "this server hosts no base model");
      logits = base->next_logits(context);
    } else {
      if (!guide) throw Error(Errc::NotFound, "this server hosts no guide model");
      if (!code->is_string()) throw Error(Errc::InvalidArgument, "'code' must be a string or null");
      logits = guide->cc_next_logits(context, code->get<std::string>());
    }
    detail::reply(res, 200, json{{"logits", logits}});
  });

  server.Post("/v1/tokenize", [this](const httplib::Request& req, httplib::Response& res) {
    if (!base) throw Error(Errc::NotFound, "this server hosts no tokenizer");
    const auto body = detail::parse_body(req);
    detail::reply(res, 200, json{{"tokens", base->tokenize(text_field(body, "text"))}});
  });

  server.Post("/v1/detokenize", [this](const httplib::Request& req, httplib::Response& res) {
    if (!base) throw Error(Errc::NotFound, "this server hosts no tokenizer");
    const auto body = detail::parse_body(req);
    detail::reply(res, 200, json{{"text", base->detokenize(token_list(body, "tokens"))}});
  });

  server.Post("/v1/classify", [this](const httplib::Request& req, httplib::Response& res) {
    if (!classifier) throw Error(Errc::NotFound, "this server hosts no classifier");
    const auto body = detail::parse_body(req);
    auto labels = body.find("labels");
    if (labels == body.end() || !labels->is_array()) throw Error(Errc::InvalidArgument, "'labels' must be an array");
    std::vector<std::string> names;
    for (const auto& l : *labels) {
      if (!l.is_string()) throw Error(Errc::InvalidArgument, "'labels' must hold strings");
      names.push_back(l.get<std::string>());
    }
    detail::reply(res, 200, json{{"scores", classifier->classify(text_field(body, "text"), names)}});
  });
}

ModelServer::ModelServer(std::shared_ptr<const LanguageModel> base, std::shared_ptr<const ClassConditionalModel> guide,
                         std::shared_ptr<const Classifier> classifier)
    : impl_(std::make_unique<Impl>()) {
  if (base && guide) check_compatible(*base, *guide);
  impl_->base = std::move(base);
  impl_->guide = std::move(guide);
  impl_->classifier = std::move(classifier);
  impl_->routes();
}

ModelServer::~ModelServer() { stop(); }

int ModelServer::start(const std::string& host, int port) { return impl_->runner.start(host, port); }
void ModelServer::listen(const std::string& host, int port) { impl_->runner.listen(host, port); }
void ModelServer::stop() { impl_->runner.stop(); }
int ModelServer::port() const noexcept { return impl_->runner.port(); }

}  // namespace plugblend
