// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>

#include "plugblend/evaluation.hpp"
#include "plugblend/providers.hpp"
#include "plugblend/story.hpp"

namespace plugblend {

/// Serves local providers over the /v1 JSON protocol that RemoteLM and
/// RemoteClassifier speak. Any of the three may be null; their endpoints
/// then answer 404.
class ModelServer {
 public:
  ModelServer(std::shared_ptr<const LanguageModel> base, std::shared_ptr<const ClassConditionalModel> guide,
              std::shared_ptr<const Classifier> classifier = nullptr);
  ~ModelServer();
  ModelServer(const ModelServer&) = delete;
  ModelServer& operator=(const ModelServer&) = delete;

  /// Binds and serves on a background thread. Port 0 picks a free port;
  /// the bound port is returned.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Binds and serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();
  int port() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Providers used by the session server. `guide` doubles as the topic source.
struct ProviderSet {
  std::shared_ptr<const LanguageModel> base;
  std::shared_ptr<const ClassConditionalModel> guide;
};

/// Returns attached providers or throws (ProviderUnavailable when a remote
/// model cannot be reached). Called lazily until it first succeeds.
using ProviderFactory = std::function<ProviderSet()>;

struct ApiOptions {
  // Snapshot directory; empty disables persistence.
  std::filesystem::path persist_dir;
  std::string cors_origin = "*";
  PipelineParams pipeline;
};

/// Story sessions over HTTP:
///   POST  /api/session                        create from a sketch set
///   GET   /api/session/{id}                   sketch, plan, story, revision
///   POST  /api/session/{id}/generate          full story (?stream=1 for NDJSON lines)
///   PATCH /api/session/{id}/sketch            replace sketch, recompile plan
///   POST  /api/session/{id}/line/{n}/regenerate
///   GET   /api/topics                         codes advertised by the guide
class ApiServer {
 public:
  ApiServer(ProviderFactory providers, ApiOptions options = {});
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  int start(const std::string& host = "127.0.0.1", int port = 0);
  void listen(const std::string& host, int port);
  void stop();
  int port() const noexcept;
  std::size_t session_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// HTTP status used for an error code in both servers.
int http_status_for(Errc code) noexcept;

}  // namespace plugblend
