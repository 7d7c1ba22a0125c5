// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "plugblend/providers.hpp"

namespace plugblend::test {

inline std::shared_ptr<const Vocabulary> make_vocab(std::vector<std::string> words) {
  return std::make_shared<const Vocabulary>(std::move(words));
}

inline ProbVector uniform_row(std::size_t v) { return ProbVector(v, 1.0 / static_cast<double>(v)); }

// Row with `mass` on `hot` and the rest spread evenly.
inline ProbVector peaked_row(std::size_t v, TokenId hot, double mass) {
  ProbVector row(v, (1.0 - mass) / static_cast<double>(v - 1));
  row[static_cast<std::size_t>(hot)] = mass;
  return row;
}

inline TableLM order0(std::shared_ptr<const Vocabulary> vocab, ProbVector row) {
  return TableLM(std::move(vocab), 0, std::move(row), {});
}

// Order-1 model following next[a] = b with probability `mass`.
inline TableLM chain_lm(std::shared_ptr<const Vocabulary> vocab, const std::map<TokenId, TokenId>& next,
                        double mass, ProbVector backoff) {
  std::map<std::vector<TokenId>, ProbVector> table;
  for (const auto& [a, b] : next) table[{a}] = peaked_row(vocab->size(), b, mass);
  return TableLM(std::move(vocab), 1, std::move(backoff), std::move(table));
}

inline std::vector<double> random_logits(std::mt19937_64& rng, std::size_t v, double scale = 4.0) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> out(v);
  for (auto& x : out) x = dist(rng);
  return out;
}

inline double sup_norm_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("plugblend_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path write(const std::string& name, const std::string& content) const {
    auto p = path_ / name;
    std::ofstream(p) << content;
    return p;
  }

 private:
  std::filesystem::path path_;
};

// Forwards to another model and records every context it is asked about.
class RecordingLM final : public LanguageModel {
 public:
  explicit RecordingLM(const LanguageModel& inner) : inner_(inner) {}

  std::size_t vocab_size() const override { return inner_.vocab_size(); }
  LogitVector next_logits(std::span<const TokenId> context) const override {
    std::lock_guard lock(mu_);
    contexts_.emplace_back(context.begin(), context.end());
    return inner_.next_logits(context);
  }
  std::vector<TokenId> tokenize(std::string_view text) const override { return inner_.tokenize(text); }
  std::string detokenize(std::span<const TokenId> tokens) const override { return inner_.detokenize(tokens); }

  std::vector<std::vector<TokenId>> contexts() const {
    std::lock_guard lock(mu_);
    return contexts_;
  }

 private:
  const LanguageModel& inner_;
  mutable std::mutex mu_;
  mutable std::vector<std::vector<TokenId>> contexts_;
};

// Base model whose logits come from a callback; tokenization is whitespace
// over the given vocabulary.
class ScriptedLM final : public LanguageModel {
 public:
  using Script = std::function<LogitVector(std::span<const TokenId>)>;
  ScriptedLM(std::shared_ptr<const Vocabulary> vocab, Script script)
      : vocab_(std::move(vocab)), script_(std::move(script)) {}

  std::size_t vocab_size() const override { return vocab_->size(); }
  LogitVector next_logits(std::span<const TokenId> context) const override { return script_(context); }
  std::vector<TokenId> tokenize(std::string_view text) const override { return whitespace_tokenize(*vocab_, text); }
  std::string detokenize(std::span<const TokenId> tokens) const override {
    return whitespace_detokenize(*vocab_, tokens);
  }

 private:
  std::shared_ptr<const Vocabulary> vocab_;
  Script script_;
};

// Fails every call once armed.
class FlakyLM final : public LanguageModel {
 public:
  FlakyLM(const LanguageModel& inner, int calls_before_failure)
      : inner_(inner), remaining_(calls_before_failure) {}

  std::size_t vocab_size() const override { return inner_.vocab_size(); }
  LogitVector next_logits(std::span<const TokenId> context) const override {
    if (remaining_.fetch_sub(1) <= 0) throw Error(Errc::ProviderUnavailable, "provider went away");
    return inner_.next_logits(context);
  }
  std::vector<TokenId> tokenize(std::string_view text) const override { return inner_.tokenize(text); }
  std::string detokenize(std::span<const TokenId> tokens) const override { return inner_.detokenize(tokens); }

 private:
  const LanguageModel& inner_;
  mutable std::atomic<int> remaining_;
};

inline std::vector<double> logits_of(const ProbVector& probs) {
  std::vector<double> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = std::log(probs[i]);
  return out;
}

}  // namespace plugblend::test
