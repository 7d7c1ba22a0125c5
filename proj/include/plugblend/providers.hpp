// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "plugblend/core.hpp"

namespace plugblend {

namespace detail {
class JsonHttpClient;
}

/// Unconditional next-token model. next_logits must be a pure function of
/// the context: same tokens, identical logits.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual std::size_t vocab_size() const = 0;
  virtual LogitVector next_logits(std::span<const TokenId> context) const = 0;
  virtual std::vector<TokenId> tokenize(std::string_view text) const = 0;
  virtual std::string detokenize(std::span<const TokenId> tokens) const = 0;

  // Providers answering false serialize their calls internally; schedulers
  // may use the flag to avoid fanning work out to them.
  virtual bool concurrent_safe() const { return true; }
};

/// Class-conditional next-token model p(x_t | x_<t, c) used as the guide.
class ClassConditionalModel {
 public:
  virtual ~ClassConditionalModel() = default;

  virtual std::size_t vocab_size() const = 0;
  virtual const std::vector<std::string>& codes() const = 0;
  // Defaults to uniform over codes().
  virtual double prior(std::string_view code) const;
  virtual LogitVector cc_next_logits(std::span<const TokenId> context,
                                     std::string_view code) const = 0;

  // Re-queries the provider for its codes; remote guides fail here when offline.
  virtual std::vector<std::string> live_codes() const { return codes(); }
  bool has_code(std::string_view code) const;
  void require_code(std::string_view code) const;
};

/// Throws VocabMismatch unless both providers agree on V.
void check_compatible(const LanguageModel& base, const ClassConditionalModel& guide);

/// Sum of log P(x_t | context, x_<t) over tokens, conditioned on an optional
/// preceding context that is not itself scored.
double sequence_logprob(const LanguageModel& model, std::span<const TokenId> tokens,
                        std::span<const TokenId> context = {});

/// Whitespace tokenization with case folding; trailing punctuation splits off
/// into its own token and unknown words map to id 0. Detokenization glues
/// punctuation tokens to the preceding word.
std::vector<TokenId> whitespace_tokenize(const Vocabulary& vocab, std::string_view text);
std::string whitespace_detokenize(const Vocabulary& vocab, std::span<const TokenId> tokens);

/// Order-k lookup-table language model: the longest stored context suffix
/// wins, otherwise the backoff row is used. Immutable after construction.
class TableLM final : public LanguageModel {
 public:
  // Zero-probability entries become this logit so that LogitVectors stay finite.
  static constexpr double kLogFloor = -690.7755278982137;  // ln(1e-300)

  TableLM(std::shared_ptr<const Vocabulary> vocab, int order, ProbVector backoff,
          std::map<std::vector<TokenId>, ProbVector> table);

  static TableLM from_json(const nlohmann::json& doc, const std::string& where,
                           std::shared_ptr<const Vocabulary> shared_vocab = nullptr);

  std::size_t vocab_size() const override { return vocab_->size(); }
  LogitVector next_logits(std::span<const TokenId> context) const override;
  std::vector<TokenId> tokenize(std::string_view text) const override;
  std::string detokenize(std::span<const TokenId> tokens) const override;

  // Probability row selected for the context (longest matching suffix).
  const ProbVector& row_for(std::span<const TokenId> context) const;

  int order() const noexcept { return order_; }
  const Vocabulary& vocabulary() const noexcept { return *vocab_; }
  std::shared_ptr<const Vocabulary> shared_vocabulary() const noexcept { return vocab_; }
  const ProbVector& backoff() const noexcept { return backoff_; }
  const std::map<std::vector<TokenId>, ProbVector>& table() const noexcept { return table_; }

  nlohmann::json to_json(bool include_vocab = true) const;

 private:
  struct Row {
    ProbVector probs;
    LogitVector logits;
  };

  const Row& lookup(std::span<const TokenId> context) const;

  std::shared_ptr<const Vocabulary> vocab_;
  int order_;
  ProbVector backoff_;
  std::map<std::vector<TokenId>, ProbVector> table_;
  Row backoff_row_;
  std::map<std::vector<TokenId>, Row> rows_;
};

/// Toy class-conditional model: one TableLM per control code sharing one
/// vocabulary.
class TableGuide final : public ClassConditionalModel {
 public:
  TableGuide(std::shared_ptr<const Vocabulary> vocab, std::vector<std::string> codes,
             std::vector<TableLM> models, std::map<std::string, double> priors = {});

  static TableGuide from_json(const nlohmann::json& doc, const std::string& where);

  std::size_t vocab_size() const override { return vocab_->size(); }
  const std::vector<std::string>& codes() const override { return codes_; }
  double prior(std::string_view code) const override;
  LogitVector cc_next_logits(std::span<const TokenId> context, std::string_view code) const override;

  const TableLM& model(std::string_view code) const;
  const Vocabulary& vocabulary() const noexcept { return *vocab_; }

  nlohmann::json to_json() const;

 private:
  std::shared_ptr<const Vocabulary> vocab_;
  std::vector<std::string> codes_;
  std::vector<TableLM> models_;
  std::map<std::string, double, std::less<>> priors_;
};

/// Loaders validate every TableLM invariant and report ModelFileInvalid with
/// the offending field or key.
TableLM load_table_lm(const std::filesystem::path& path);
TableGuide load_table_guide(const std::filesystem::path& path);

struct RemoteOptions {
  std::chrono::milliseconds timeout{30000};
  int retries = 2;
};

/// Model hosted behind the JSON-over-HTTP provider protocol. The vocabulary
/// size and code list are fetched once at attach time. Calls are serialized
/// through an internal lock.
class RemoteLM final : public LanguageModel, public ClassConditionalModel {
 public:
  explicit RemoteLM(std::string url, RemoteOptions options = {});
  ~RemoteLM() override;

  RemoteLM(const RemoteLM&) = delete;
  RemoteLM& operator=(const RemoteLM&) = delete;

  std::size_t vocab_size() const override { return vocab_size_; }
  LogitVector next_logits(std::span<const TokenId> context) const override;
  std::vector<TokenId> tokenize(std::string_view text) const override;
  std::string detokenize(std::span<const TokenId> tokens) const override;
  bool concurrent_safe() const override { return false; }

  const std::vector<std::string>& codes() const override { return codes_; }
  std::vector<std::string> live_codes() const override;
  // Priors advertised in /v1/meta, uniform when absent.
  double prior(std::string_view code) const override;
  LogitVector cc_next_logits(std::span<const TokenId> context, std::string_view code) const override;

  const std::string& url() const noexcept { return url_; }

 private:
  LogitVector fetch_logits(std::span<const TokenId> context, const std::string* code) const;
  void check_context(std::span<const TokenId> context) const;

  std::string url_;
  std::unique_ptr<detail::JsonHttpClient> http_;
  std::size_t vocab_size_ = 0;
  std::vector<std::string> codes_;
  std::map<std::string, double, std::less<>> priors_;
};

bool is_remote_spec(std::string_view spec);

/// A provider spec is an http:// URL (RemoteLM) or a table-model JSON file.
std::shared_ptr<const LanguageModel> open_base_model(const std::string& spec, RemoteOptions options = {});
std::shared_ptr<const ClassConditionalModel> open_guide_model(const std::string& spec, RemoteOptions options = {});

}  // namespace plugblend
