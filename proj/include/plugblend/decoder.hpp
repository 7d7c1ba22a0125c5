// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "plugblend/core.hpp"
#include "plugblend/providers.hpp"

namespace plugblend {

inline constexpr double kDefaultEpsilonProb = 1e-10;
inline constexpr int kDefaultMaxTokensCap = 128;

struct GenerationParams {
  int max_tokens = 32;
  // Divides positive / multiplies non-positive logits of already generated tokens.
  double repetition_penalty = 1.2;
  double temperature = 1.0;
  bool stop_at_sentence = true;
  std::optional<TokenId> eos_token;
  int max_tokens_cap = kDefaultMaxTokensCap;
  // Floor applied to posteriors before they are raised to a strength.
  double epsilon_prob = kDefaultEpsilonProb;
  // Divides the accumulated per-code log-likelihood by the step count before
  // the Bayes normalization. Off by default.
  bool length_normalize = false;

  void validate() const;
};

/// Per-code posterior P(c | x_t, x_<t) for every candidate token x_t. Rows
/// follow the order of `codes`; each column sums to one over the rows.
struct PosteriorMatrix {
  std::vector<std::string> codes;
  std::vector<std::vector<double>> rows;

  std::size_t vocab_size() const noexcept { return rows.empty() ? 0 : rows.front().size(); }
  const std::vector<double>& row(std::string_view code) const;
};

/// Incremental state of one controlled decode: the prompt, the tokens
/// generated so far and the running per-code log-likelihood of the
/// generated tokens under the guide. Single owner; not shareable mid-decode.
class DecodingSession {
 public:
  // An empty contrast set means "every code the guide advertises".
  DecodingSession(const LanguageModel& base, const ClassConditionalModel& guide, ControlConfig config,
                  std::vector<TokenId> prompt, GenerationParams params,
                  std::vector<std::string> contrast_codes = {});

  struct Step {
    LogitVector base_logits;  // after repetition penalty
    std::optional<PosteriorMatrix> posterior;
    ProbVector blended;
  };

  /// Posterior matrix for the next position given the current history.
  PosteriorMatrix posterior() const;

  /// Full decoding step: base logits, repetition penalty, posterior, blend.
  Step step() const;

  /// Appends a token and adds its per-code log-likelihood to the running sums.
  void advance(TokenId token);

  std::vector<TokenId> context() const;
  const std::vector<TokenId>& prompt() const noexcept { return prompt_; }
  const std::vector<TokenId>& generated() const noexcept { return generated_; }
  const ControlConfig& config() const noexcept { return config_; }
  const std::vector<std::string>& contrast_codes() const noexcept { return contrast_; }
  const GenerationParams& params() const noexcept { return params_; }
  double cumulative_loglik(std::string_view code) const;
  // False when no config entry carries positive strength; the guide is never
  // consulted in that case.
  bool controlled() const noexcept { return controlled_; }

 private:
  const std::vector<std::vector<double>>& code_logprobs() const;

  const LanguageModel* base_;
  const ClassConditionalModel* guide_;
  ControlConfig config_;
  std::vector<TokenId> prompt_;
  GenerationParams params_;
  std::vector<std::string> contrast_;
  std::vector<double> log_priors_;
  std::vector<double> cumulative_;
  std::vector<TokenId> generated_;
  bool controlled_ = false;

  // log p_c(. | context) for each contrast code at the current position.
  mutable std::vector<std::vector<double>> cached_logprobs_;
  mutable std::optional<std::size_t> cached_position_;
};

PosteriorMatrix gedi_posterior(const DecodingSession& session);

/// normalize(P_LM(x) * prod_c P(c | x)^strength_c). An inactive config
/// returns softmax(base_logits) unchanged.
ProbVector blend_step(std::span<const double> base_logits, const PosteriorMatrix& posteriors,
                      const ControlConfig& config, double epsilon_prob = kDefaultEpsilonProb,
                      double temperature = 1.0);

/// Single-code guidance, normalize(P_LM(x) * P(c | x)^strength).
ProbVector guide_single(std::span<const double> base_logits, std::span<const double> posterior_row,
                        double strength, double epsilon_prob = kDefaultEpsilonProb,
                        double temperature = 1.0);

LogitVector apply_repetition_penalty(std::span<const double> logits, std::span<const TokenId> generated,
                                     double penalty);

std::string extract_first_sentence(std::string_view text);

struct DecodedLine {
  std::string text;
  std::vector<TokenId> tokens;
  // Blended probability of each chosen token.
  std::vector<double> step_probs;
  // Nothing usable was produced (immediate EOS or blank text).
  bool empty = false;
};

DecodedLine decode_line(const LanguageModel& base, const ClassConditionalModel& guide,
                        const ControlConfig& config, std::span<const TokenId> prompt,
                        const GenerationParams& params);

struct StrengthCandidate {
  double multiplier = 1.0;
  DecodedLine line;
  // Base-LM perplexity of the line given the prompt; +inf for empty lines.
  double perplexity = 0.0;
};

struct BestOfResult {
  std::size_t chosen = 0;
  std::vector<StrengthCandidate> candidates;

  const StrengthCandidate& best() const { return candidates.at(chosen); }
};

/// Decodes one candidate per strength multiplier and keeps the one with the
/// lowest base-LM perplexity, ties going to the smaller multiplier.
BestOfResult best_of_strengths(const LanguageModel& base, const ClassConditionalModel& guide,
                               const ControlConfig& config, std::span<const TokenId> prompt,
                               const GenerationParams& params, std::span<const double> multipliers);

}  // namespace plugblend
