// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "plugblend/error.hpp"

namespace plugblend {

using TokenId = std::int32_t;

/// Dense per-vocabulary score arrays. Logits are unnormalized log-scores,
/// probability vectors sum to one.
using LogitVector = std::vector<double>;
using ProbVector = std::vector<double>;

/// Ordered list of distinct surface strings. Index 0 is the unknown token.
class Vocabulary {
 public:
  static constexpr TokenId kUnknown = 0;

  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  // Lookup is case-insensitive (ASCII folding).
  std::optional<TokenId> find(std::string_view word) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

std::string fold_case(std::string_view text);

struct ControlEntry {
  std::string code;
  double strength = 0.0;

  bool operator==(const ControlEntry&) const = default;
};

/// Control codes with per-code strengths for one generation call. After
/// normalized(), the entry strengths sum to total_strength.
struct ControlConfig {
  std::vector<ControlEntry> entries;
  double total_strength = 0.0;

  bool empty() const noexcept { return entries.empty(); }
  // True when no entry carries positive strength; such configs leave the
  // base distribution untouched.
  bool inactive() const noexcept;
  double strength_of(std::string_view code) const noexcept;
  std::vector<std::string> codes() const;

  // Throws InvalidArgument on duplicate or empty labels, negative strengths.
  void validate() const;
  ControlConfig normalized() const;
  ControlConfig scaled(double multiplier) const;

  static ControlConfig equal_blend(const std::vector<std::string>& codes, double total);

  bool operator==(const ControlConfig&) const = default;
};

void check_finite(std::span<const double> values);

double log_sum_exp(std::span<const double> values);

ProbVector softmax(std::span<const double> logits, double temperature = 1.0);
std::vector<double> log_softmax(std::span<const double> logits, double temperature = 1.0);

/// Rescales non-negative weights so they sum to target_sum while preserving
/// proportions.
std::vector<double> normalize_weights(std::span<const double> raw, double target_sum);

/// Index of the maximum entry; exact ties resolve to the lowest index.
TokenId argmax_tiebreak(std::span<const double> values);

}  // namespace plugblend
