// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#include "plugblend/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <unordered_set>

namespace plugblend {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::InvalidLogits: return "InvalidLogits";
    case Errc::DegenerateWeights: return "DegenerateWeights";
    case Errc::VocabMismatch: return "VocabMismatch";
    case Errc::ProviderUnavailable: return "ProviderUnavailable";
    case Errc::UnknownControlCode: return "UnknownControlCode";
    case Errc::ModelFileInvalid: return "ModelFileInvalid";
    case Errc::ContrastSetTooSmall: return "ContrastSetTooSmall";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::InvalidPenalty: return "InvalidPenalty";
    case Errc::InvalidSketch: return "InvalidSketch";
    case Errc::InvalidLineIndex: return "InvalidLineIndex";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::UnknownLabel: return "UnknownLabel";
    case Errc::NotFound: return "NotFound";
    case Errc::Conflict: return "Conflict";
  }
  return "Unknown";
}

std::optional<Errc> errc_from_name(std::string_view name) noexcept {
  for (int i = 0; i <= static_cast<int>(Errc::Conflict); ++i) {
    if (name == errc_name(static_cast<Errc>(i))) return static_cast<Errc>(i);
  }
  return std::nullopt;
}

std::string fold_case(std::string_view text) {
  std::string out(text);
  for (char& ch : out) {
    ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty()) {
    throw Error(Errc::InvalidArgument, "vocabulary must contain at least the unknown token");
  }
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    auto [it, inserted] = index_.emplace(fold_case(tokens_[i]), static_cast<TokenId>(i));
    if (!inserted) {
      throw Error(Errc::InvalidArgument, "duplicate vocabulary entry '" + tokens_[i] + "'");
    }
  }
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw Error(Errc::VocabMismatch, "token id " + std::to_string(id) + " outside vocabulary of size " +
                                         std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> Vocabulary::find(std::string_view word) const {
  auto it = index_.find(fold_case(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool ControlConfig::inactive() const noexcept {
  return std::none_of(entries.begin(), entries.end(),
                      [](const ControlEntry& e) { return e.strength > 0.0; });
}

double ControlConfig::strength_of(std::string_view code) const noexcept {
  for (const auto& e : entries) {
    if (e.code == code) return e.strength;
  }
  return 0.0;
}

std::vector<std::string> ControlConfig::codes() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.code);
  return out;
}

void ControlConfig::validate() const {
  if (!(total_strength >= 0.0) || !std::isfinite(total_strength)) {
    throw Error(Errc::InvalidArgument, "total strength must be a finite non-negative number");
  }
  std::unordered_set<std::string> seen;
  for (const auto& e : entries) {
    if (e.code.empty()) throw Error(Errc::InvalidArgument, "control code label must be non-empty");
    if (!seen.insert(e.code).second) {
      throw Error(Errc::InvalidArgument, "duplicate control code '" + e.code + "'");
    }
    if (!(e.strength >= 0.0) || !std::isfinite(e.strength)) {
      throw Error(Errc::InvalidArgument, "strength for '" + e.code + "' must be finite and non-negative");
    }
  }
}

ControlConfig ControlConfig::normalized() const {
  validate();
  if (entries.empty()) return *this;
  std::vector<double> raw;
  raw.reserve(entries.size());
  for (const auto& e : entries) raw.push_back(e.strength);
  ControlConfig out = *this;
  if (total_strength == 0.0) {
    for (auto& e : out.entries) e.strength = 0.0;
    return out;
  }
  auto weights = normalize_weights(raw, total_strength);
  for (std::size_t i = 0; i < weights.size(); ++i) out.entries[i].strength = weights[i];
  return out;
}

ControlConfig ControlConfig::scaled(double multiplier) const {
  if (!(multiplier >= 0.0) || !std::isfinite(multiplier)) {
    throw Error(Errc::InvalidArgument, "strength multiplier must be finite and non-negative");
  }
  ControlConfig out = *this;
  out.total_strength *= multiplier;
  for (auto& e : out.entries) e.strength *= multiplier;
  return out;
}

ControlConfig ControlConfig::equal_blend(const std::vector<std::string>& codes, double total) {
  ControlConfig cfg;
  cfg.total_strength = total;
  for (const auto& c : codes) {
    cfg.entries.push_back({c, codes.empty() ? 0.0 : total / static_cast<double>(codes.size())});
  }
  cfg.validate();
  return cfg;
}

void check_finite(std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(Errc::InvalidLogits, "non-finite value at index " + std::to_string(i));
    }
  }
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -INFINITY;
  const double m = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

ProbVector softmax(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0)) throw Error(Errc::InvalidArgument, "temperature must be positive");
  check_finite(logits);
  if (logits.empty()) return {};
  ProbVector out(logits.size());
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - m) / temperature);
    s += out[i];
  }
  for (double& p : out) p /= s;
  return out;
}

std::vector<double> log_softmax(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0)) throw Error(Errc::InvalidArgument, "temperature must be positive");
  check_finite(logits);
  if (logits.empty()) return {};
  std::vector<double> out(logits.size());
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = (logits[i] - m) / temperature;
    s += std::exp(out[i]);
  }
  const double log_z = std::log(s);
  for (double& v : out) v -= log_z;
  return out;
}

std::vector<double> normalize_weights(std::span<const double> raw, double target_sum) {
  if (!(target_sum >= 0.0) || !std::isfinite(target_sum)) {
    throw Error(Errc::InvalidArgument, "target sum must be finite and non-negative");
  }
  double total = 0.0;
  for (double w : raw) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw Error(Errc::InvalidArgument, "weights must be finite and non-negative");
    }
    total += w;
  }
  std::vector<double> out(raw.size(), 0.0);
  if (target_sum == 0.0) return out;
  if (total == 0.0) {
    throw Error(Errc::DegenerateWeights, "cannot normalize all-zero weights to a positive sum");
  }
  if (total == target_sum) {
    out.assign(raw.begin(), raw.end());
    return out;
  }
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] / total * target_sum;
  return out;
}

TokenId argmax_tiebreak(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::InvalidArgument, "argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return static_cast<TokenId>(best);
}

}  // namespace plugblend
