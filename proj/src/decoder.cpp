// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#include "plugblend/decoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <unordered_set>

#include "plugblend/evaluation.hpp"

namespace plugblend {

void GenerationParams::validate() const {
  if (max_tokens_cap <= 0) throw Error(Errc::InvalidArgument, "max_tokens_cap must be positive");
  if (max_tokens <= 0 || max_tokens > max_tokens_cap) {
    throw Error(Errc::InvalidArgument, "max_tokens must be in [1, " + std::to_string(max_tokens_cap) + "]");
  }
  if (!(repetition_penalty >= 1.0) || !std::isfinite(repetition_penalty)) {
    throw Error(Errc::InvalidPenalty, "repetition penalty must be a finite value >= 1");
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(Errc::InvalidArgument, "temperature must be positive");
  }
  if (!(epsilon_prob > 0.0) || !(epsilon_prob < 1.0)) {
    throw Error(Errc::InvalidArgument, "epsilon_prob must lie in (0, 1)");
  }
  if (eos_token && *eos_token < 0) throw Error(Errc::InvalidArgument, "eos token must be non-negative");
}

const std::vector<double>& PosteriorMatrix::row(std::string_view code) const {
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] == code) return rows[i];
  }
  throw Error(Errc::UnknownControlCode, "posterior matrix has no row for code '" + std::string(code) + "'");
}

// ---------------------------------------------------------------------------
// DecodingSession

DecodingSession::DecodingSession(const LanguageModel& base, const ClassConditionalModel& guide,
                                 ControlConfig config, std::vector<TokenId> prompt, GenerationParams params,
                                 std::vector<std::string> contrast_codes)
    : base_(&base),
      guide_(&guide),
      config_(config.normalized()),
      prompt_(std::move(prompt)),
      params_(params),
      contrast_(std::move(contrast_codes)) {
  params_.validate();
  const auto v = base_->vocab_size();
  for (TokenId t : prompt_) {
    if (t < 0 || static_cast<std::size_t>(t) >= v) {
      throw Error(Errc::VocabMismatch, "prompt token " + std::to_string(t) + " outside vocabulary");
    }
  }
  controlled_ = !config_.inactive();
  if (!controlled_) return;

  check_compatible(base, guide);
  for (const auto& e : config_.entries) guide.require_code(e.code);
  if (contrast_.empty()) contrast_ = guide.codes();
  std::unordered_set<std::string> seen;
  for (const auto& c : contrast_) {
    guide.require_code(c);
    if (!seen.insert(c).second) throw Error(Errc::InvalidArgument, "duplicate contrast code '" + c + "'");
  }
  for (const auto& e : config_.entries) {
    if (!seen.contains(e.code)) {
      throw Error(Errc::InvalidArgument, "control code '" + e.code + "' is not part of the contrast set");
    }
  }
  log_priors_.reserve(contrast_.size());
  for (const auto& c : contrast_) log_priors_.push_back(std::log(guide.prior(c)));
  cumulative_.assign(contrast_.size(), 0.0);
}

std::vector<TokenId> DecodingSession::context() const {
  std::vector<TokenId> ctx = prompt_;
  ctx.insert(ctx.end(), generated_.begin(), generated_.end());
  return ctx;
}

double DecodingSession::cumulative_loglik(std::string_view code) const {
  for (std::size_t i = 0; i < contrast_.size(); ++i) {
    if (contrast_[i] == code) return cumulative_[i];
  }
  throw Error(Errc::UnknownControlCode, "code '" + std::string(code) + "' is not tracked by this session");
}

const std::vector<std::vector<double>>& DecodingSession::code_logprobs() const {
  if (cached_position_ && *cached_position_ == generated_.size()) return cached_logprobs_;
  const auto ctx = context();
  std::vector<std::vector<double>> rows;
  rows.reserve(contrast_.size());
  for (const auto& c : contrast_) {
    auto logits = guide_->cc_next_logits(ctx, c);
    if (logits.size() != base_->vocab_size()) {
      throw Error(Errc::VocabMismatch, "guide returned " + std::to_string(logits.size()) +
                                           " logits for code '" + c + "'");
    }
    rows.push_back(log_softmax(logits));
  }
  cached_logprobs_ = std::move(rows);
  cached_position_ = generated_.size();
  return cached_logprobs_;
}

PosteriorMatrix DecodingSession::posterior() const {
  if (!controlled_) {
    throw Error(Errc::InvalidArgument, "session carries no active control codes");
  }
  if (contrast_.size() < 2) {
    throw Error(Errc::ContrastSetTooSmall, "the contrast set needs at least two codes, got " +
                                               std::to_string(contrast_.size()));
  }
  const auto& logprobs = code_logprobs();
  const std::size_t k = contrast_.size();
  const std::size_t v = logprobs.front().size();
  const double steps = static_cast<double>(generated_.size() + 1);

  PosteriorMatrix out;
  out.codes = contrast_;
  out.rows.assign(k, std::vector<double>(v));
  std::vector<double> joint(k);
  for (std::size_t x = 0; x < v; ++x) {
    for (std::size_t c = 0; c < k; ++c) {
      double loglik = cumulative_[c] + logprobs[c][x];
      if (params_.length_normalize) loglik /= steps;
      joint[c] = log_priors_[c] + loglik;
    }
    const double log_alpha = log_sum_exp(joint);
    for (std::size_t c = 0; c < k; ++c) out.rows[c][x] = std::exp(joint[c] - log_alpha);
  }
  return out;
}

DecodingSession::Step DecodingSession::step() const {
  Step out;
  auto logits = base_->next_logits(context());
  if (logits.size() != base_->vocab_size()) {
    throw Error(Errc::VocabMismatch, "base model returned " + std::to_string(logits.size()) + " logits");
  }
  check_finite(logits);
  out.base_logits = apply_repetition_penalty(logits, generated_, params_.repetition_penalty);
  if (!controlled_) {
    out.blended = softmax(out.base_logits, params_.temperature);
    return out;
  }
  out.posterior = posterior();
  out.blended = blend_step(out.base_logits, *out.posterior, config_, params_.epsilon_prob, params_.temperature);
  return out;
}

void DecodingSession::advance(TokenId token) {
  if (token < 0 || static_cast<std::size_t>(token) >= base_->vocab_size()) {
    throw Error(Errc::VocabMismatch, "token " + std::to_string(token) + " outside vocabulary");
  }
  if (controlled_) {
    const auto& logprobs = code_logprobs();
    for (std::size_t c = 0; c < contrast_.size(); ++c) {
      cumulative_[c] += logprobs[c][static_cast<std::size_t>(token)];
    }
  }
  generated_.push_back(token);
}

PosteriorMatrix gedi_posterior(const DecodingSession& session) { return session.posterior(); }

// ---------------------------------------------------------------------------
// Blending

ProbVector blend_step(std::span<const double> base_logits, const PosteriorMatrix& posteriors,
                      const ControlConfig& config, double epsilon_prob, double temperature) {
  if (config.inactive()) return softmax(base_logits, temperature);
  const std::size_t v = base_logits.size();
  for (const auto& row : posteriors.rows) {
    if (row.size() != v) {
      throw Error(Errc::ShapeMismatch, "posterior row has " + std::to_string(row.size()) +
                                           " entries, base logits have " + std::to_string(v));
    }
  }
  if (posteriors.codes.size() != posteriors.rows.size()) {
    throw Error(Errc::ShapeMismatch, "posterior matrix code/row count mismatch");
  }
  auto score = log_softmax(base_logits, temperature);
  for (const auto& entry : config.entries) {
    if (!(entry.strength > 0.0)) continue;
    const auto& row = posteriors.row(entry.code);
    for (std::size_t i = 0; i < v; ++i) {
      score[i] += entry.strength * std::log(std::max(row[i], epsilon_prob));
    }
  }
  return softmax(score);
}

ProbVector guide_single(std::span<const double> base_logits, std::span<const double> posterior_row,
                        double strength, double epsilon_prob, double temperature) {
  if (posterior_row.size() != base_logits.size()) {
    throw Error(Errc::ShapeMismatch, "posterior row and base logits differ in length");
  }
  if (!(strength > 0.0)) return softmax(base_logits, temperature);
  auto score = log_softmax(base_logits, temperature);
  for (std::size_t i = 0; i < score.size(); ++i) {
    score[i] += strength * std::log(std::max(posterior_row[i], epsilon_prob));
  }
  return softmax(score);
}

LogitVector apply_repetition_penalty(std::span<const double> logits, std::span<const TokenId> generated,
                                     double penalty) {
  if (!(penalty >= 1.0) || !std::isfinite(penalty)) {
    throw Error(Errc::InvalidPenalty, "repetition penalty must be a finite value >= 1");
  }
  LogitVector out(logits.begin(), logits.end());
  if (penalty == 1.0) return out;
  std::vector<bool> seen(out.size(), false);
  for (TokenId t : generated) {
    if (t < 0 || static_cast<std::size_t>(t) >= out.size()) {
      throw Error(Errc::VocabMismatch, "generated token " + std::to_string(t) + " outside vocabulary");
    }
    const auto i = static_cast<std::size_t>(t);
    if (seen[i]) continue;
    seen[i] = true;
    out[i] = out[i] > 0.0 ? out[i] / penalty : out[i] * penalty;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Line decoding

namespace {

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

// Position of the first terminator of the first terminator run that ends the
// text or is followed by whitespace.
std::optional<std::size_t> sentence_end(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_terminator(text[i])) {
      ++i;
      continue;
    }
    std::size_t run_end = i;
    while (run_end < text.size() && is_terminator(text[run_end])) ++run_end;
    if (run_end == text.size() || is_space(text[run_end])) return i;
    i = run_end;
  }
  return std::nullopt;
}

}  // namespace

std::string extract_first_sentence(std::string_view text) {
  const auto t = trim(text);
  if (auto end = sentence_end(t)) return t.substr(0, *end + 1);
  return t;
}

DecodedLine decode_line(const LanguageModel& base, const ClassConditionalModel& guide,
                        const ControlConfig& config, std::span<const TokenId> prompt,
                        const GenerationParams& params) {
  DecodingSession session(base, guide, config, std::vector<TokenId>(prompt.begin(), prompt.end()), params);
  DecodedLine out;
  std::unordered_map<TokenId, bool> ends_sentence;
  for (int i = 0; i < params.max_tokens; ++i) {
    const auto step = session.step();
    const TokenId tok = argmax_tiebreak(step.blended);
    if (params.eos_token && tok == *params.eos_token) break;
    session.advance(tok);
    out.step_probs.push_back(step.blended[static_cast<std::size_t>(tok)]);
    if (params.stop_at_sentence) {
      auto it = ends_sentence.find(tok);
      if (it == ends_sentence.end()) {
        const TokenId single[] = {tok};
        it = ends_sentence.emplace(tok, sentence_end(trim(base.detokenize(single))).has_value()).first;
      }
      if (it->second) break;
    }
  }
  out.tokens = session.generated();
  if (!out.tokens.empty()) {
    auto text = base.detokenize(out.tokens);
    out.text = params.stop_at_sentence ? extract_first_sentence(text) : trim(text);
  }
  out.empty = out.text.empty();
  return out;
}

BestOfResult best_of_strengths(const LanguageModel& base, const ClassConditionalModel& guide,
                               const ControlConfig& config, std::span<const TokenId> prompt,
                               const GenerationParams& params, std::span<const double> multipliers) {
  if (multipliers.empty()) throw Error(Errc::InvalidArgument, "at least one strength multiplier is required");
  BestOfResult result;
  for (double m : multipliers) {
    StrengthCandidate cand;
    cand.multiplier = m;
    cand.line = decode_line(base, guide, config.scaled(m), prompt, params);
    cand.perplexity = cand.line.tokens.empty() || cand.line.empty
                          ? std::numeric_limits<double>::infinity()
                          : perplexity(base, cand.line.tokens, prompt);
    result.candidates.push_back(std::move(cand));
  }
  for (std::size_t i = 1; i < result.candidates.size(); ++i) {
    const auto& c = result.candidates[i];
    const auto& best = result.candidates[result.chosen];
    if (c.perplexity < best.perplexity || (c.perplexity == best.perplexity && c.multiplier < best.multiplier)) {
      result.chosen = i;
    }
  }
  return result;
}

}  // namespace plugblend
