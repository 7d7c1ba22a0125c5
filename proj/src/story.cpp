// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#include "plugblend/story.hpp"

#include <cmath>

#include "plugblend/evaluation.hpp"

namespace plugblend {

void PipelineParams::validate() const {
  if (context_window < 1) throw Error(Errc::InvalidArgument, "context_window must be >= 1");
  if (fallback_prompt.empty()) throw Error(Errc::InvalidArgument, "fallback prompt must be non-empty");
  for (double m : best_of) {
    if (!(m >= 0.0)) throw Error(Errc::InvalidArgument, "best-of multipliers must be non-negative");
  }
  generation.validate();
}

std::string line_context(const Story& story, int n, const PipelineParams& params) {
  std::vector<const std::string*> picked;
  for (int i = n - 1; i >= 0 && static_cast<int>(picked.size()) < params.context_window; --i) {
    const auto& line = story.lines.at(static_cast<std::size_t>(i));
    if (!line.text.empty()) picked.push_back(&line.text);
  }
  if (picked.empty()) return params.fallback_prompt;
  std::string out;
  for (auto it = picked.rbegin(); it != picked.rend(); ++it) {
    if (!out.empty()) out += ' ';
    out += **it;
  }
  return out;
}

namespace {

struct LineAttempt {
  std::string text;
  std::vector<TokenId> tokens;
  std::vector<TokenId> prompt;
  bool empty = true;
  std::vector<CandidateReport> candidates;
  std::optional<double> chosen_multiplier;
};

LineAttempt decode_with(const std::string& context, const ControlConfig& config, const LanguageModel& base,
                        const ClassConditionalModel& guide, const PipelineParams& params) {
  LineAttempt out;
  out.prompt = base.tokenize(context);
  if (params.best_of.empty()) {
    auto line = decode_line(base, guide, config, out.prompt, params.generation);
    out.text = std::move(line.text);
    out.tokens = std::move(line.tokens);
    out.empty = line.empty;
    return out;
  }
  auto result = best_of_strengths(base, guide, config, out.prompt, params.generation, params.best_of);
  for (const auto& c : result.candidates) {
    CandidateReport report{c.multiplier, c.line.text, std::nullopt};
    if (std::isfinite(c.perplexity)) report.perplexity = c.perplexity;
    out.candidates.push_back(std::move(report));
  }
  const auto& best = result.best();
  out.text = best.line.text;
  out.tokens = best.line.tokens;
  out.empty = best.line.empty;
  out.chosen_multiplier = best.multiplier;
  return out;
}

StoryLine produce_line(const Story& story, int n, const LinePlan& plan, const LanguageModel& base,
                       const ClassConditionalModel& guide, const PipelineParams& params) {
  StoryLine line;
  line.n = n;
  line.config = plan.lines.at(static_cast<std::size_t>(n));
  line.context = line_context(story, n, params);
  auto attempt = decode_with(line.context, line.config, base, guide, params);
  if (attempt.empty && line.context != params.fallback_prompt) {
    line.used_fallback = true;
    line.context = params.fallback_prompt;
    attempt = decode_with(line.context, line.config, base, guide, params);
  }
  line.empty = attempt.empty;
  line.candidates = std::move(attempt.candidates);
  line.chosen_multiplier = attempt.chosen_multiplier;
  if (!attempt.empty) {
    line.text = std::move(attempt.text);
    line.ppl = perplexity(base, attempt.tokens, attempt.prompt);
  }
  return line;
}

}  // namespace

Story generate_story(const LinePlan& plan, const LanguageModel& base, const ClassConditionalModel& guide,
                     const PipelineParams& params, const LineCallback& on_line) {
  params.validate();
  Story story;
  story.lines.reserve(plan.size());
  for (std::size_t n = 0; n < plan.size(); ++n) {
    try {
      story.lines.push_back(produce_line(story, static_cast<int>(n), plan, base, guide, params));
    } catch (const StoryError&) {
      throw;
    } catch (const Error& e) {
      throw StoryError(e, story);
    }
    if (on_line) on_line(story.lines.back());
  }
  return story;
}

Story regenerate_line(const Story& story, int n, const LinePlan& plan, const LanguageModel& base,
                      const ClassConditionalModel& guide, const PipelineParams& params) {
  params.validate();
  if (n < 0 || static_cast<std::size_t>(n) >= story.lines.size() || static_cast<std::size_t>(n) >= plan.size()) {
    throw Error(Errc::InvalidLineIndex, "line " + std::to_string(n) + " is outside the story of " +
                                            std::to_string(story.lines.size()) + " lines");
  }
  Story out = story;
  out.lines[static_cast<std::size_t>(n)] = produce_line(story, n, plan, base, guide, params);
  return out;
}

}  // namespace plugblend
