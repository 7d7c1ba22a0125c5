// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "plugblend/decoder.hpp"
#include "plugblend/planner.hpp"

namespace plugblend {

struct PipelineParams {
  // Context for the first line and for any line that comes back empty.
  std::string fallback_prompt = "Recently";
  // Number of previous lines fed back as the prompt.
  int context_window = 2;
  GenerationParams generation;
  // When non-empty, every line is chosen by best_of_strengths over these.
  std::vector<double> best_of;

  void validate() const;
};

struct CandidateReport {
  double multiplier = 0.0;
  std::string text;
  std::optional<double> perplexity;
  bool operator==(const CandidateReport&) const = default;
};

struct StoryLine {
  int n = 0;
  std::string text;
  ControlConfig config;
  // Base-LM perplexity of the line given its context; absent for empty lines.
  std::optional<double> ppl;
  std::string context;
  bool used_fallback = false;
  bool empty = false;
  std::vector<CandidateReport> candidates;
  std::optional<double> chosen_multiplier;

  bool operator==(const StoryLine&) const = default;
};

struct Story {
  std::vector<StoryLine> lines;

  bool operator==(const Story&) const = default;
};

/// Raised when a provider fails mid-story; carries the lines finished so far.
class StoryError : public Error {
 public:
  StoryError(const Error& cause, Story partial) : Error(cause.code(), cause.what()), partial_(std::move(partial)) {}
  const Story& partial() const noexcept { return partial_; }

 private:
  Story partial_;
};

/// Prompt text for line n: the last `context_window` non-empty lines before
/// n joined by single spaces, or the fallback prompt.
std::string line_context(const Story& story, int n, const PipelineParams& params);

using LineCallback = std::function<void(const StoryLine&)>;

Story generate_story(const LinePlan& plan, const LanguageModel& base, const ClassConditionalModel& guide,
                     const PipelineParams& params, const LineCallback& on_line = {});

/// Re-decodes line n with the plan's current config for that line. Other
/// lines are left untouched.
Story regenerate_line(const Story& story, int n, const LinePlan& plan, const LanguageModel& base,
                      const ClassConditionalModel& guide, const PipelineParams& params);

}  // namespace plugblend
