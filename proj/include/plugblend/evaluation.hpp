// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "plugblend/core.hpp"
#include "plugblend/decoder.hpp"
#include "plugblend/providers.hpp"

namespace plugblend {

/// exp(-mean log P(x_t | context, x_<t)) under the base model.
double perplexity(const LanguageModel& base, std::span<const TokenId> tokens,
                  std::span<const TokenId> context = {});

/// Kendall's tau-a of the scores against their index order. Tied pairs
/// count as neither concordant nor discordant.
double kendall_tau_a(std::span<const double> scores);

/// Scores a text against candidate labels; the scores sum to one.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::vector<double> classify(std::string_view text, std::span<const std::string> labels) const = 0;
  virtual bool concurrent_safe() const { return true; }
};

using Lexicons = std::map<std::string, std::vector<std::string>, std::less<>>;

inline constexpr double kKeywordSmoothing = 0.5;

/// score_l proportional to (case-folded lexicon hits + 0.5).
std::vector<double> keyword_classify(std::string_view text, std::span<const std::string> labels,
                                     const Lexicons& lexicons);

class KeywordClassifier final : public Classifier {
 public:
  explicit KeywordClassifier(Lexicons lexicons);
  static KeywordClassifier from_json(const nlohmann::json& doc, const std::string& where);
  static KeywordClassifier load(const std::filesystem::path& path);

  std::vector<double> classify(std::string_view text, std::span<const std::string> labels) const override;
  const Lexicons& lexicons() const noexcept { return lexicons_; }

 private:
  Lexicons lexicons_;
};

/// Classifier behind POST /v1/classify.
class RemoteClassifier final : public Classifier {
 public:
  explicit RemoteClassifier(std::string url, RemoteOptions options = {});
  ~RemoteClassifier() override;

  std::vector<double> classify(std::string_view text, std::span<const std::string> labels) const override;
  bool concurrent_safe() const override { return false; }

 private:
  std::string url_;
  std::unique_ptr<detail::JsonHttpClient> http_;
};

/// Lexicon JSON file or http:// URL of a /v1/classify server.
std::shared_ptr<const Classifier> open_classifier(const std::string& spec, RemoteOptions options = {});

inline constexpr double kSweepFractions[] = {0.0, 0.25, 0.5, 0.75, 1.0};

struct SweepStep {
  double fraction = 0.0;  // share of the total strength given to c1
  std::string text;
  double score = 0.0;     // classifier probability of c1
};

struct SweepResult {
  std::string prompt;
  std::string c1;
  std::string c2;
  double total_strength = 0.0;
  std::vector<SweepStep> steps;
  double tau_a = 0.0;
};

/// Latent walk between two codes: one line per c1 fraction in
/// {0, .25, .5, .75, 1}, scored by the classifier and ranked with tau-a.
SweepResult fidelity_sweep(std::string_view prompt, const std::string& c1, const std::string& c2,
                           double total_strength, const LanguageModel& base, const ClassConditionalModel& guide,
                           const Classifier& classifier, const GenerationParams& params);

struct CodePair {
  std::string c1;
  std::string c2;
};

CodePair parse_code_pair(std::string_view text);
std::vector<CodePair> all_code_pairs(const std::vector<std::string>& codes);

struct HeatmapCell {
  std::string c1;
  std::string c2;
  double multiplier = 0.0;
  double mean_tau_a = 0.0;
  int count = 0;
};

struct HeatmapReport {
  std::vector<HeatmapCell> cells;
  std::vector<SweepResult> sweeps;
  // Sweeps that failed and were left out of the means.
  int failures = 0;
  std::vector<std::string> warnings;
};

struct SweepGrid {
  std::vector<std::string> prompts;
  std::vector<CodePair> pairs;
  std::vector<double> multipliers;
  double unit_strength = 1.0;
  int jobs = 1;
};

HeatmapReport heatmap(const SweepGrid& grid, const LanguageModel& base, const ClassConditionalModel& guide,
                      const Classifier& classifier, const GenerationParams& params);

std::string heatmap_csv(std::span<const HeatmapCell> cells);
std::string heatmap_svg(std::span<const HeatmapCell> cells);

/// Mean tau-a of seeded shuffles of real stories; the null reference for sweeps.
double shuffled_baseline(const std::vector<std::vector<std::string>>& stories, const CodePair& pair,
                         const Classifier& classifier, std::uint64_t seed);

struct PerplexityRow {
  double multiplier = 0.0;
  double mean_perplexity = 0.0;
  int count = 0;
};

/// Mean base-LM perplexity of equal-blend continuations for every prompt and
/// code pair at each strength multiplier.
std::vector<PerplexityRow> perplexity_by_strength(const SweepGrid& grid, const LanguageModel& base,
                                                  const ClassConditionalModel& guide,
                                                  const GenerationParams& params);

/// Blocks separated by blank lines, one sentence per line.
std::vector<std::vector<std::string>> parse_corpus(std::string_view text);

/// Prompts from a corpus file: the first sentence of each block, or every line
/// when the file has no blank lines.
std::vector<std::string> prompts_from_text(std::string_view text);

}  // namespace plugblend
