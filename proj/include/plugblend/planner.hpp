// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "plugblend/core.hpp"

namespace plugblend {

/// How a sketch's line span sets the Gaussian variance.
///   literal:      v = sigma / (e - s + eps)^2   (wide spans are sharper)
///   proportional: v = sigma * ((e - s + eps) / 2)^2
enum class VarianceMode { Literal, Proportional };

std::string_view variance_mode_name(VarianceMode mode) noexcept;
VarianceMode parse_variance_mode(std::string_view name);

/// A topic requested over the inclusive line range [start, end].
struct ControlSketch {
  std::string code;
  int start = 0;
  int end = 0;

  bool operator==(const ControlSketch&) const = default;
};

struct SketchSet {
  int n_lines = 10;
  // Applied in order; repeated codes accumulate.
  std::vector<ControlSketch> sketches;
  double sigma = 1.0;
  double epsilon = 1e-3;
  double total_strength = 1.0;
  VarianceMode variance_mode = VarianceMode::Literal;

  bool operator==(const SketchSet&) const = default;
};

/// Planner output: one ControlConfig per line plus the per-code weight
/// curves (each curve sums to one over the lines).
struct LinePlan {
  std::vector<ControlConfig> lines;
  std::vector<std::string> codes;
  std::vector<std::vector<double>> curves;
  double total_strength = 0.0;

  std::size_t size() const noexcept { return lines.size(); }
  const std::vector<double>& curve(std::string_view code) const;

  bool operator==(const LinePlan&) const = default;
};

// Lines whose weights are all below this are left uncontrolled.
inline constexpr double kUncontrolledThreshold = 1e-12;

/// Raw Gaussian density of each line under one sketch, peaking at the
/// range midpoint.
std::vector<double> sketch_weight_profile(const ControlSketch& sketch, int n_lines, double sigma,
                                          double epsilon, VarianceMode mode = VarianceMode::Literal);

/// Validates the set, clipping ranges that run past the last line. Clipping
/// notes are appended to `warnings` when given.
SketchSet validate_sketch_set(SketchSet set, std::vector<std::string>* warnings = nullptr);

LinePlan compile_plan(const SketchSet& set, std::vector<std::string>* warnings = nullptr);

/// First line where c2's weight reaches c1's, if any.
std::optional<int> crossover_index(const LinePlan& plan, std::string_view c1, std::string_view c2);

}  // namespace plugblend
