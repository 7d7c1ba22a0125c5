// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#include "plugblend/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace plugblend {

std::string_view variance_mode_name(VarianceMode mode) noexcept {
  return mode == VarianceMode::Literal ? "literal" : "proportional";
}

VarianceMode parse_variance_mode(std::string_view name) {
  if (name == "literal") return VarianceMode::Literal;
  if (name == "proportional") return VarianceMode::Proportional;
  throw Error(Errc::InvalidSketch, "variance_mode must be 'literal' or 'proportional', got '" + std::string(name) + "'");
}

const std::vector<double>& LinePlan::curve(std::string_view code) const {
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] == code) return curves[i];
  }
  throw Error(Errc::UnknownControlCode, "plan has no weight curve for code '" + std::string(code) + "'");
}

namespace {

void check_shape(int n_lines, double sigma, double epsilon) {
  if (n_lines <= 0) throw Error(Errc::InvalidSketch, "n_lines must be positive");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error(Errc::InvalidSketch, "sigma must be positive");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error(Errc::InvalidSketch, "epsilon must be positive");
}

void check_range(const ControlSketch& sketch, int n_lines, std::size_t index) {
  const auto where = "sketch " + std::to_string(index) + " ('" + sketch.code + "')";
  if (sketch.code.empty()) throw Error(Errc::InvalidSketch, where + ": code must be non-empty");
  if (sketch.start < 0) throw Error(Errc::InvalidSketch, where + ": start must be >= 0");
  if (sketch.start > sketch.end) {
    throw Error(Errc::InvalidSketch, where + ": start " + std::to_string(sketch.start) + " exceeds end " +
                                         std::to_string(sketch.end));
  }
  if (sketch.end >= n_lines) {
    throw Error(Errc::InvalidSketch, where + ": end " + std::to_string(sketch.end) + " is outside " +
                                         std::to_string(n_lines) + " lines");
  }
}

double variance(const ControlSketch& sketch, double sigma, double epsilon, VarianceMode mode) {
  const double span = static_cast<double>(sketch.end - sketch.start) + epsilon;
  if (mode == VarianceMode::Literal) return sigma / (span * span);
  return sigma * (span / 2.0) * (span / 2.0);
}

}  // namespace

std::vector<double> sketch_weight_profile(const ControlSketch& sketch, int n_lines, double sigma,
                                          double epsilon, VarianceMode mode) {
  check_shape(n_lines, sigma, epsilon);
  check_range(sketch, n_lines, 0);
  const double mid = (static_cast<double>(sketch.start) + static_cast<double>(sketch.end)) / 2.0;
  const double v = variance(sketch, sigma, epsilon, mode);
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * v);
  std::vector<double> out(static_cast<std::size_t>(n_lines));
  for (int n = 0; n < n_lines; ++n) {
    const double d = static_cast<double>(n) - mid;
    out[static_cast<std::size_t>(n)] = norm * std::exp(-d * d / (2.0 * v));
  }
  return out;
}

SketchSet validate_sketch_set(SketchSet set, std::vector<std::string>* warnings) {
  check_shape(set.n_lines, set.sigma, set.epsilon);
  if (!(set.total_strength >= 0.0) || !std::isfinite(set.total_strength)) {
    throw Error(Errc::InvalidSketch, "total_strength must be finite and non-negative");
  }
  for (std::size_t i = 0; i < set.sketches.size(); ++i) {
    auto& s = set.sketches[i];
    if (s.end >= set.n_lines && s.start < set.n_lines && s.start <= s.end) {
      if (warnings) {
        warnings->push_back("sketch " + std::to_string(i) + " ('" + s.code + "'): end " + std::to_string(s.end) +
                            " clipped to " + std::to_string(set.n_lines - 1));
      }
      s.end = set.n_lines - 1;
    }
    check_range(s, set.n_lines, i);
  }
  return set;
}

LinePlan compile_plan(const SketchSet& input, std::vector<std::string>* warnings) {
  const SketchSet set = validate_sketch_set(input, warnings);
  const auto n = static_cast<std::size_t>(set.n_lines);

  LinePlan plan;
  plan.total_strength = set.total_strength;
  for (const auto& sketch : set.sketches) {
    auto it = std::find(plan.codes.begin(), plan.codes.end(), sketch.code);
    std::size_t idx = static_cast<std::size_t>(it - plan.codes.begin());
    if (it == plan.codes.end()) {
      plan.codes.push_back(sketch.code);
      plan.curves.emplace_back(n, 0.0);
    }
    auto profile = sketch_weight_profile(sketch, set.n_lines, set.sigma, set.epsilon, set.variance_mode);
    double mass = 0.0;
    for (double w : profile) mass += w;
    if (mass == 0.0) {
      // Every density underflowed; all mass sits on the line(s) nearest the midpoint.
      const double mid = (sketch.start + sketch.end) / 2.0;
      double best = INFINITY;
      for (std::size_t i = 0; i < n; ++i) best = std::min(best, std::abs(static_cast<double>(i) - mid));
      for (std::size_t i = 0; i < n; ++i) profile[i] = std::abs(static_cast<double>(i) - mid) == best ? 1.0 : 0.0;
    }
    auto& acc = plan.curves[idx];
    for (std::size_t i = 0; i < n; ++i) acc[i] += profile[i];
    acc = normalize_weights(acc, 1.0);
  }

  plan.lines.resize(n);
  for (std::size_t line = 0; line < n; ++line) {
    double peak = 0.0;
    for (const auto& curve : plan.curves) peak = std::max(peak, curve[line]);
    ControlConfig config;
    if (peak < kUncontrolledThreshold) {
      plan.lines[line] = config;
      continue;
    }
    config.total_strength = set.total_strength;
    for (std::size_t c = 0; c < plan.codes.size(); ++c) {
      if (plan.curves[c][line] > 0.0) config.entries.push_back({plan.codes[c], plan.curves[c][line]});
    }
    plan.lines[line] = config.normalized();
  }
  return plan;
}

std::optional<int> crossover_index(const LinePlan& plan, std::string_view c1, std::string_view c2) {
  const auto& w1 = plan.curve(c1);
  const auto& w2 = plan.curve(c2);
  for (std::size_t i = 0; i < w1.size(); ++i) {
    if (w2[i] >= w1[i]) return static_cast<int>(i);
  }
  return std::nullopt;
}

}  // namespace plugblend
