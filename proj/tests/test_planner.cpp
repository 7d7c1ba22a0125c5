// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "plugblend/planner.hpp"

using namespace plugblend;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::InvalidArgument;
}

std::vector<double> normalized_profile(const ControlSketch& s, int n, double sigma, double eps,
                                       VarianceMode mode = VarianceMode::Literal) {
  auto w = sketch_weight_profile(s, n, sigma, eps, mode);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& x : w) x /= total;
  return w;
}

SketchSet sports_science(int science_start) {
  SketchSet set;
  set.n_lines = 10;
  set.sigma = 1.0;
  set.total_strength = 1.0;
  set.sketches = {{"Sports", 0, 5}, {"Science", science_start, 10}};
  return set;
}

}  // namespace

TEST_CASE("profile matches the high-precision reference") {
  const auto w = normalized_profile({"Sports", 2, 4}, 5, 1.0, 1e-3);
  const double expect[] = {1.1773843053107934388e-8, 0.00026194317779118676757, 0.10631153813581049264,
                           0.78711496877674477485, 0.10631153813581049264};
  for (int n = 0; n < 5; ++n) CHECK(w[n] == doctest::Approx(expect[n]).epsilon(1e-10));
}

TEST_CASE("full-range profile is symmetric and decreasing away from the middle") {
  const auto w = sketch_weight_profile({"A", 0, 8}, 9, 1.0, 1e-3, VarianceMode::Proportional);
  for (int n = 0; n < 4; ++n) {
    CHECK(w[n] == doctest::Approx(w[8 - n]).epsilon(1e-12));
    CHECK(w[n] < w[n + 1]);
  }
  const auto lit = sketch_weight_profile({"A", 0, 8}, 9, 1.0, 1e-3);
  for (int n = 0; n < 4; ++n) CHECK(lit[n] < lit[n + 1]);
}

TEST_CASE("larger sigma flattens the profile") {
  const ControlSketch s{"A", 1, 3};
  double prev = 2.0;
  for (double sigma : {0.5, 1.0, 2.0, 4.0}) {
    const auto w = normalized_profile(s, 6, sigma, 1e-3);
    const double peak = *std::max_element(w.begin(), w.end());
    CHECK(peak < prev);
    prev = peak;
  }
}

TEST_CASE("proportional mode widens with the span") {
  const auto narrow = normalized_profile({"A", 4, 5}, 10, 1.0, 1e-3, VarianceMode::Proportional);
  const auto wide = normalized_profile({"A", 1, 8}, 10, 1.0, 1e-3, VarianceMode::Proportional);
  CHECK(*std::max_element(wide.begin(), wide.end()) < *std::max_element(narrow.begin(), narrow.end()));
  CHECK(parse_variance_mode("proportional") == VarianceMode::Proportional);
  CHECK(variance_mode_name(VarianceMode::Literal) == "literal");
  CHECK_THROWS_AS(parse_variance_mode("wide"), Error);
}

TEST_CASE("invalid sketches") {
  SketchSet set;
  set.n_lines = 5;
  set.sketches = {{"A", 3, 2}};
  CHECK(code_of([&] { compile_plan(set); }) == Errc::InvalidSketch);
  set.sketches = {{"A", -1, 2}};
  CHECK(code_of([&] { compile_plan(set); }) == Errc::InvalidSketch);
  set.sketches = {{"A", 5, 7}};
  CHECK(code_of([&] { compile_plan(set); }) == Errc::InvalidSketch);
  set.sketches = {{"A", 0, 2}};
  set.n_lines = 0;
  CHECK(code_of([&] { compile_plan(set); }) == Errc::InvalidSketch);
  set.n_lines = 5;
  set.sigma = 0.0;
  CHECK(code_of([&] { compile_plan(set); }) == Errc::InvalidSketch);
  set.sigma = 1.0;
  set.total_strength = -1.0;
  CHECK(code_of([&] { compile_plan(set); }) == Errc::InvalidSketch);
  set.total_strength = 1.0;
  set.sketches = {{"", 0, 2}};
  CHECK(code_of([&] { compile_plan(set); }) == Errc::InvalidSketch);
}

TEST_CASE("ranges past the last line are clipped with a warning") {
  std::vector<std::string> warnings;
  const auto set = validate_sketch_set(sports_science(4), &warnings);
  CHECK(set.sketches[1].end == 9);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("Science") != std::string::npos);
}

TEST_CASE("empty sketch list gives uncontrolled lines") {
  SketchSet set;
  set.n_lines = 4;
  const auto plan = compile_plan(set);
  CHECK(plan.size() == 4);
  for (const auto& line : plan.lines) CHECK(line.empty());
  CHECK(plan.codes.empty());
}

TEST_CASE("single sketch gives the full strength on every controlled line") {
  SketchSet set;
  set.n_lines = 6;
  set.total_strength = 2.5;
  set.sigma = 4.0;
  set.sketches = {{"Sports", 1, 3}};
  const auto plan = compile_plan(set);
  for (const auto& line : plan.lines) {
    if (line.empty()) continue;
    REQUIRE(line.entries.size() == 1);
    CHECK(line.entries[0].code == "Sports");
    CHECK(line.entries[0].strength == 2.5);
    CHECK(line.total_strength == 2.5);
  }
}

TEST_CASE("duplicate sketches are idempotent") {
  SketchSet once;
  once.n_lines = 8;
  once.sketches = {{"A", 2, 5}, {"B", 4, 7}};
  SketchSet twice = once;
  twice.sketches = {{"A", 2, 5}, {"A", 2, 5}, {"B", 4, 7}};
  const auto a = compile_plan(once);
  const auto b = compile_plan(twice);
  for (std::size_t i = 0; i < a.codes.size(); ++i) {
    for (int n = 0; n < 8; ++n) CHECK(a.curves[i][n] == doctest::Approx(b.curves[i][n]).epsilon(1e-12));
  }
}

TEST_CASE("order of sketches over different codes does not matter") {
  SketchSet ab;
  ab.n_lines = 10;
  ab.sigma = 3.0;
  ab.sketches = {{"A", 0, 4}, {"B", 5, 9}};
  SketchSet ba = ab;
  std::reverse(ba.sketches.begin(), ba.sketches.end());
  const auto p = compile_plan(ab);
  const auto q = compile_plan(ba);
  for (int n = 0; n < 10; ++n) {
    CHECK(p.lines[n].strength_of("A") == doctest::Approx(q.lines[n].strength_of("A")).epsilon(1e-12));
    CHECK(p.lines[n].strength_of("B") == doctest::Approx(q.lines[n].strength_of("B")).epsilon(1e-12));
  }
}

TEST_CASE("repeated codes accumulate then renormalize") {
  SketchSet set;
  set.n_lines = 10;
  set.sigma = 2.0;
  set.sketches = {{"A", 0, 2}, {"A", 7, 9}};
  const auto plan = compile_plan(set);
  const auto& c = plan.curve("A");
  CHECK(std::accumulate(c.begin(), c.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c[1] > c[4]);
  CHECK(c[8] > c[4]);
}

TEST_CASE("plan invariants over random sketch sets") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    SketchSet set;
    set.n_lines = 2 + static_cast<int>(rng() % 15);
    set.sigma = 0.25 + static_cast<double>(rng() % 100) / 25.0;
    set.total_strength = 0.5 + static_cast<double>(rng() % 10);
    set.variance_mode = (rng() % 2) ? VarianceMode::Literal : VarianceMode::Proportional;
    const int k = 1 + static_cast<int>(rng() % 4);
    for (int i = 0; i < k; ++i) {
      int s = static_cast<int>(rng() % set.n_lines);
      int e = static_cast<int>(rng() % set.n_lines);
      if (s > e) std::swap(s, e);
      set.sketches.push_back({std::string(1, static_cast<char>('A' + rng() % 3)), s, e});
    }
    const auto plan = compile_plan(set);
    for (const auto& curve : plan.curves) {
      CHECK(std::accumulate(curve.begin(), curve.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
    }
    for (const auto& line : plan.lines) {
      if (line.empty()) continue;
      double s = 0.0;
      for (const auto& e : line.entries) s += e.strength;
      CHECK(s == doctest::Approx(set.total_strength).epsilon(1e-9));
    }
  }
}

TEST_CASE("crossover index") {
  SketchSet mirrored;
  mirrored.n_lines = 10;
  mirrored.sigma = 8.0;
  mirrored.variance_mode = VarianceMode::Proportional;
  mirrored.sketches = {{"A", 0, 4}, {"B", 5, 9}};
  const auto plan = compile_plan(mirrored);
  CHECK(crossover_index(plan, "A", "B") == 5);

  SketchSet one_sided;
  one_sided.n_lines = 6;
  one_sided.sketches = {{"A", 0, 5}, {"B", 0, 0}};
  const auto p2 = compile_plan(one_sided);
  std::optional<int> scan;
  for (int n = 0; n < 6 && !scan; ++n) {
    if (p2.curve("A")[n] >= p2.curve("B")[n]) scan = n;
  }
  CHECK(crossover_index(p2, "B", "A") == scan);
  CHECK(crossover_index(plan, "B", "A") == 0);
  CHECK(code_of([&] { crossover_index(plan, "A", "Z"); }) == Errc::UnknownControlCode);
}

TEST_CASE("a code that never dominates has no crossover") {
  SketchSet never;
  never.n_lines = 3;
  never.sketches = {{"A", 0, 2}, {"B", 0, 2}};
  never.sigma = 1.0;
  auto eq = compile_plan(never);
  // Equal curves cross at line 0; make B strictly smaller everywhere.
  for (auto& x : eq.curves[1]) x *= 0.5;
  CHECK_FALSE(crossover_index(eq, "A", "B").has_value());
}

TEST_CASE("later science starts move the sports to science transition later") {
  std::optional<int> prev;
  for (int start : {4, 5, 6}) {
    const auto plan = compile_plan(sports_science(start));
    const auto sports = plan.curve("Sports");
    const auto science = plan.curve("Science");
    CHECK(std::max_element(sports.begin(), sports.end()) - sports.begin() == 2);
    const auto idx = crossover_index(plan, "Sports", "Science");
    REQUIRE(idx.has_value());
    CHECK(*idx >= 4);
    CHECK(*idx <= 6);
    if (prev) CHECK(*idx >= *prev);
    prev = idx;
    if (start == 4) CHECK(std::max_element(science.begin(), science.end()) - science.begin() == 6);
  }
}

TEST_CASE("lines far from every range stay uncontrolled") {
  const auto plan = compile_plan(sports_science(4));
  CHECK(plan.lines[0].empty());
  CHECK(plan.lines[9].empty());
  CHECK(plan.lines[2].strength_of("Sports") == doctest::Approx(1.0));
  CHECK(plan.lines[7].strength_of("Science") == doctest::Approx(1.0));
}
