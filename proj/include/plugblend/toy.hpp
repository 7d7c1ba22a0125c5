// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "plugblend/evaluation.hpp"
#include "plugblend/providers.hpp"

namespace plugblend {

/// Knobs for the disjoint-lexicon toy world: a bigram base LM over neutral
/// filler plus four topic lexicons, and a guide whose per-code tables differ
/// only by extra mass on that code's lexicon.
struct ToySpec {
  std::uint64_t seed = 7;
  std::vector<std::string> codes = {"Business", "Science", "Sports", "World"};
  int lexicon_min = 5;
  int lexicon_max = 8;
  // Base LM mass per row on lexicon words (all topics together) and on ".".
  double base_lexicon_mass = 0.12;
  double base_stop_mass = 0.01;
  // Guide: share of each code's row moved onto its own lexicon.
  double guide_topic_mass = 0.2;
  // Spread of the random row weights; 0 gives flat rows.
  double jitter = 0.6;
};

// Total strength that plays the role of 1x on the toy world.
inline constexpr double kToyUnitStrength = 4.0;

struct ToyWorld {
  std::shared_ptr<const Vocabulary> vocab;
  std::shared_ptr<TableLM> base;
  std::shared_ptr<TableGuide> guide;
  Lexicons lexicons;
  std::vector<std::string> neutral;
};

ToyWorld make_toy_world(const ToySpec& spec = {});

/// Order-0 table LM assigning 1/V to every token.
TableLM uniform_lm(std::size_t vocab_size);

/// Prompts built from neutral words only.
std::vector<std::string> toy_prompts(const ToyWorld& world, int count, std::uint64_t seed);

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
double unit_uniform(std::mt19937_64& rng);

}  // namespace plugblend
