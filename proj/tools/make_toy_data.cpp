// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

// Writes the toy world used by the examples and tests into a directory.

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "plugblend/json_io.hpp"
#include "plugblend/toy.hpp"

using namespace plugblend;

namespace {

void write(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw Error(Errc::InvalidArgument, "cannot write " + path.string());
  std::printf("wrote %s\n", path.string().c_str());
}

SketchSet sports_science(std::vector<ControlSketch> sketches) {
  SketchSet set;
  set.n_lines = 10;
  set.sigma = 1.0;
  set.total_strength = kToyUnitStrength;
  set.sketches = std::move(sketches);
  return set;
}

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path dir = argc > 1 ? argv[1] : "data/toy";
  std::filesystem::create_directories(dir);
  const auto world = make_toy_world();

  write(dir / "base.json", world.base->to_json().dump(1) + "\n");
  write(dir / "guide.json", world.guide->to_json().dump(1) + "\n");
  Json lex = Json::object();
  for (const auto& [code, words] : world.lexicons) lex[code] = words;
  write(dir / "lexicons.json", lex.dump(2) + "\n");

  std::string prompts;
  for (const auto& p : toy_prompts(world, 20, 11)) prompts += p + "\n";
  write(dir / "prompts.txt", prompts);

  // Stories for the shuffled baseline: five sentences each, one topic word per sentence.
  std::mt19937_64 rng(5);
  std::string corpus;
  const auto& codes = world.guide->codes();
  for (int s = 0; s < 200; ++s) {
    for (int line = 0; line < 5; ++line) {
      const auto& code = codes[static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(codes.size()))];
      const auto& words = world.lexicons.find(code)->second;
      const auto& n1 = world.neutral[static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(world.neutral.size()))];
      const auto& w = words[static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(words.size()))];
      const auto& n2 = world.neutral[static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(world.neutral.size()))];
      corpus += n1 + " " + w + " " + n2 + ".\n";
    }
    corpus += "\n";
  }
  write(dir / "stories.txt", corpus);

  write(dir / "sports_science_1.json", to_json(sports_science({{"Sports", 0, 5}, {"Science", 4, 10}})).dump(2) + "\n");
  write(dir / "sports_science_2.json", to_json(sports_science({{"Sports", 0, 5}, {"Science", 5, 10}})).dump(2) + "\n");
  write(dir / "sports_science_3.json", to_json(sports_science({{"Sports", 0, 5}, {"Science", 6, 10}})).dump(2) + "\n");

  Json config = {{"base", "base.json"}, {"guide", "guide.json"}, {"classifier", "lexicons.json"},
                 {"strength", kToyUnitStrength}};
  write(dir / "config.json", config.dump(2) + "\n");
  return 0;
}
