// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#include "plugblend/toy.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace plugblend {

namespace {

const std::vector<std::string> kNeutral = {
    "recently", "the",  "a",      "man",   "woman", "went",  "to",      "home",  "day",   "and",
    "then",     "he",   "she",    "was",   "very",  "happy", "friend",  "saw",   "new",   "old",
    "walked",   "town", "morning", "found", "her",   "his",   "evening", "asked", "later", "quiet"};

const std::map<std::string, std::vector<std::string>> kTopicPool = {
    {"Business",
     {"market", "stocks", "profit", "bank", "trade", "shares", "deal", "company", "investors", "economy"}},
    {"Science",
     {"research", "space", "planet", "data", "study", "scientists", "lab", "physics", "genome", "software"}},
    {"Sports", {"game", "team", "coach", "season", "match", "goal", "player", "league", "score", "win"}},
    {"World",
     {"government", "election", "minister", "war", "nations", "border", "president", "treaty", "crisis",
      "capital"}},
};

// Words after which the base LM likes to end the sentence.
const std::vector<std::string> kClosers = {"home", "day", "town", "morning", "evening", "later"};

std::vector<double> random_weights(std::size_t n, double jitter, std::mt19937_64& rng) {
  std::vector<double> w(n);
  for (auto& x : w) x = 1.0 + jitter * (2.0 * unit_uniform(rng) - 1.0);
  return w;
}

void spread(ProbVector& row, const std::vector<TokenId>& ids, double mass, double jitter, std::mt19937_64& rng) {
  if (ids.empty()) return;
  auto w = random_weights(ids.size(), jitter, rng);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (std::size_t i = 0; i < ids.size(); ++i) row[static_cast<std::size_t>(ids[i])] += mass * w[i] / total;
}

std::vector<std::string> pick(const std::vector<std::string>& pool, int k, std::mt19937_64& rng) {
  std::vector<std::pair<double, std::string>> keyed;
  for (const auto& w : pool) keyed.emplace_back(unit_uniform(rng), w);
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::string> out;
  for (int i = 0; i < k && i < static_cast<int>(keyed.size()); ++i) out.push_back(keyed[static_cast<std::size_t>(i)].second);
  return out;
}

}  // namespace

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

ToyWorld make_toy_world(const ToySpec& spec) {
  if (spec.lexicon_min < 1 || spec.lexicon_max < spec.lexicon_min) {
    throw Error(Errc::InvalidArgument, "lexicon size range is empty");
  }
  if (spec.base_lexicon_mass + spec.base_stop_mass >= 1.0 || spec.guide_topic_mass <= 0.0 ||
      spec.guide_topic_mass >= 1.0 || spec.jitter < 0.0 || spec.jitter >= 1.0) {
    throw Error(Errc::InvalidArgument, "toy masses must leave room for neutral words");
  }
  std::mt19937_64 rng(spec.seed);
  ToyWorld world;
  world.neutral = kNeutral;

  std::vector<std::string> tokens = {"<unk>", "."};
  tokens.insert(tokens.end(), kNeutral.begin(), kNeutral.end());
  for (const auto& code : spec.codes) {
    auto pool = kTopicPool.find(code);
    if (pool == kTopicPool.end()) throw Error(Errc::UnknownControlCode, "no toy word pool for code '" + code + "'");
    const int span = spec.lexicon_max - spec.lexicon_min + 1;
    const int k = spec.lexicon_min + static_cast<int>(unit_uniform(rng) * span);
    world.lexicons[code] = pick(pool->second, k, rng);
    tokens.insert(tokens.end(), world.lexicons[code].begin(), world.lexicons[code].end());
  }
  world.vocab = std::make_shared<const Vocabulary>(tokens);
  const auto& vocab = *world.vocab;
  const std::size_t v = vocab.size();
  const TokenId stop = *vocab.find(".");

  std::vector<TokenId> neutral_ids;
  for (const auto& w : kNeutral) neutral_ids.push_back(*vocab.find(w));
  std::vector<TokenId> lexicon_ids;
  std::map<std::string, std::vector<TokenId>> code_ids;
  for (const auto& code : spec.codes) {
    for (const auto& w : world.lexicons[code]) {
      code_ids[code].push_back(*vocab.find(w));
      lexicon_ids.push_back(*vocab.find(w));
    }
  }

  // Base LM: bigram rows dominated by neutral filler.
  auto base_row = [&](TokenId prev) {
    ProbVector row(v, 0.0);
    double stop_mass = spec.base_stop_mass;
    if (prev == stop) {
      stop_mass = 0.0;
    } else if (prev >= 0 && std::find(kClosers.begin(), kClosers.end(), vocab.token(prev)) != kClosers.end()) {
      stop_mass = 0.5;
    }
    const double unk = 1e-6;
    row[static_cast<std::size_t>(stop)] = stop_mass;
    row[Vocabulary::kUnknown] = unk;
    const double lex = spec.base_lexicon_mass * (1.0 - stop_mass);
    spread(row, lexicon_ids, lex, spec.jitter, rng);
    spread(row, neutral_ids, 1.0 - stop_mass - unk - lex, spec.jitter, rng);
    return row;
  };
  std::map<std::vector<TokenId>, ProbVector> table;
  for (std::size_t t = 0; t < v; ++t) table[{static_cast<TokenId>(t)}] = base_row(static_cast<TokenId>(t));
  world.base = std::make_shared<TableLM>(world.vocab, 1, base_row(-1), std::move(table));

  // Guide: a shared order-0 row r scaled to 1 - M, plus M on the code's lexicon.
  ProbVector shared(v, 0.0);
  std::vector<TokenId> all_ids(v);
  std::iota(all_ids.begin(), all_ids.end(), 0);
  spread(shared, all_ids, 1.0 - spec.guide_topic_mass, spec.jitter, rng);
  std::vector<TableLM> models;
  for (const auto& code : spec.codes) {
    ProbVector row = shared;
    spread(row, code_ids[code], spec.guide_topic_mass, spec.jitter, rng);
    models.emplace_back(world.vocab, 0, std::move(row), std::map<std::vector<TokenId>, ProbVector>{});
  }
  world.guide = std::make_shared<TableGuide>(world.vocab, spec.codes, std::move(models));
  return world;
}

TableLM uniform_lm(std::size_t vocab_size) {
  if (vocab_size < 1) throw Error(Errc::InvalidArgument, "vocabulary must not be empty");
  std::vector<std::string> tokens = {"<unk>"};
  for (std::size_t i = 1; i < vocab_size; ++i) tokens.push_back("w" + std::to_string(i));
  return TableLM(std::make_shared<const Vocabulary>(tokens), 0,
                 ProbVector(vocab_size, 1.0 / static_cast<double>(vocab_size)), {});
}

std::vector<std::string> toy_prompts(const ToyWorld& world, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> out;
  for (int i = 0; i < count; ++i) {
    const int len = 2 + static_cast<int>(unit_uniform(rng) * 3);
    std::string prompt;
    for (int j = 0; j < len; ++j) {
      const auto idx = static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(world.neutral.size()));
      if (!prompt.empty()) prompt += ' ';
      prompt += world.neutral[idx];
    }
    out.push_back(std::move(prompt));
  }
  return out;
}

}  // namespace plugblend
