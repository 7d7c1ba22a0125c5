// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#include "plugblend/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "http_client.hpp"
#include "parallel.hpp"

namespace plugblend {

using nlohmann::json;

double perplexity(const LanguageModel& base, std::span<const TokenId> tokens, std::span<const TokenId> context) {
  const double logprob = sequence_logprob(base, tokens, context);
  return std::exp(-logprob / static_cast<double>(tokens.size()));
}

double kendall_tau_a(std::span<const double> scores) {
  const std::size_t n = scores.size();
  if (n < 2) throw Error(Errc::InsufficientData, "tau-a needs at least two scores");
  long long concordant = 0;
  long long discordant = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (scores[j] > scores[i]) {
        ++concordant;
      } else if (scores[j] < scores[i]) {
        ++discordant;
      }
    }
  }
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  return static_cast<double>(concordant - discordant) / pairs;
}

// ---------------------------------------------------------------------------
// Classifiers

namespace {

std::string strip_punct(std::string_view word) {
  std::size_t b = 0, e = word.size();
  while (b < e && std::ispunct(static_cast<unsigned char>(word[b]))) ++b;
  while (e > b && std::ispunct(static_cast<unsigned char>(word[e - 1]))) --e;
  return fold_case(word.substr(b, e - b));
}

}  // namespace

std::vector<double> keyword_classify(std::string_view text, std::span<const std::string> labels,
                                     const Lexicons& lexicons) {
  if (labels.empty()) throw Error(Errc::InvalidArgument, "at least one label is required");
  std::vector<std::set<std::string>> sets;
  sets.reserve(labels.size());
  for (const auto& label : labels) {
    auto it = lexicons.find(label);
    if (it == lexicons.end()) throw Error(Errc::UnknownLabel, "no lexicon for label '" + label + "'");
    std::set<std::string> words;
    for (const auto& w : it->second) words.insert(fold_case(w));
    sets.push_back(std::move(words));
  }
  std::vector<double> scores(labels.size(), kKeywordSmoothing);
  std::istringstream in{std::string(text)};
  std::string raw;
  while (in >> raw) {
    const auto word = strip_punct(raw);
    if (word.empty()) continue;
    for (std::size_t l = 0; l < sets.size(); ++l) {
      if (sets[l].contains(word)) scores[l] += 1.0;
    }
  }
  double total = 0.0;
  for (double s : scores) total += s;
  for (double& s : scores) s /= total;
  return scores;
}

KeywordClassifier::KeywordClassifier(Lexicons lexicons) : lexicons_(std::move(lexicons)) {}

KeywordClassifier KeywordClassifier::from_json(const json& doc, const std::string& where) {
  if (!doc.is_object()) throw Error(Errc::InvalidArgument, where + ": lexicon file must be a JSON object");
  Lexicons lexicons;
  for (const auto& [label, words] : doc.items()) {
    if (!words.is_array()) throw Error(Errc::InvalidArgument, where + ": lexicon '" + label + "' must be an array");
    std::vector<std::string> list;
    for (const auto& w : words) {
      if (!w.is_string()) throw Error(Errc::InvalidArgument, where + ": lexicon '" + label + "' has a non-string word");
      list.push_back(w.get<std::string>());
    }
    lexicons.emplace(label, std::move(list));
  }
  return KeywordClassifier(std::move(lexicons));
}

KeywordClassifier KeywordClassifier::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidArgument, path.string() + ": cannot open lexicon file");
  auto doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw Error(Errc::InvalidArgument, path.string() + ": malformed JSON");
  return from_json(doc, path.string());
}

std::vector<double> KeywordClassifier::classify(std::string_view text, std::span<const std::string> labels) const {
  return keyword_classify(text, labels, lexicons_);
}

RemoteClassifier::RemoteClassifier(std::string url, RemoteOptions options)
    : url_(std::move(url)), http_(std::make_unique<detail::JsonHttpClient>(url_, options)) {}

RemoteClassifier::~RemoteClassifier() = default;

std::vector<double> RemoteClassifier::classify(std::string_view text, std::span<const std::string> labels) const {
  json body;
  body["text"] = std::string(text);
  body["labels"] = std::vector<std::string>(labels.begin(), labels.end());
  auto res = http_->post("/v1/classify", body);
  if (!res.contains("scores") || !res["scores"].is_array() || res["scores"].size() != labels.size()) {
    throw Error(Errc::ProviderUnavailable, url_ + "/v1/classify: expected one score per label");
  }
  std::vector<double> scores;
  double total = 0.0;
  for (const auto& s : res["scores"]) {
    if (!s.is_number()) throw Error(Errc::ProviderUnavailable, url_ + "/v1/classify: non-numeric score");
    scores.push_back(s.get<double>());
    total += scores.back();
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw Error(Errc::ProviderUnavailable, url_ + "/v1/classify: scores do not sum to 1");
  }
  return scores;
}

std::shared_ptr<const Classifier> open_classifier(const std::string& spec, RemoteOptions options) {
  if (spec.empty()) throw Error(Errc::InvalidArgument, "no classifier given");
  if (is_remote_spec(spec)) return std::make_shared<RemoteClassifier>(spec, options);
  return std::make_shared<KeywordClassifier>(KeywordClassifier::load(spec));
}

// ---------------------------------------------------------------------------
// Sweeps

SweepResult fidelity_sweep(std::string_view prompt, const std::string& c1, const std::string& c2,
                           double total_strength, const LanguageModel& base, const ClassConditionalModel& guide,
                           const Classifier& classifier, const GenerationParams& params) {
  if (c1 == c2) throw Error(Errc::InvalidArgument, "sweep codes must differ, got '" + c1 + "' twice");
  guide.require_code(c1);
  guide.require_code(c2);
  SweepResult result;
  result.prompt = std::string(prompt);
  result.c1 = c1;
  result.c2 = c2;
  result.total_strength = total_strength;
  const auto prompt_tokens = base.tokenize(prompt);
  const std::string labels[] = {c1, c2};
  std::vector<double> scores;
  for (double fraction : kSweepFractions) {
    ControlConfig config;
    config.total_strength = total_strength;
    config.entries = {{c1, fraction * total_strength}, {c2, (1.0 - fraction) * total_strength}};
    auto line = decode_line(base, guide, config, prompt_tokens, params);
    const double score = classifier.classify(line.text, labels).at(0);
    result.steps.push_back({fraction, std::move(line.text), score});
    scores.push_back(score);
  }
  result.tau_a = kendall_tau_a(scores);
  return result;
}

CodePair parse_code_pair(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
    throw Error(Errc::InvalidArgument, "code pair must look like 'c1:c2', got '" + std::string(text) + "'");
  }
  CodePair pair{std::string(text.substr(0, colon)), std::string(text.substr(colon + 1))};
  if (pair.c1 == pair.c2) {
    throw Error(Errc::InvalidArgument, "code pair must name two different codes, got '" + std::string(text) + "'");
  }
  return pair;
}

std::vector<CodePair> all_code_pairs(const std::vector<std::string>& codes) {
  std::vector<CodePair> out;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    for (std::size_t j = i + 1; j < codes.size(); ++j) out.push_back({codes[i], codes[j]});
  }
  return out;
}

HeatmapReport heatmap(const SweepGrid& grid, const LanguageModel& base, const ClassConditionalModel& guide,
                      const Classifier& classifier, const GenerationParams& params) {
  if (grid.prompts.empty() || grid.pairs.empty() || grid.multipliers.empty()) {
    throw Error(Errc::InsufficientData, "heatmap needs at least one prompt, code pair and multiplier");
  }
  for (const auto& pair : grid.pairs) {
    if (pair.c1 == pair.c2) throw Error(Errc::InvalidArgument, "code pair needs two different codes: " + pair.c1);
    guide.require_code(pair.c1);
    guide.require_code(pair.c2);
  }
  const std::size_t per_cell = grid.prompts.size();
  const std::size_t cells = grid.pairs.size() * grid.multipliers.size();
  const std::size_t total = cells * per_cell;

  std::vector<std::optional<SweepResult>> results(total);
  std::vector<std::string> errors(total);
  detail::parallel_for(total, grid.jobs, [&](std::size_t idx) {
    const std::size_t cell = idx / per_cell;
    const auto& pair = grid.pairs[cell / grid.multipliers.size()];
    const double mult = grid.multipliers[cell % grid.multipliers.size()];
    const auto& prompt = grid.prompts[idx % per_cell];
    try {
      results[idx] = fidelity_sweep(prompt, pair.c1, pair.c2, mult * grid.unit_strength, base, guide,
                                    classifier, params);
    } catch (const Error& e) {
      errors[idx] = e.what();
    }
  });

  HeatmapReport report;
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const auto& pair = grid.pairs[cell / grid.multipliers.size()];
    HeatmapCell out{pair.c1, pair.c2, grid.multipliers[cell % grid.multipliers.size()], 0.0, 0};
    double sum = 0.0;
    for (std::size_t p = 0; p < per_cell; ++p) {
      const std::size_t idx = cell * per_cell + p;
      if (results[idx]) {
        sum += results[idx]->tau_a;
        ++out.count;
        report.sweeps.push_back(std::move(*results[idx]));
      } else {
        ++report.failures;
        report.warnings.push_back("sweep failed for prompt " + std::to_string(p) + " (" + pair.c1 + ":" +
                                  pair.c2 + "): " + errors[idx]);
      }
    }
    if (out.count == 0) {
      report.warnings.push_back("cell " + pair.c1 + ":" + pair.c2 + " has no successful sweeps");
      continue;
    }
    out.mean_tau_a = sum / out.count;
    report.cells.push_back(out);
  }
  return report;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string escape_csv(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string heatmap_csv(std::span<const HeatmapCell> cells) {
  std::string out = "pair_c1,pair_c2,multiplier,mean_tau_a,n\n";
  for (const auto& c : cells) {
    out += escape_csv(c.c1) + "," + escape_csv(c.c2) + "," + fmt_double(c.multiplier) + "," +
           fmt_double(c.mean_tau_a) + "," + std::to_string(c.count) + "\n";
  }
  return out;
}

std::string heatmap_svg(std::span<const HeatmapCell> cells) {
  std::vector<std::string> rows;
  std::vector<double> cols;
  for (const auto& c : cells) {
    const auto label = c.c1 + " / " + c.c2;
    if (std::find(rows.begin(), rows.end(), label) == rows.end()) rows.push_back(label);
    if (std::find(cols.begin(), cols.end(), c.multiplier) == cols.end()) cols.push_back(c.multiplier);
  }
  std::sort(cols.begin(), cols.end());
  constexpr int kCell = 64, kLeft = 180, kTop = 40;
  const int width = kLeft + kCell * static_cast<int>(cols.size()) + 20;
  const int height = kTop + kCell * static_cast<int>(rows.size()) + 20;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  for (std::size_t j = 0; j < cols.size(); ++j) {
    svg << "<text x=\"" << kLeft + kCell * static_cast<int>(j) + kCell / 2 << "\" y=\"" << kTop - 10
        << "\" text-anchor=\"middle\">" << fmt_double(cols[j]) << "x</text>\n";
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << kTop + kCell * static_cast<int>(i) + kCell / 2 + 4
        << "\" text-anchor=\"end\">" << escape_xml(rows[i]) << "</text>\n";
  }
  for (const auto& c : cells) {
    const auto row = std::find(rows.begin(), rows.end(), c.c1 + " / " + c.c2) - rows.begin();
    const auto col = std::find(cols.begin(), cols.end(), c.multiplier) - cols.begin();
    // tau-a in [-1, 1] maps red -> white -> blue.
    const double t = std::clamp(c.mean_tau_a, -1.0, 1.0);
    const int r = t < 0 ? 255 : static_cast<int>(255 * (1 - t));
    const int g = static_cast<int>(255 * (1 - std::abs(t)));
    const int b = t > 0 ? 255 : static_cast<int>(255 * (1 + t));
    const int x = kLeft + kCell * static_cast<int>(col);
    const int y = kTop + kCell * static_cast<int>(row);
    svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << kCell << "\" height=\"" << kCell
        << "\" fill=\"rgb(" << r << "," << g << "," << b << ")\" stroke=\"#888\"/>\n";
    char value[32];
    std::snprintf(value, sizeof(value), "%.2f", c.mean_tau_a);
    svg << "<text x=\"" << x + kCell / 2 << "\" y=\"" << y + kCell / 2 + 4 << "\" text-anchor=\"middle\">"
        << value << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

double shuffled_baseline(const std::vector<std::vector<std::string>>& stories, const CodePair& pair,
                         const Classifier& classifier, std::uint64_t seed) {
  if (stories.empty()) throw Error(Errc::InsufficientData, "shuffled baseline needs at least one story");
  std::mt19937_64 rng(seed);
  const std::string labels[] = {pair.c1, pair.c2};
  double sum = 0.0;
  for (std::size_t s = 0; s < stories.size(); ++s) {
    if (stories[s].size() < 2) {
      throw Error(Errc::InsufficientData, "story " + std::to_string(s) + " has fewer than two sentences");
    }
    auto order = stories[s];
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<double> scores;
    scores.reserve(order.size());
    for (const auto& sentence : order) scores.push_back(classifier.classify(sentence, labels).at(0));
    sum += kendall_tau_a(scores);
  }
  return sum / static_cast<double>(stories.size());
}

std::vector<PerplexityRow> perplexity_by_strength(const SweepGrid& grid, const LanguageModel& base,
                                                  const ClassConditionalModel& guide,
                                                  const GenerationParams& params) {
  if (grid.prompts.empty()) throw Error(Errc::InsufficientData, "no prompts to evaluate");
  if (grid.pairs.empty() || grid.multipliers.empty()) {
    throw Error(Errc::InsufficientData, "perplexity evaluation needs code pairs and multipliers");
  }
  const std::size_t per_mult = grid.prompts.size() * grid.pairs.size();
  const std::size_t total = per_mult * grid.multipliers.size();
  std::vector<std::vector<TokenId>> prompt_tokens;
  prompt_tokens.reserve(grid.prompts.size());
  for (const auto& p : grid.prompts) prompt_tokens.push_back(base.tokenize(p));

  std::vector<std::optional<double>> values(total);
  detail::parallel_for(total, grid.jobs, [&](std::size_t idx) {
    const double mult = grid.multipliers[idx / per_mult];
    const auto& pair = grid.pairs[(idx % per_mult) / grid.prompts.size()];
    const auto& prompt = prompt_tokens[idx % grid.prompts.size()];
    auto config = ControlConfig::equal_blend({pair.c1, pair.c2}, mult * grid.unit_strength);
    auto line = decode_line(base, guide, config, prompt, params);
    if (!line.empty) values[idx] = perplexity(base, line.tokens, prompt);
  });

  std::vector<PerplexityRow> rows;
  for (std::size_t m = 0; m < grid.multipliers.size(); ++m) {
    PerplexityRow row{grid.multipliers[m], 0.0, 0};
    double sum = 0.0;
    for (std::size_t k = 0; k < per_mult; ++k) {
      if (const auto& v = values[m * per_mult + k]) {
        sum += *v;
        ++row.count;
      }
    }
    row.mean_perplexity = row.count > 0 ? sum / row.count : 0.0;
    rows.push_back(row);
  }
  return rows;
}

std::vector<std::vector<std::string>> parse_corpus(std::string_view text) {
  std::vector<std::vector<std::string>> stories;
  std::vector<std::string> current;
  std::istringstream in{std::string(text)};
  std::string line;
  auto flush = [&] {
    if (!current.empty()) stories.push_back(std::move(current));
    current.clear();
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) {
      flush();
      continue;
    }
    const auto last = line.find_last_not_of(" \t");
    current.push_back(line.substr(first, last - first + 1));
  }
  flush();
  return stories;
}

std::vector<std::string> prompts_from_text(std::string_view text) {
  auto stories = parse_corpus(text);
  std::vector<std::string> prompts;
  if (stories.size() == 1) return stories.front();
  for (auto& s : stories) prompts.push_back(s.front());
  return prompts;
}

}  // namespace plugblend
