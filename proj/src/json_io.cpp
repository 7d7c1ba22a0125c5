// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#include "plugblend/json_io.hpp"

#include <cmath>
#include <fstream>

namespace plugblend {

namespace {

[[noreturn]] void bad(Errc code, const std::string& where, const std::string& what) {
  throw Error(code, where + ": " + what);
}

const Json& field(const Json& doc, const char* key, const std::string& where, Errc code) {
  if (!doc.is_object()) bad(code, where, "expected an object");
  auto it = doc.find(key);
  if (it == doc.end()) bad(code, where, std::string("missing key '") + key + "'");
  return *it;
}

double as_number(const Json& v, const std::string& where, Errc code) {
  if (!v.is_number()) bad(code, where, "expected a number");
  return v.get<double>();
}

int as_int(const Json& v, const std::string& where, Errc code) {
  if (!v.is_number_integer()) bad(code, where, "expected an integer");
  return v.get<int>();
}

std::string as_string(const Json& v, const std::string& where, Errc code) {
  if (!v.is_string()) bad(code, where, "expected a string");
  return v.get<std::string>();
}

template <typename T, typename F>
void read_opt(const Json& doc, const char* key, T& out, F convert) {
  auto it = doc.find(key);
  if (it != doc.end() && !it->is_null()) out = convert(*it, key);
}

}  // namespace

Json number_or_null(double value) { return std::isfinite(value) ? Json(value) : Json(nullptr); }

Json to_json(const ControlConfig& config) {
  Json entries = Json::array();
  for (const auto& e : config.entries) entries.push_back({{"code", e.code}, {"strength", e.strength}});
  return {{"total_strength", config.total_strength}, {"entries", std::move(entries)}};
}

ControlConfig control_config_from_json(const Json& doc) {
  const std::string where = "config";
  ControlConfig out;
  out.total_strength = as_number(field(doc, "total_strength", where, Errc::InvalidArgument), where + ".total_strength",
                                 Errc::InvalidArgument);
  const auto& entries = field(doc, "entries", where, Errc::InvalidArgument);
  if (!entries.is_array()) bad(Errc::InvalidArgument, where + ".entries", "expected an array");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto at = where + ".entries[" + std::to_string(i) + "]";
    out.entries.push_back({as_string(field(entries[i], "code", at, Errc::InvalidArgument), at + ".code",
                                     Errc::InvalidArgument),
                           as_number(field(entries[i], "strength", at, Errc::InvalidArgument), at + ".strength",
                                     Errc::InvalidArgument)});
  }
  out.validate();
  return out;
}

Json to_json(const SketchSet& set) {
  Json sketches = Json::array();
  for (const auto& s : set.sketches) sketches.push_back({{"code", s.code}, {"start", s.start}, {"end", s.end}});
  return {{"n_lines", set.n_lines},
          {"sigma", set.sigma},
          {"epsilon", set.epsilon},
          {"total_strength", set.total_strength},
          {"variance_mode", std::string(variance_mode_name(set.variance_mode))},
          {"sketches", std::move(sketches)}};
}

SketchSet sketch_set_from_json(const Json& doc, const std::string& where) {
  constexpr auto E = Errc::InvalidSketch;
  if (!doc.is_object()) bad(E, where, "expected an object");
  SketchSet set;
  read_opt(doc, "n_lines", set.n_lines, [&](const Json& v, const char* k) { return as_int(v, where + "." + k, E); });
  read_opt(doc, "sigma", set.sigma, [&](const Json& v, const char* k) { return as_number(v, where + "." + k, E); });
  read_opt(doc, "epsilon", set.epsilon,
           [&](const Json& v, const char* k) { return as_number(v, where + "." + k, E); });
  read_opt(doc, "total_strength", set.total_strength,
           [&](const Json& v, const char* k) { return as_number(v, where + "." + k, E); });
  read_opt(doc, "variance_mode", set.variance_mode,
           [&](const Json& v, const char* k) { return parse_variance_mode(as_string(v, where + "." + k, E)); });
  auto it = doc.find("sketches");
  if (it != doc.end()) {
    if (!it->is_array()) bad(E, where + ".sketches", "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto& s = (*it)[i];
      const auto at = where + ".sketches[" + std::to_string(i) + "]";
      set.sketches.push_back({as_string(field(s, "code", at, E), at + ".code", E),
                              as_int(field(s, "start", at, E), at + ".start", E),
                              as_int(field(s, "end", at, E), at + ".end", E)});
    }
  }
  return set;
}

SketchSet load_sketch_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidSketch, path + ": cannot open sketch file");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(Errc::InvalidSketch, path + ": " + e.what());
  }
  return sketch_set_from_json(doc, path);
}

Json to_json(const LinePlan& plan) {
  Json lines = Json::array();
  for (const auto& c : plan.lines) lines.push_back(to_json(c));
  Json curves = Json::object();
  for (std::size_t i = 0; i < plan.codes.size(); ++i) curves[plan.codes[i]] = plan.curves[i];
  return {{"n_lines", plan.size()},
          {"total_strength", plan.total_strength},
          {"codes", plan.codes},
          {"curves", std::move(curves)},
          {"lines", std::move(lines)}};
}

Json weight_table(const LinePlan& plan) {
  Json rows = Json::array();
  for (std::size_t n = 0; n < plan.size(); ++n) {
    Json row = {{"n", n}};
    for (const auto& e : plan.lines[n].entries) row[e.code] = e.strength;
    for (const auto& code : plan.codes) {
      if (!row.contains(code)) row[code] = 0.0;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Json to_json(const GenerationParams& p) {
  return {{"max_tokens", p.max_tokens},
          {"repetition_penalty", p.repetition_penalty},
          {"temperature", p.temperature},
          {"stop_at_sentence", p.stop_at_sentence},
          {"eos_token", p.eos_token ? Json(*p.eos_token) : Json(nullptr)},
          {"max_tokens_cap", p.max_tokens_cap},
          {"epsilon_prob", p.epsilon_prob},
          {"length_normalize", p.length_normalize}};
}

GenerationParams generation_params_from_json(const Json& doc, GenerationParams p) {
  constexpr auto E = Errc::InvalidArgument;
  const std::string where = "generation";
  if (!doc.is_object()) bad(E, where, "expected an object");
  auto num = [&](const Json& v, const char* k) { return as_number(v, where + "." + k, E); };
  auto integer = [&](const Json& v, const char* k) { return as_int(v, where + "." + k, E); };
  auto boolean = [&](const Json& v, const char* k) {
    if (!v.is_boolean()) bad(E, where + "." + k, "expected a boolean");
    return v.get<bool>();
  };
  read_opt(doc, "max_tokens", p.max_tokens, integer);
  read_opt(doc, "repetition_penalty", p.repetition_penalty, num);
  read_opt(doc, "temperature", p.temperature, num);
  read_opt(doc, "stop_at_sentence", p.stop_at_sentence, boolean);
  read_opt(doc, "max_tokens_cap", p.max_tokens_cap, integer);
  read_opt(doc, "epsilon_prob", p.epsilon_prob, num);
  read_opt(doc, "length_normalize", p.length_normalize, boolean);
  auto eos = doc.find("eos_token");
  if (eos != doc.end()) {
    p.eos_token = eos->is_null() ? std::nullopt : std::optional<TokenId>(as_int(*eos, where + ".eos_token", E));
  }
  p.validate();
  return p;
}

Json to_json(const PipelineParams& p) {
  return {{"fallback_prompt", p.fallback_prompt},
          {"context_window", p.context_window},
          {"best_of", p.best_of},
          {"generation", to_json(p.generation)}};
}

PipelineParams pipeline_params_from_json(const Json& doc, PipelineParams p) {
  constexpr auto E = Errc::InvalidArgument;
  if (!doc.is_object()) bad(E, "params", "expected an object");
  read_opt(doc, "fallback_prompt", p.fallback_prompt,
           [&](const Json& v, const char* k) { return as_string(v, std::string("params.") + k, E); });
  read_opt(doc, "context_window", p.context_window,
           [&](const Json& v, const char* k) { return as_int(v, std::string("params.") + k, E); });
  auto best = doc.find("best_of");
  if (best != doc.end() && !best->is_null()) {
    if (!best->is_array()) bad(E, "params.best_of", "expected an array");
    p.best_of.clear();
    for (const auto& v : *best) p.best_of.push_back(as_number(v, "params.best_of", E));
  }
  auto gen = doc.find("generation");
  if (gen != doc.end() && !gen->is_null()) p.generation = generation_params_from_json(*gen, p.generation);
  p.validate();
  return p;
}

Json to_json(const StoryLine& line) {
  Json out = {{"n", line.n},
              {"text", line.text},
              {"config", to_json(line.config)},
              {"ppl", line.ppl ? number_or_null(*line.ppl) : Json(nullptr)},
              {"context", line.context},
              {"used_fallback", line.used_fallback},
              {"empty", line.empty}};
  if (line.chosen_multiplier) {
    Json cands = Json::array();
    for (const auto& c : line.candidates) {
      cands.push_back({{"multiplier", c.multiplier},
                       {"text", c.text},
                       {"perplexity", c.perplexity ? number_or_null(*c.perplexity) : Json(nullptr)}});
    }
    out["best_of"] = {{"chosen_multiplier", *line.chosen_multiplier}, {"candidates", std::move(cands)}};
  }
  return out;
}

StoryLine story_line_from_json(const Json& doc) {
  constexpr auto E = Errc::InvalidArgument;
  const std::string where = "story line";
  StoryLine line;
  line.n = as_int(field(doc, "n", where, E), where + ".n", E);
  line.text = as_string(field(doc, "text", where, E), where + ".text", E);
  line.config = control_config_from_json(field(doc, "config", where, E));
  if (auto it = doc.find("ppl"); it != doc.end() && !it->is_null()) line.ppl = as_number(*it, where + ".ppl", E);
  line.context = doc.value("context", std::string());
  line.used_fallback = doc.value("used_fallback", false);
  line.empty = doc.value("empty", false);
  if (auto it = doc.find("best_of"); it != doc.end() && it->is_object()) {
    line.chosen_multiplier = as_number(field(*it, "chosen_multiplier", where, E), where + ".best_of", E);
    for (const auto& c : it->value("candidates", Json::array())) {
      CandidateReport r;
      r.multiplier = as_number(field(c, "multiplier", where, E), where + ".best_of", E);
      r.text = c.value("text", std::string());
      if (auto p = c.find("perplexity"); p != c.end() && !p->is_null()) r.perplexity = p->get<double>();
      line.candidates.push_back(std::move(r));
    }
  }
  return line;
}

Json to_json(const Story& story) {
  Json lines = Json::array();
  for (const auto& l : story.lines) lines.push_back(to_json(l));
  return {{"lines", std::move(lines)}};
}

Story story_from_json(const Json& doc) {
  Story story;
  const auto& lines = field(doc, "lines", "story", Errc::InvalidArgument);
  if (!lines.is_array()) bad(Errc::InvalidArgument, "story.lines", "expected an array");
  for (const auto& l : lines) story.lines.push_back(story_line_from_json(l));
  return story;
}

Json to_json(const SweepResult& sweep) {
  Json steps = Json::array();
  for (const auto& s : sweep.steps) steps.push_back({{"fraction", s.fraction}, {"text", s.text}, {"score", s.score}});
  return {{"prompt", sweep.prompt},
          {"c1", sweep.c1},
          {"c2", sweep.c2},
          {"total_strength", sweep.total_strength},
          {"steps", std::move(steps)},
          {"tau_a", sweep.tau_a}};
}

Json to_json(const HeatmapCell& cell) {
  return {{"pair_c1", cell.c1},
          {"pair_c2", cell.c2},
          {"multiplier", cell.multiplier},
          {"mean_tau_a", number_or_null(cell.mean_tau_a)},
          {"n", cell.count}};
}

Json to_json(const PerplexityRow& row) {
  return {{"multiplier", row.multiplier}, {"mean_perplexity", number_or_null(row.mean_perplexity)}, {"n", row.count}};
}

}  // namespace plugblend
