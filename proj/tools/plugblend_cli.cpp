// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "plugblend.h"

using nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kProvider = 2, kData = 3 };

int exit_for(pb_status s) {
  switch (s) {
    case PB_OK: return kOk;
    case PB_ERR_PROVIDER_UNAVAILABLE:
    case PB_ERR_INVALID_LOGITS:
    case PB_ERR_VOCAB_MISMATCH: return kProvider;
    case PB_ERR_INSUFFICIENT_DATA:
    case PB_ERR_UNKNOWN_LABEL:
    case PB_ERR_DEGENERATE_WEIGHTS:
    case PB_ERR_SHAPE_MISMATCH: return kData;
    default: return kUsage;
  }
}

struct Failure {
  int code;
  std::string message;
};

[[noreturn]] void fail(pb_status s) {
  throw Failure{exit_for(s), std::string(pb_status_name(s)) + ": " + pb_last_error()};
}

[[noreturn]] void usage(const std::string& message) { throw Failure{kUsage, message}; }

// Owns a string returned by the C API.
struct Owned {
  char* p = nullptr;
  ~Owned() { pb_string_free(p); }
  json parse() const { return p ? json::parse(p) : json(); }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) usage("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) usage("cannot write " + path);
}

std::vector<double> parse_numbers(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      usage(std::string("bad number '") + item + "' in " + what);
    }
  }
  if (out.empty()) usage(std::string(what) + " must list at least one number");
  return out;
}

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Flag values, with env vars and the config file filling the gaps.
struct Options {
  std::string config_path;
  std::string base, guide, classifier;
  std::string sketch, prompt, prompts, corpus, pairs, multipliers, best_of, out, svg, json_out, persist, pair;
  std::string variance_mode;
  std::optional<double> strength, sigma, epsilon;
  std::optional<int> jobs;
  std::uint64_t seed = 0;
  std::string host = "127.0.0.1";
  int port = 8080;
  bool text = false;
  json generation;

  void resolve() {
    json cfg = json::object();
    if (!config_path.empty()) {
      try {
        cfg = json::parse(read_file(config_path));
      } catch (const json::exception& e) {
        usage(config_path + ": " + e.what());
      }
    }
    auto pick = [&](std::string& field, const char* env, const char* key) {
      if (!field.empty()) return false;
      if (const char* v = env ? std::getenv(env) : nullptr; v && *v) {
        field = v;
      } else if (cfg.contains(key) && cfg[key].is_string()) {
        field = cfg[key].get<std::string>();
        return true;
      }
      return false;
    };
    // Relative model paths in the config file are relative to the file.
    auto pick_path = [&](std::string& field, const char* env, const char* key) {
      if (pick(field, env, key) && field.rfind("http://", 0) != 0 && field.rfind("https://", 0) != 0 &&
          std::filesystem::path(field).is_relative()) {
        field = (std::filesystem::path(config_path).parent_path() / field).string();
      }
    };
    pick_path(base, "PLUGBLEND_BASE_URL", "base");
    pick_path(guide, "PLUGBLEND_GUIDE_URL", "guide");
    pick_path(classifier, "PLUGBLEND_CLASSIFIER_URL", "classifier");
    pick(variance_mode, nullptr, "variance_mode");
    pick(best_of, nullptr, "best_of");
    auto pick_num = [&](std::optional<double>& field, const char* key) {
      if (!field && cfg.contains(key) && cfg[key].is_number()) field = cfg[key].get<double>();
    };
    pick_num(strength, "strength");
    pick_num(sigma, "sigma");
    pick_num(epsilon, "epsilon");
    if (!jobs && cfg.contains("jobs") && cfg["jobs"].is_number_integer()) jobs = cfg["jobs"].get<int>();
    if (cfg.contains("generation") && cfg["generation"].is_object()) generation = cfg["generation"];
  }
};

struct Engine {
  pb_engine* e = nullptr;
  Engine(const Options& o, bool need_classifier) {
    if (o.base.empty()) usage("no base model: pass --base or set PLUGBLEND_BASE_URL");
    if (o.guide.empty()) usage("no guide model: pass --guide or set PLUGBLEND_GUIDE_URL");
    if (need_classifier && o.classifier.empty()) {
      usage("no classifier: pass --classifier or set PLUGBLEND_CLASSIFIER_URL");
    }
    const auto s = pb_engine_create(o.base.c_str(), o.guide.c_str(),
                                    o.classifier.empty() ? nullptr : o.classifier.c_str(), &e);
    if (s != PB_OK) fail(s);
  }
  ~Engine() { pb_engine_free(e); }
};

json load_sketch(const Options& o) {
  if (o.sketch.empty()) usage("--sketch is required");
  json doc;
  try {
    doc = json::parse(read_file(o.sketch));
  } catch (const json::parse_error& e) {
    throw Failure{kUsage, "InvalidSketch: " + o.sketch + ": " + e.what()};
  }
  if (!doc.is_object()) throw Failure{kUsage, "InvalidSketch: " + o.sketch + ": expected an object"};
  if (o.strength) doc["total_strength"] = *o.strength;
  if (o.sigma) doc["sigma"] = *o.sigma;
  if (o.epsilon) doc["epsilon"] = *o.epsilon;
  if (!o.variance_mode.empty()) doc["variance_mode"] = o.variance_mode;
  return doc;
}

json compile(const json& sketch, const std::string& where) {
  Owned out;
  const auto s = pb_plan_compile(sketch.dump().c_str(), &out.p);
  if (s != PB_OK) throw Failure{exit_for(s), std::string(pb_status_name(s)) + ": " + where + ": " + pb_last_error()};
  return out.parse();
}

void print_weights(const json& result) {
  const auto& codes = result["plan"]["codes"];
  std::printf("%-4s", "n");
  for (const auto& c : codes) std::printf(" %12s", c.get<std::string>().c_str());
  std::printf("\n");
  for (const auto& row : result["weights"]) {
    std::printf("%-4d", row["n"].get<int>());
    for (const auto& c : codes) std::printf(" %12.6f", row[c.get<std::string>()].get<double>());
    std::printf("\n");
  }
}

void emit_json(const Options& o, const json& doc) {
  if (!o.out.empty()) write_file(o.out, doc.dump(2) + "\n");
  if (!o.text) std::cout << doc.dump(2) << "\n";
}

int cmd_plan(const Options& o) {
  const auto result = compile(load_sketch(o), o.sketch);
  for (const auto& w : result["warnings"]) std::fprintf(stderr, "warning: %s\n", w.get<std::string>().c_str());
  if (!o.out.empty()) write_file(o.out, result.dump(2) + "\n");
  if (o.text || !o.out.empty()) {
    print_weights(result);
  } else {
    std::cout << result.dump(2) << "\n";
  }
  return kOk;
}

json pipeline_params(const Options& o) {
  json params = json::object();
  if (!o.prompt.empty()) params["fallback_prompt"] = o.prompt;
  if (!o.best_of.empty()) params["best_of"] = parse_numbers(o.best_of, "--best-of");
  if (!o.generation.is_null()) params["generation"] = o.generation;
  return params;
}

std::string dominant(const json& config) {
  std::string best = "-";
  double w = 0.0;
  for (const auto& e : config["entries"]) {
    if (e["strength"].get<double>() > w) {
      w = e["strength"].get<double>();
      best = e["code"].get<std::string>();
    }
  }
  return best;
}

int cmd_generate(const Options& o) {
  const auto sketch = load_sketch(o);
  compile(sketch, o.sketch);
  Engine engine(o, false);
  Owned out;
  const auto s = pb_generate_story(engine.e, sketch.dump().c_str(), pipeline_params(o).dump().c_str(), &out.p);
  const auto story = out.parse();
  if (!story.is_null()) {
    for (const auto& w : story.value("warnings", json::array())) {
      std::fprintf(stderr, "warning: %s\n", w.get<std::string>().c_str());
    }
    if (!o.out.empty()) write_file(o.out, story.dump(2) + "\n");
    if (o.text || !o.out.empty()) {
      for (const auto& line : story["lines"]) {
        std::printf("%2d [%s] %s\n", line["n"].get<int>(), dominant(line["config"]).c_str(),
                    line["text"].get<std::string>().c_str());
        if (line.contains("best_of")) {
          for (const auto& c : line["best_of"]["candidates"]) {
            const auto ppl = c["perplexity"].is_null() ? std::string("inf") : std::to_string(c["perplexity"].get<double>());
            std::printf("     x%-5g ppl %-12s %s\n", c["multiplier"].get<double>(), ppl.c_str(),
                        c["text"].get<std::string>().c_str());
          }
          std::printf("     chosen x%g\n", line["best_of"]["chosen_multiplier"].get<double>());
        }
      }
    } else {
      std::cout << story.dump(2) << "\n";
    }
  }
  if (s != PB_OK) fail(s);
  return kOk;
}

json grid_request(const Options& o, const std::vector<double>& default_multipliers) {
  if (o.prompts.empty()) usage("--prompts is required");
  json req = {{"prompts_text", read_file(o.prompts)},
              {"unit_strength", o.strength.value_or(1.0)},
              {"jobs", o.jobs.value_or(1)},
              {"multipliers", o.multipliers.empty() ? default_multipliers : parse_numbers(o.multipliers, "--multipliers")}};
  if (!o.pairs.empty()) req["pairs"] = split(o.pairs);
  if (!o.generation.is_null()) req["generation"] = o.generation;
  return req;
}

int cmd_sweep(const Options& o) {
  const auto req = grid_request(o, {0.0, 1.0, 2.0, 4.0});
  Engine engine(o, true);
  Owned out;
  const auto s = pb_sweep(engine.e, req.dump().c_str(), &out.p);
  if (s != PB_OK) fail(s);
  const auto result = out.parse();
  for (const auto& w : result["warnings"]) std::fprintf(stderr, "warning: %s\n", w.get<std::string>().c_str());
  if (result["failures"].get<int>() > 0) {
    std::fprintf(stderr, "warning: %d sweeps failed and were left out\n", result["failures"].get<int>());
  }
  if (!o.out.empty()) write_file(o.out, result["csv"].get<std::string>());
  if (!o.svg.empty()) write_file(o.svg, result["svg"].get<std::string>());
  if (!o.json_out.empty()) write_file(o.json_out, result.dump(2) + "\n");
  std::cout << result["csv"].get<std::string>();
  return kOk;
}

int cmd_eval_ppl(const Options& o) {
  const auto req = grid_request(o, {0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0});
  Engine engine(o, false);
  Owned out;
  const auto s = pb_eval_ppl(engine.e, req.dump().c_str(), &out.p);
  if (s != PB_OK) fail(s);
  const auto result = out.parse();
  std::ostringstream csv;
  csv << "multiplier,mean_perplexity,n\n";
  for (const auto& r : result["rows"]) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,%d\n", r["multiplier"].get<double>(),
                  r["mean_perplexity"].is_null() ? 0.0 : r["mean_perplexity"].get<double>(), r["n"].get<int>());
    csv << buf;
  }
  if (!o.out.empty()) write_file(o.out, csv.str());
  if (!o.json_out.empty()) write_file(o.json_out, result.dump(2) + "\n");
  std::cout << csv.str();
  return kOk;
}

int cmd_baseline(const Options& o) {
  if (o.corpus.empty()) usage("--corpus is required");
  if (o.pair.empty()) usage("--pair is required");
  Engine engine(o, true);
  const json req = {{"corpus_text", read_file(o.corpus)}, {"pair", o.pair}, {"seed", o.seed}};
  Owned out;
  const auto s = pb_shuffled_baseline(engine.e, req.dump().c_str(), &out.p);
  if (s != PB_OK) fail(s);
  emit_json(o, out.parse());
  return kOk;
}

int cmd_topics(const Options& o) {
  Engine engine(o, false);
  Owned out;
  const auto s = pb_engine_codes(engine.e, &out.p);
  if (s != PB_OK) fail(s);
  emit_json(o, out.parse());
  return kOk;
}

pb_server* g_server = nullptr;

void on_signal(int) {
  if (g_server) pb_server_stop(g_server);
}

int serve(pb_server* server, const Options& o) {
  g_server = server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::fprintf(stderr, "listening on http://%s:%d\n", o.host.c_str(), o.port);
  const auto s = pb_server_listen(server, o.host.c_str(), o.port);
  g_server = nullptr;
  pb_server_free(server);
  if (s != PB_OK) fail(s);
  return kOk;
}

int cmd_serve(const Options& o) {
  if (o.base.empty() || o.guide.empty()) usage("serve needs --base and --guide");
  json options = {{"params", pipeline_params(o)}};
  if (!o.persist.empty()) options["persist_dir"] = o.persist;
  pb_server* server = nullptr;
  const auto s = pb_api_server_create(o.base.c_str(), o.guide.c_str(), options.dump().c_str(), &server);
  if (s != PB_OK) fail(s);
  return serve(server, o);
}

int cmd_serve_model(const Options& o) {
  Engine engine(o, false);
  pb_server* server = nullptr;
  const auto s = pb_model_server_create(engine.e, &server);
  if (s != PB_OK) fail(s);
  return serve(server, o);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"plugblend: topic-blended story generation with guided decoding"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pb_version());

  Options o;
  auto providers = [&](CLI::App* cmd) {
    cmd->add_option("--base", o.base, "base LM: table JSON file or http:// URL");
    cmd->add_option("--guide", o.guide, "guide model: table JSON file or http:// URL");
  };
  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config_path, "JSON config file (flags and env vars take precedence)");
    cmd->add_option("--out", o.out, "output file");
  };
  auto sketch_flags = [&](CLI::App* cmd) {
    cmd->add_option("--sketch", o.sketch, "control sketch JSON file")->required();
    cmd->add_option("--strength", o.strength, "total control strength per line");
    cmd->add_option("--sigma", o.sigma, "planner sigma");
    cmd->add_option("--epsilon", o.epsilon, "planner epsilon");
    cmd->add_option("--variance-mode", o.variance_mode, "literal or proportional")
        ->check(CLI::IsMember({"literal", "proportional"}));
  };
  auto grid_flags = [&](CLI::App* cmd) {
    cmd->add_option("--prompts", o.prompts, "prompt corpus (text file)")->required();
    cmd->add_option("--pairs", o.pairs, "comma-separated c1:c2 pairs (default: all pairs)");
    cmd->add_option("--multipliers", o.multipliers, "comma-separated strength multipliers");
    cmd->add_option("--strength", o.strength, "total strength that 1x stands for");
    cmd->add_option("--jobs", o.jobs, "parallel workers")->check(CLI::PositiveNumber);
    cmd->add_option("--json", o.json_out, "full JSON report");
  };

  auto* plan = app.add_subcommand("plan", "compile a control sketch into per-line weights");
  common(plan);
  sketch_flags(plan);
  plan->add_flag("--text", o.text, "print the weight table instead of JSON");

  auto* gen = app.add_subcommand("generate", "generate a story for a control sketch");
  common(gen);
  providers(gen);
  sketch_flags(gen);
  gen->add_option("--prompt", o.prompt, "fallback prompt (default \"Recently\")");
  gen->add_option("--best-of", o.best_of, "comma-separated strength multipliers, lowest perplexity wins");
  gen->add_option("--seed", o.seed, "ignored: decoding is greedy");
  gen->add_flag("--text", o.text, "print the story as text instead of JSON");

  auto* sweep = app.add_subcommand("sweep", "latent-walk fidelity sweep and tau-a heatmap");
  common(sweep);
  providers(sweep);
  grid_flags(sweep);
  sweep->add_option("--classifier", o.classifier, "lexicon JSON file or http:// URL");
  sweep->add_option("--svg", o.svg, "heatmap SVG output");

  auto* ppl = app.add_subcommand("eval-ppl", "mean base-LM perplexity per control strength");
  common(ppl);
  providers(ppl);
  grid_flags(ppl);

  auto* base = app.add_subcommand("baseline", "shuffled-story tau-a baseline");
  common(base);
  providers(base);
  base->add_option("--classifier", o.classifier, "lexicon JSON file or http:// URL");
  base->add_option("--corpus", o.corpus, "stories separated by blank lines")->required();
  base->add_option("--pair", o.pair, "c1:c2")->required();
  base->add_option("--seed", o.seed, "shuffle seed");
  base->add_flag("--text", o.text, "write only to --out");

  auto* topics = app.add_subcommand("topics", "list the guide's control codes");
  common(topics);
  providers(topics);

  auto* srv = app.add_subcommand("serve", "story session API server");
  common(srv);
  providers(srv);
  srv->add_option("--host", o.host, "bind address");
  srv->add_option("--port", o.port, "port");
  srv->add_option("--persist", o.persist, "session snapshot directory");
  srv->add_option("--best-of", o.best_of, "comma-separated strength multipliers");

  auto* model = app.add_subcommand("serve-model", "serve local providers over the /v1 protocol");
  common(model);
  providers(model);
  model->add_option("--classifier", o.classifier, "lexicon JSON file");
  model->add_option("--host", o.host, "bind address");
  model->add_option("--port", o.port, "port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    o.resolve();
    if (plan->parsed()) return cmd_plan(o);
    if (gen->parsed()) return cmd_generate(o);
    if (sweep->parsed()) return cmd_sweep(o);
    if (ppl->parsed()) return cmd_eval_ppl(o);
    if (base->parsed()) return cmd_baseline(o);
    if (topics->parsed()) return cmd_topics(o);
    if (srv->parsed()) return cmd_serve(o);
    if (model->parsed()) return cmd_serve_model(o);
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s\n", f.message.c_str());
    return f.code;
  } catch (const json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  }
  return kUsage;
}
