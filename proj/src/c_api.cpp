// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#include "plugblend.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "plugblend/json_io.hpp"
#include "plugblend/server.hpp"

using namespace plugblend;

struct pb_engine {
  std::shared_ptr<const LanguageModel> base;
  std::shared_ptr<const ClassConditionalModel> guide;
  std::shared_ptr<const Classifier> classifier;
};

struct pb_server {
  std::unique_ptr<ApiServer> api;
  std::unique_ptr<ModelServer> model;
};

namespace {

thread_local std::string g_last_error;

pb_status to_status(Errc code) { return static_cast<pb_status>(static_cast<int>(code) + 1); }

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** out, const Json& doc) {
  if (out) *out = dup_string(doc.dump());
}

// Runs fn, translating exceptions into a status plus pb_last_error.
template <typename F>
pb_status guarded(F&& fn) {
  try {
    fn();
    g_last_error.clear();
    return PB_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const Json::exception& e) {
    g_last_error = std::string("malformed JSON: ") + e.what();
    return PB_ERR_INVALID_ARGUMENT;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PB_ERR_INTERNAL;
  }
}

Json parse(const char* text, const char* what) {
  if (!text) throw Error(Errc::InvalidArgument, std::string(what) + " is required");
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(Errc::InvalidArgument, std::string(what) + ": " + e.what());
  }
}

void require(const void* p, const char* what) {
  if (!p) throw Error(Errc::InvalidArgument, std::string(what) + " must not be NULL");
}

const Classifier& require_classifier(const pb_engine* engine) {
  if (!engine->classifier) throw Error(Errc::InvalidArgument, "this command needs a classifier (--classifier)");
  return *engine->classifier;
}

SweepGrid grid_from_json(const Json& req, const ClassConditionalModel& guide, GenerationParams* gen) {
  SweepGrid grid;
  if (auto it = req.find("prompts"); it != req.end()) {
    grid.prompts = it->get<std::vector<std::string>>();
  } else if (auto text = req.find("prompts_text"); text != req.end()) {
    grid.prompts = prompts_from_text(text->get<std::string>());
  }
  if (grid.prompts.empty()) throw Error(Errc::InsufficientData, "no prompts given");
  auto pairs = req.find("pairs");
  if (pairs == req.end() || pairs->is_null() || pairs->empty()) {
    grid.pairs = all_code_pairs(guide.codes());
  } else {
    for (const auto& p : *pairs) grid.pairs.push_back(parse_code_pair(p.get<std::string>()));
  }
  grid.multipliers = req.value("multipliers", std::vector<double>{1.0});
  grid.unit_strength = req.value("unit_strength", 1.0);
  grid.jobs = req.value("jobs", 1);
  if (auto g = req.find("generation"); g != req.end()) *gen = generation_params_from_json(*g);
  return grid;
}

}  // namespace

extern "C" {

const char* pb_last_error(void) { return g_last_error.c_str(); }

const char* pb_status_name(pb_status status) {
  if (status == PB_OK) return "OK";
  if (status == PB_ERR_INTERNAL) return "Internal";
  if (status < PB_ERR_INVALID_ARGUMENT || status > PB_ERR_CONFLICT) return "Unknown";
  return errc_name(static_cast<Errc>(static_cast<int>(status) - 1));
}

const char* pb_version(void) { return "0.1.0"; }

void pb_string_free(char* str) { std::free(str); }

pb_status pb_engine_create(const char* base_spec, const char* guide_spec, const char* classifier_spec,
                           pb_engine** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    require(base_spec, "base spec");
    require(guide_spec, "guide spec");
    auto engine = std::make_unique<pb_engine>();
    engine->base = open_base_model(base_spec);
    engine->guide = open_guide_model(guide_spec);
    check_compatible(*engine->base, *engine->guide);
    if (classifier_spec && *classifier_spec) engine->classifier = open_classifier(classifier_spec);
    *out = engine.release();
  });
}

void pb_engine_free(pb_engine* engine) { delete engine; }

pb_status pb_engine_codes(pb_engine* engine, char** out_json) {
  return guarded([&] {
    require(engine, "engine");
    emit(out_json, Json{{"codes", engine->guide->live_codes()}});
  });
}

pb_status pb_plan_compile(const char* sketch_json, char** out_json) {
  return guarded([&] {
    const auto set = sketch_set_from_json(parse(sketch_json, "sketch"));
    std::vector<std::string> warnings;
    const auto plan = compile_plan(set, &warnings);
    emit(out_json, Json{{"sketch", to_json(set)}, {"plan", to_json(plan)}, {"weights", weight_table(plan)},
                        {"warnings", warnings}});
  });
}

pb_status pb_generate_story(pb_engine* engine, const char* sketch_json, const char* params_json, char** out_json) {
  if (out_json) *out_json = nullptr;
  Json doc;
  const auto status = guarded([&] {
    require(engine, "engine");
    const auto set = sketch_set_from_json(parse(sketch_json, "sketch"));
    PipelineParams params;
    if (params_json) params = pipeline_params_from_json(parse(params_json, "params"));
    std::vector<std::string> warnings;
    const auto plan = compile_plan(set, &warnings);
    doc = {{"plan", to_json(plan)}, {"params", to_json(params)}, {"warnings", warnings}};
    try {
      doc["lines"] = to_json(generate_story(plan, *engine->base, *engine->guide, params))["lines"];
    } catch (const StoryError& e) {
      doc["lines"] = to_json(e.partial())["lines"];
      doc["error"] = {{"code", errc_name(e.code())}, {"message", e.what()}};
      throw;
    }
  });
  if (!doc.is_null()) emit(out_json, doc);
  return status;
}

pb_status pb_sweep(pb_engine* engine, const char* request_json, char** out_json) {
  return guarded([&] {
    require(engine, "engine");
    const auto req = parse(request_json, "request");
    GenerationParams gen;
    const auto grid = grid_from_json(req, *engine->guide, &gen);
    const auto report = heatmap(grid, *engine->base, *engine->guide, require_classifier(engine), gen);
    Json cells = Json::array();
    for (const auto& c : report.cells) cells.push_back(to_json(c));
    Json sweeps = Json::array();
    for (const auto& s : report.sweeps) sweeps.push_back(to_json(s));
    emit(out_json, Json{{"cells", std::move(cells)},
                        {"sweeps", std::move(sweeps)},
                        {"failures", report.failures},
                        {"warnings", report.warnings},
                        {"csv", heatmap_csv(report.cells)},
                        {"svg", heatmap_svg(report.cells)}});
  });
}

pb_status pb_eval_ppl(pb_engine* engine, const char* request_json, char** out_json) {
  return guarded([&] {
    require(engine, "engine");
    const auto req = parse(request_json, "request");
    GenerationParams gen;
    const auto grid = grid_from_json(req, *engine->guide, &gen);
    Json rows = Json::array();
    for (const auto& r : perplexity_by_strength(grid, *engine->base, *engine->guide, gen)) rows.push_back(to_json(r));
    emit(out_json, Json{{"rows", std::move(rows)}});
  });
}

pb_status pb_shuffled_baseline(pb_engine* engine, const char* request_json, char** out_json) {
  return guarded([&] {
    require(engine, "engine");
    const auto req = parse(request_json, "request");
    const auto stories = parse_corpus(req.value("corpus_text", std::string()));
    if (stories.empty()) throw Error(Errc::InsufficientData, "corpus has no stories");
    const auto pair = parse_code_pair(req.value("pair", std::string()));
    const auto seed = req.value("seed", std::uint64_t{0});
    const double tau = shuffled_baseline(stories, pair, require_classifier(engine), seed);
    emit(out_json, Json{{"mean_tau_a", tau}, {"stories", stories.size()}, {"seed", seed}});
  });
}

pb_status pb_api_server_create(const char* base_spec, const char* guide_spec, const char* options_json,
                               pb_server** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    require(base_spec, "base spec");
    require(guide_spec, "guide spec");
    ApiOptions options;
    if (options_json) {
      const auto doc = parse(options_json, "options");
      options.persist_dir = doc.value("persist_dir", std::string());
      options.cors_origin = doc.value("cors_origin", options.cors_origin);
      if (auto p = doc.find("params"); p != doc.end()) options.pipeline = pipeline_params_from_json(*p);
    }
    auto factory = [base = std::string(base_spec), guide = std::string(guide_spec)] {
      return ProviderSet{open_base_model(base), open_guide_model(guide)};
    };
    auto server = std::make_unique<pb_server>();
    server->api = std::make_unique<ApiServer>(factory, std::move(options));
    *out = server.release();
  });
}

pb_status pb_model_server_create(pb_engine* engine, pb_server** out) {
  return guarded([&] {
    require(engine, "engine");
    require(out, "out");
    auto server = std::make_unique<pb_server>();
    server->model = std::make_unique<ModelServer>(engine->base, engine->guide, engine->classifier);
    *out = server.release();
  });
}

pb_status pb_server_start(pb_server* server, const char* host, int port, int* bound_port) {
  return guarded([&] {
    require(server, "server");
    const std::string h = host ? host : "127.0.0.1";
    const int p = server->api ? server->api->start(h, port) : server->model->start(h, port);
    if (bound_port) *bound_port = p;
  });
}

pb_status pb_server_listen(pb_server* server, const char* host, int port) {
  return guarded([&] {
    require(server, "server");
    const std::string h = host ? host : "127.0.0.1";
    if (server->api) {
      server->api->listen(h, port);
    } else {
      server->model->listen(h, port);
    }
  });
}

pb_status pb_server_stop(pb_server* server) {
  return guarded([&] {
    require(server, "server");
    if (server->api) server->api->stop();
    if (server->model) server->model->stop();
  });
}

void pb_server_free(pb_server* server) { delete server; }

}  // extern "C"
