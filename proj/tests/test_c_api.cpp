// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>
#include <string>

#include "plugblend.h"

using nlohmann::json;

namespace {

const std::string kData = PLUGBLEND_DATA_DIR;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Out {
  char* p = nullptr;
  ~Out() { pb_string_free(p); }
  json parse() const { return json::parse(p); }
};

struct Engine {
  pb_engine* e = nullptr;
  Engine() {
    const auto s = pb_engine_create((kData + "/base.json").c_str(), (kData + "/guide.json").c_str(),
                                    (kData + "/lexicons.json").c_str(), &e);
    REQUIRE(s == PB_OK);
  }
  ~Engine() { pb_engine_free(e); }
};

}  // namespace

TEST_CASE("status names and version") {
  CHECK(std::string(pb_status_name(PB_OK)) == "OK");
  CHECK(std::string(pb_status_name(PB_ERR_INVALID_SKETCH)) == "InvalidSketch");
  CHECK(std::string(pb_status_name(PB_ERR_CONFLICT)) == "Conflict");
  CHECK(std::string(pb_status_name(static_cast<pb_status>(77))) == "Unknown");
  CHECK(std::string(pb_version()).size() > 0);
  CHECK(pb_last_error() != nullptr);
}

TEST_CASE("engine creation failures") {
  pb_engine* e = nullptr;
  CHECK(pb_engine_create(nullptr, "x", nullptr, &e) == PB_ERR_INVALID_ARGUMENT);
  CHECK(std::string(pb_last_error()).size() > 0);
  CHECK(pb_engine_create("/no/such/file.json", (kData + "/guide.json").c_str(), nullptr, &e) ==
        PB_ERR_MODEL_FILE_INVALID);
  CHECK(e == nullptr);
  CHECK(pb_engine_create("http://127.0.0.1:1", (kData + "/guide.json").c_str(), nullptr, &e) ==
        PB_ERR_PROVIDER_UNAVAILABLE);
  pb_engine_free(nullptr);
}

TEST_CASE("plan compilation") {
  Out out;
  REQUIRE(pb_plan_compile(slurp(kData + "/sports_science_1.json").c_str(), &out.p) == PB_OK);
  const auto doc = out.parse();
  CHECK(doc["plan"]["lines"].size() == 10);
  CHECK(doc["weights"].size() == 10);
  CHECK(doc["warnings"].size() == 1);

  Out bad;
  CHECK(pb_plan_compile(R"({"sketches": [{"code": "A", "start": 3, "end": 1}]})", &bad.p) == PB_ERR_INVALID_SKETCH);
  CHECK(bad.p == nullptr);
  CHECK(pb_plan_compile("{", &bad.p) == PB_ERR_INVALID_ARGUMENT);
  CHECK(pb_plan_compile(nullptr, &bad.p) == PB_ERR_INVALID_ARGUMENT);
}

TEST_CASE("codes and stories through the engine") {
  Engine eng;
  Out codes;
  REQUIRE(pb_engine_codes(eng.e, &codes.p) == PB_OK);
  CHECK(codes.parse()["codes"] == json::array({"Business", "Science", "Sports", "World"}));

  const auto sketch = slurp(kData + "/sports_science_1.json");
  Out a, b;
  REQUIRE(pb_generate_story(eng.e, sketch.c_str(), nullptr, &a.p) == PB_OK);
  REQUIRE(pb_generate_story(eng.e, sketch.c_str(), nullptr, &b.p) == PB_OK);
  CHECK(std::string(a.p) == std::string(b.p));
  CHECK(a.parse()["lines"].size() == 10);

  Out c;
  REQUIRE(pb_generate_story(eng.e, sketch.c_str(), R"({"best_of": [1, 2]})", &c.p) == PB_OK);
  CHECK(c.parse()["lines"][3].contains("best_of"));
  Out d;
  CHECK(pb_generate_story(eng.e, sketch.c_str(), R"({"context_window": 0})", &d.p) == PB_ERR_INVALID_ARGUMENT);
  CHECK(pb_generate_story(nullptr, sketch.c_str(), nullptr, &d.p) == PB_ERR_INVALID_ARGUMENT);
}

TEST_CASE("sweep, perplexity and baseline requests") {
  Engine eng;
  const json req = {{"prompts", {"the day", "he walked"}},
                    {"pairs", {"Sports:Science"}},
                    {"multipliers", {0.0, 2.0}},
                    {"unit_strength", 4.0},
                    {"jobs", 2}};
  Out sweep;
  REQUIRE(pb_sweep(eng.e, req.dump().c_str(), &sweep.p) == PB_OK);
  const auto doc = sweep.parse();
  CHECK(doc["cells"].size() == 2);
  CHECK(doc["csv"].get<std::string>().find("Sports") != std::string::npos);
  CHECK(doc["svg"].get<std::string>().rfind("<svg", 0) == 0);

  Out ppl;
  REQUIRE(pb_eval_ppl(eng.e, req.dump().c_str(), &ppl.p) == PB_OK);
  const auto rows = ppl.parse()["rows"];
  REQUIRE(rows.size() == 2);
  CHECK(rows[1]["mean_perplexity"].get<double>() >= rows[0]["mean_perplexity"].get<double>());

  Out none;
  CHECK(pb_sweep(eng.e, R"({"prompts": []})", &none.p) == PB_ERR_INSUFFICIENT_DATA);
  CHECK(pb_sweep(eng.e, R"({"prompts": ["a"], "pairs": ["Sports:Cooking"]})", &none.p) ==
        PB_ERR_UNKNOWN_CONTROL_CODE);

  const json base = {{"corpus_text", slurp(kData + "/stories.txt")}, {"pair", "Sports:Science"}, {"seed", 3}};
  Out bl;
  REQUIRE(pb_shuffled_baseline(eng.e, base.dump().c_str(), &bl.p) == PB_OK);
  CHECK(std::abs(bl.parse()["mean_tau_a"].get<double>()) < 0.1);
  CHECK(pb_shuffled_baseline(eng.e, R"({"corpus_text": "", "pair": "Sports:Science"})", &none.p) ==
        PB_ERR_INSUFFICIENT_DATA);
}

TEST_CASE("servers through the C API") {
  pb_server* api = nullptr;
  REQUIRE(pb_api_server_create((kData + "/base.json").c_str(), (kData + "/guide.json").c_str(), nullptr, &api) ==
          PB_OK);
  int port = 0;
  REQUIRE(pb_server_start(api, "127.0.0.1", 0, &port) == PB_OK);
  CHECK(port > 0);
  {
    httplib::Client c("127.0.0.1", port);
    auto res = c.Get("/api/topics");
    REQUIRE(res);
    CHECK(res->status == 200);
  }
  CHECK(pb_server_stop(api) == PB_OK);
  pb_server_free(api);

  Engine eng;
  pb_server* model = nullptr;
  REQUIRE(pb_model_server_create(eng.e, &model) == PB_OK);
  REQUIRE(pb_server_start(model, "127.0.0.1", 0, &port) == PB_OK);
  pb_engine* remote = nullptr;
  const auto url = "http://127.0.0.1:" + std::to_string(port);
  REQUIRE(pb_engine_create(url.c_str(), url.c_str(), nullptr, &remote) == PB_OK);
  Out local_story, remote_story;
  const auto sketch = slurp(kData + "/sports_science_1.json");
  REQUIRE(pb_generate_story(eng.e, sketch.c_str(), nullptr, &local_story.p) == PB_OK);
  REQUIRE(pb_generate_story(remote, sketch.c_str(), nullptr, &remote_story.p) == PB_OK);
  CHECK(local_story.parse()["lines"] == remote_story.parse()["lines"]);

  pb_server_stop(model);
  Out partial;
  CHECK(pb_generate_story(remote, sketch.c_str(), nullptr, &partial.p) == PB_ERR_PROVIDER_UNAVAILABLE);
  REQUIRE(partial.p != nullptr);
  CHECK(partial.parse()["error"]["code"] == "ProviderUnavailable");
  pb_engine_free(remote);
  pb_server_free(model);

  CHECK(pb_server_start(nullptr, "127.0.0.1", 0, &port) == PB_ERR_INVALID_ARGUMENT);
}
