// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <httplib.h>

#include <condition_variable>
#include <future>
#include <sstream>
#include <thread>

#include "plugblend/json_io.hpp"
#include "plugblend/server.hpp"
#include "plugblend/toy.hpp"
#include "support.hpp"

using namespace plugblend;
using namespace plugblend::test;
using nlohmann::json;

namespace {

const char* kSketch = R"({"n_lines": 10, "sigma": 1, "total_strength": 4,
  "sketches": [{"code": "Sports", "start": 0, "end": 5}, {"code": "Science", "start": 4, "end": 10}]})";

ProviderFactory toy_factory() {
  auto world = std::make_shared<ToyWorld>(make_toy_world());
  return [world] { return ProviderSet{world->base, world->guide}; };
}

struct Fixture {
  ApiServer server;
  httplib::Client client;

  explicit Fixture(ProviderFactory f, ApiOptions o = {})
      : server(std::move(f), std::move(o)), client("127.0.0.1", server.start()) {
    client.set_read_timeout(60, 0);
  }

  std::string create(const std::string& body = kSketch) {
    auto res = client.Post("/api/session", body, "application/json");
    REQUIRE(res);
    REQUIRE(res->status == 200);
    return json::parse(res->body)["id"];
  }
  json get(const std::string& id) {
    auto res = client.Get("/api/session/" + id);
    REQUIRE(res);
    REQUIRE(res->status == 200);
    return json::parse(res->body);
  }
};

// Base model that parks every call until opened.
class GateLM final : public LanguageModel {
 public:
  explicit GateLM(std::shared_ptr<const LanguageModel> inner) : inner_(std::move(inner)) {}

  std::size_t vocab_size() const override { return inner_->vocab_size(); }
  LogitVector next_logits(std::span<const TokenId> context) const override {
    std::unique_lock lock(mu_);
    entered_ = true;
    cv_.notify_all();
    cv_.wait(lock, [&] { return open_; });
    lock.unlock();
    return inner_->next_logits(context);
  }
  std::vector<TokenId> tokenize(std::string_view text) const override { return inner_->tokenize(text); }
  std::string detokenize(std::span<const TokenId> tokens) const override { return inner_->detokenize(tokens); }

  void wait_entered() const {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return entered_; });
  }
  void open() {
    std::lock_guard lock(mu_);
    open_ = true;
    cv_.notify_all();
  }

 private:
  std::shared_ptr<const LanguageModel> inner_;
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  mutable bool entered_ = false;
  bool open_ = false;
};

class CodelessGuide final : public ClassConditionalModel {
 public:
  explicit CodelessGuide(std::size_t v) : v_(v) {}
  std::size_t vocab_size() const override { return v_; }
  const std::vector<std::string>& codes() const override { return codes_; }
  LogitVector cc_next_logits(std::span<const TokenId>, std::string_view) const override {
    return LogitVector(v_, 0.0);
  }

 private:
  std::size_t v_;
  std::vector<std::string> codes_;
};

}  // namespace

TEST_CASE("creating a session returns its curves") {
  Fixture f(toy_factory());
  auto res = f.client.Post("/api/session", kSketch, "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  const auto body = json::parse(res->body);
  CHECK_FALSE(body["id"].get<std::string>().empty());
  CHECK(body["revision"] == 1);
  CHECK(body["plan"]["curves"]["Sports"].size() == 10);
  CHECK(body["plan"]["curves"]["Science"].size() == 10);
  CHECK(body["plan"]["lines"].size() == 10);
  CHECK(f.server.session_count() == 1);
}

TEST_CASE("bad sketches are rejected with 400") {
  Fixture f(toy_factory());
  for (const char* bad : {R"({"sketches": [{"code": "Sports", "start": 5, "end": 2}]})",
                          R"({"n_lines": 0, "sketches": []})", "not json"}) {
    auto res = f.client.Post("/api/session", bad, "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
    CHECK(json::parse(res->body).contains("error"));
  }
  CHECK(f.server.session_count() == 0);
}

TEST_CASE("reads leave the revision alone") {
  Fixture f(toy_factory());
  const auto id = f.create();
  const auto a = f.get(id);
  const auto b = f.get(id);
  CHECK(a["revision"] == 1);
  CHECK(a == b);
}

TEST_CASE("patching the sketch recompiles the plan without touching text") {
  Fixture f(toy_factory());
  const auto id = f.create();
  auto gen = f.client.Post("/api/session/" + id + "/generate", "", "application/json");
  REQUIRE(gen);
  REQUIRE(gen->status == 200);
  const auto before = f.get(id);

  auto same = f.client.Patch("/api/session/" + id + "/sketch", kSketch, "application/json");
  REQUIRE(same);
  CHECK(same->status == 200);
  const auto after_same = f.get(id);
  CHECK(after_same["revision"] == before["revision"].get<int>() + 1);
  CHECK(after_same["plan"] == before["plan"]);

  const char* edited = R"({"n_lines": 10, "sigma": 2, "total_strength": 4,
    "sketches": [{"code": "World", "start": 2, "end": 7}]})";
  auto res = f.client.Patch("/api/session/" + id + "/sketch", edited, "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  const auto now = f.get(id);
  CHECK(now["revision"] == before["revision"].get<int>() + 2);
  CHECK(now["plan"] == to_json(compile_plan(sketch_set_from_json(json::parse(edited)))));
  CHECK(now["story"] == before["story"]);

  auto bad = f.client.Patch("/api/session/" + id + "/sketch", R"({"n_lines": -2})", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  auto missing = f.client.Patch("/api/session/nope/sketch", kSketch, "application/json");
  REQUIRE(missing);
  CHECK(missing->status == 404);
}

TEST_CASE("generation is deterministic and matches the library") {
  Fixture f(toy_factory());
  const auto id = f.create();
  auto a = f.client.Post("/api/session/" + id + "/generate", "", "application/json");
  auto b = f.client.Post("/api/session/" + id + "/generate", "", "application/json");
  REQUIRE(a);
  REQUIRE(b);
  CHECK(a->status == 200);
  auto ja = json::parse(a->body);
  auto jb = json::parse(b->body);
  CHECK(jb["revision"] == ja["revision"].get<int>() + 1);
  ja.erase("revision");
  jb.erase("revision");
  CHECK(ja == jb);

  const auto world = make_toy_world();
  const auto story =
      generate_story(compile_plan(sketch_set_from_json(json::parse(kSketch))), *world.base, *world.guide, {});
  CHECK(ja["lines"] == to_json(story)["lines"]);
  CHECK(ja["lines"][3].contains("config"));

  auto unknown = f.client.Post("/api/session/ffff/generate", "", "application/json");
  REQUIRE(unknown);
  CHECK(unknown->status == 404);
}

TEST_CASE("streamed generation sends one line per chunk then the story") {
  Fixture f(toy_factory());
  const auto id = f.create();
  auto res = f.client.Post("/api/session/" + id + "/generate?stream=1", "", "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  std::istringstream in(res->body);
  std::vector<json> rows;
  for (std::string row; std::getline(in, row);) rows.push_back(json::parse(row));
  REQUIRE(rows.size() == 11);
  for (int n = 0; n < 10; ++n) CHECK(rows[n]["line"]["n"] == n);
  CHECK(rows[10]["done"] == true);
  const auto full = f.get(id);
  CHECK(rows[10]["story"]["lines"] == full["story"]["lines"]);
}

TEST_CASE("provider failure answers 502 with the partial story") {
  auto world = std::make_shared<ToyWorld>(make_toy_world());
  auto flaky = std::make_shared<FlakyLM>(*world->base, 30);
  Fixture f([world, flaky] { return ProviderSet{flaky, world->guide}; });
  const auto id = f.create();
  auto res = f.client.Post("/api/session/" + id + "/generate", "", "application/json");
  REQUIRE(res);
  CHECK(res->status == 502);
  const auto body = json::parse(res->body);
  CHECK(body["error"]["code"] == "ProviderUnavailable");
  CHECK(body["partial"]["lines"].size() < 10);
  CHECK(f.get(id)["revision"] == 1);

  Fixture down([]() -> ProviderSet { throw Error(Errc::ProviderUnavailable, "offline"); });
  const auto id2 = down.create();
  auto r2 = down.client.Post("/api/session/" + id2 + "/generate", "", "application/json");
  REQUIRE(r2);
  CHECK(r2->status == 502);
  CHECK(json::parse(r2->body)["partial"]["lines"].empty());
}

TEST_CASE("regenerating one line") {
  Fixture f(toy_factory());
  const auto id = f.create();
  auto early = f.client.Post("/api/session/" + id + "/line/2/regenerate", "", "application/json");
  REQUIRE(early);
  CHECK(early->status == 409);

  REQUIRE(f.client.Post("/api/session/" + id + "/generate", "", "application/json")->status == 200);
  const auto story = f.get(id)["story"];
  auto a = f.client.Post("/api/session/" + id + "/line/0/regenerate", "", "application/json");
  auto b = f.client.Post("/api/session/" + id + "/line/0/regenerate", "", "application/json");
  REQUIRE(a);
  REQUIRE(b);
  CHECK(a->status == 200);
  CHECK(json::parse(a->body)["line"]["text"] == json::parse(b->body)["line"]["text"]);
  CHECK(json::parse(a->body)["line"]["text"] == story["lines"][0]["text"]);

  // After an edit only the regenerated line changes.
  REQUIRE(f.client.Patch("/api/session/" + id + "/sketch",
                         R"({"n_lines": 10, "sigma": 50, "total_strength": 4,
                             "sketches": [{"code": "World", "start": 0, "end": 9}]})",
                         "application/json")
              ->status == 200);
  auto c = f.client.Post("/api/session/" + id + "/line/6/regenerate", "", "application/json");
  REQUIRE(c);
  CHECK(c->status == 200);
  const auto now = f.get(id)["story"];
  for (int n = 0; n < 10; ++n) {
    if (n != 6) CHECK(now["lines"][n] == story["lines"][n]);
  }
  CHECK(now["lines"][6]["text"] != story["lines"][6]["text"]);

  for (const char* n : {"10", "-1"}) {
    auto res = f.client.Post("/api/session/" + id + "/line/" + n + "/regenerate", "", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
  }
  auto missing = f.client.Post("/api/session/zzz/line/0/regenerate", "", "application/json");
  REQUIRE(missing);
  CHECK(missing->status == 404);
}

TEST_CASE("regenerate during a full generation is a conflict") {
  auto world = std::make_shared<ToyWorld>(make_toy_world());
  auto gate = std::make_shared<GateLM>(world->base);
  Fixture f([world, gate] { return ProviderSet{gate, world->guide}; });
  const auto id = f.create();
  auto pending = std::async(std::launch::async, [&] {
    httplib::Client c("127.0.0.1", f.server.port());
    c.set_read_timeout(60, 0);
    auto res = c.Post("/api/session/" + id + "/generate", "", "application/json");
    return res ? res->status : -1;
  });
  gate->wait_entered();
  auto res = f.client.Post("/api/session/" + id + "/line/1/regenerate", "", "application/json");
  REQUIRE(res);
  CHECK(res->status == 409);
  CHECK(json::parse(res->body)["error"]["code"] == "Conflict");
  gate->open();
  CHECK(pending.get() == 200);
  CHECK(f.client.Post("/api/session/" + id + "/line/1/regenerate", "", "application/json")->status == 200);
}

TEST_CASE("concurrent mutations get distinct revisions in order") {
  Fixture f(toy_factory());
  const auto id = f.create();
  std::vector<std::future<int>> revs;
  for (int i = 0; i < 6; ++i) {
    revs.push_back(std::async(std::launch::async, [&] {
      httplib::Client c("127.0.0.1", f.server.port());
      auto res = c.Patch("/api/session/" + id + "/sketch", kSketch, "application/json");
      return res && res->status == 200 ? json::parse(res->body)["revision"].get<int>() : -1;
    }));
  }
  std::vector<int> seen;
  for (auto& r : revs) seen.push_back(r.get());
  std::sort(seen.begin(), seen.end());
  CHECK(seen == std::vector<int>{2, 3, 4, 5, 6, 7});
  CHECK(f.get(id)["revision"] == 7);
}

TEST_CASE("topics come from the guide") {
  Fixture f(toy_factory());
  auto res = f.client.Get("/api/topics");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body)["codes"] == json::array({"Business", "Science", "Sports", "World"}));

  auto world = std::make_shared<ToyWorld>(make_toy_world());
  auto none = std::make_shared<CodelessGuide>(world->base->vocab_size());
  Fixture empty([world, none] { return ProviderSet{world->base, none}; });
  auto r2 = empty.client.Get("/api/topics");
  REQUIRE(r2);
  CHECK(r2->status == 200);
  CHECK(json::parse(r2->body)["codes"] == json::array());
}

TEST_CASE("an offline remote guide answers 502") {
  auto world = std::make_shared<ToyWorld>(make_toy_world());
  ModelServer models(world->base, world->guide);
  const int port = models.start();
  RemoteOptions quick;
  quick.timeout = std::chrono::milliseconds(500);
  quick.retries = 0;
  auto remote = std::make_shared<RemoteLM>("http://127.0.0.1:" + std::to_string(port), quick);
  Fixture f([world, remote] { return ProviderSet{world->base, remote}; });
  REQUIRE(f.client.Get("/api/topics")->status == 200);
  models.stop();
  auto res = f.client.Get("/api/topics");
  REQUIRE(res);
  CHECK(res->status == 502);
  CHECK(json::parse(res->body)["error"]["code"] == "ProviderUnavailable");

  Fixture never([]() -> ProviderSet { throw Error(Errc::ProviderUnavailable, "offline"); });
  CHECK(never.client.Get("/api/topics")->status == 502);
}

TEST_CASE("cors headers and preflight") {
  ApiOptions o;
  o.cors_origin = "http://localhost:5173";
  Fixture f(toy_factory(), o);
  auto pre = f.client.Options("/api/session");
  REQUIRE(pre);
  CHECK(pre->status == 204);
  CHECK(pre->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");
  CHECK(pre->get_header_value("Access-Control-Allow-Methods").find("PATCH") != std::string::npos);
  auto res = f.client.Get("/api/session/none");
  REQUIRE(res);
  CHECK(res->status == 404);
  CHECK(res->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");
}

TEST_CASE("sessions survive a restart with a snapshot directory") {
  TempDir dir;
  ApiOptions o;
  o.persist_dir = dir.path() / "sessions";
  std::string id;
  json before;
  {
    Fixture f(toy_factory(), o);
    id = f.create();
    REQUIRE(f.client.Post("/api/session/" + id + "/generate", "", "application/json")->status == 200);
    before = f.get(id);
  }
  Fixture g(toy_factory(), o);
  CHECK(g.server.session_count() == 1);
  CHECK(g.get(id) == before);
}

TEST_CASE("status mapping") {
  CHECK(http_status_for(Errc::NotFound) == 404);
  CHECK(http_status_for(Errc::Conflict) == 409);
  CHECK(http_status_for(Errc::ProviderUnavailable) == 502);
  CHECK(http_status_for(Errc::InvalidSketch) == 400);
  CHECK(http_status_for(Errc::InvalidLineIndex) == 400);
}
