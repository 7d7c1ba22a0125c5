// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <condition_variable>
#include <fstream>
#include <map>
#include <mutex>
#include <random>

#include "plugblend/json_io.hpp"
#include "plugblend/server.hpp"
#include "server_common.hpp"

namespace plugblend {

using nlohmann::json;

namespace {

struct Session {
  std::string id;

  mutable std::mutex state_mu;
  SketchSet sketch;
  LinePlan plan;
  std::vector<std::string> warnings;
  Story story;
  std::uint64_t revision = 0;
  PipelineParams params;

  // Mutations run one at a time in arrival order.
  std::mutex queue_mu;
  std::condition_variable queue_cv;
  std::uint64_t next_ticket = 0;
  std::uint64_t serving = 0;
  std::atomic<int> pending_generates{0};

  std::uint64_t take_ticket() {
    std::lock_guard lock(queue_mu);
    return next_ticket++;
  }
  void wait_turn(std::uint64_t ticket) {
    std::unique_lock lock(queue_mu);
    queue_cv.wait(lock, [&] { return serving == ticket; });
  }
  void finish_turn(std::uint64_t ticket) {
    std::unique_lock lock(queue_mu);
    queue_cv.wait(lock, [&] { return serving == ticket; });
    ++serving;
    queue_cv.notify_all();
  }

  json snapshot() const {
    return {{"id", id},
            {"revision", revision},
            {"sketch", to_json(sketch)},
            {"params", to_json(params)},
            {"story", to_json(story)}};
  }
};

// Holds a session's turn from construction until destruction.
class Turn {
 public:
  Turn(Session& s, std::uint64_t ticket) : s_(s), ticket_(ticket) { s_.wait_turn(ticket_); }
  explicit Turn(Session& s) : Turn(s, s.take_ticket()) {}
  ~Turn() { s_.finish_turn(ticket_); }
  Turn(const Turn&) = delete;
  Turn& operator=(const Turn&) = delete;

 private:
  Session& s_;
  std::uint64_t ticket_;
};

json story_body(const Session& s) {
  json body = to_json(s.story);
  body["id"] = s.id;
  body["revision"] = s.revision;
  body["plan"] = to_json(s.plan);
  body["params"] = to_json(s.params);
  return body;
}

json plan_body(const Session& s) {
  return {{"id", s.id},
          {"revision", s.revision},
          {"sketch", to_json(s.sketch)},
          {"plan", to_json(s.plan)},
          {"warnings", s.warnings}};
}

}  // namespace

struct ApiServer::Impl {
  ProviderFactory factory;
  ApiOptions options;
  httplib::Server server;
  detail::ServerRunner runner{server};

  std::mutex providers_mu;
  std::optional<ProviderSet> providers_cache;

  mutable std::mutex sessions_mu;
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::mt19937_64 id_rng{std::random_device{}()};

  ProviderSet providers() {
    std::lock_guard lock(providers_mu);
    if (!providers_cache) {
      try {
        auto set = factory();
        if (!set.base || !set.guide) throw Error(Errc::ProviderUnavailable, "base and guide providers are required");
        check_compatible(*set.base, *set.guide);
        providers_cache = std::move(set);
      } catch (const Error& e) {
        throw Error(Errc::ProviderUnavailable, std::string("providers unavailable: ") + e.what());
      }
    }
    return *providers_cache;
  }

  std::shared_ptr<Session> find(const std::string& id) const {
    std::lock_guard lock(sessions_mu);
    auto it = sessions.find(id);
    if (it == sessions.end()) throw Error(Errc::NotFound, "unknown session '" + id + "'");
    return it->second;
  }

  std::string new_id() {
    std::lock_guard lock(sessions_mu);
    for (;;) {
      char buf[17];
      std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(id_rng()));
      if (!sessions.contains(buf)) return buf;
    }
  }

  // Caller holds state_mu.
  void persist(const Session& s) const {
    if (options.persist_dir.empty()) return;
    const auto path = options.persist_dir / (s.id + ".json");
    const auto tmp = options.persist_dir / (s.id + ".json.tmp");
    {
      std::ofstream out(tmp, std::ios::trunc);
      out << s.snapshot().dump(2);
      if (!out) throw Error(Errc::InvalidArgument, "cannot write snapshot " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  }

  void restore() {
    if (options.persist_dir.empty()) return;
    std::filesystem::create_directories(options.persist_dir);
    for (const auto& entry : std::filesystem::directory_iterator(options.persist_dir)) {
      if (entry.path().extension() != ".json") continue;
      std::ifstream in(entry.path());
      const auto doc = json::parse(in);
      auto s = std::make_shared<Session>();
      s->id = doc.at("id").get<std::string>();
      s->revision = doc.at("revision").get<std::uint64_t>();
      s->sketch = sketch_set_from_json(doc.at("sketch"), entry.path().string());
      s->plan = compile_plan(s->sketch, &s->warnings);
      s->params = pipeline_params_from_json(doc.at("params"), options.pipeline);
      s->story = story_from_json(doc.at("story"));
      sessions[s->id] = std::move(s);
    }
  }

  void cors(httplib::Response& res) const {
    res.set_header("Access-Control-Allow-Origin", options.cors_origin);
    res.set_header("Access-Control-Allow-Methods", "GET, POST, PATCH, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  }

  void routes();
  void generate(const httplib::Request& req, httplib::Response& res);
};

void ApiServer::Impl::routes() {
  server.set_exception_handler([this](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    cors(res);
    try {
      std::rethrow_exception(ep);
    } catch (const StoryError& e) {
      auto body = detail::error_body(e.code(), e.what());
      body["partial"] = to_json(e.partial());
      detail::reply(res, 502, body);
    } catch (const Error& e) {
      detail::reply(res, http_status_for(e.code()), detail::error_body(e.code(), e.what()));
    } catch (const std::exception& e) {
      detail::reply(res, 500, detail::error_body(Errc::InvalidArgument, e.what()));
    }
  });
  server.set_post_routing_handler([this](const httplib::Request&, httplib::Response& res) { cors(res); });
  server.Options(R"(/api/.*)", [this](const httplib::Request&, httplib::Response& res) {
    cors(res);
    res.status = 204;
  });

  server.Get("/api/topics", [this](const httplib::Request&, httplib::Response& res) {
    std::vector<std::string> codes;
    try {
      codes = providers().guide->live_codes();
    } catch (const Error& e) {
      throw Error(Errc::ProviderUnavailable, e.what());
    }
    detail::reply(res, 200, json{{"codes", codes}});
  });

  server.Post("/api/session", [this](const httplib::Request& req, httplib::Response& res) {
    const auto body = detail::parse_body(req);
    auto s = std::make_shared<Session>();
    s->sketch = sketch_set_from_json(body, "body");
    s->plan = compile_plan(s->sketch, &s->warnings);
    s->params = options.pipeline;
    if (auto p = body.find("params"); p != body.end()) s->params = pipeline_params_from_json(*p, options.pipeline);
    s->id = new_id();
    s->revision = 1;
    {
      std::lock_guard lock(s->state_mu);
      persist(*s);
    }
    const auto out = plan_body(*s);
    {
      std::lock_guard lock(sessions_mu);
      sessions[s->id] = s;
    }
    detail::reply(res, 200, out);
  });

  server.Get(R"(/api/session/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    std::lock_guard lock(s->state_mu);
    auto body = plan_body(*s);
    body["story"] = to_json(s->story);
    body["params"] = to_json(s->params);
    detail::reply(res, 200, body);
  });

  server.Patch(R"(/api/session/([^/]+)/sketch)", [this](const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    const auto body = detail::parse_body(req);
    auto sketch = sketch_set_from_json(body, "body");
    std::vector<std::string> warnings;
    auto plan = compile_plan(sketch, &warnings);
    Turn turn(*s);
    std::lock_guard lock(s->state_mu);
    s->sketch = std::move(sketch);
    s->plan = std::move(plan);
    s->warnings = std::move(warnings);
    ++s->revision;
    persist(*s);
    detail::reply(res, 200, plan_body(*s));
  });

  server.Post(R"(/api/session/([^/]+)/generate)",
              [this](const httplib::Request& req, httplib::Response& res) { generate(req, res); });

  server.Post(R"(/api/session/([^/]+)/line/(-?\d+)/regenerate)", [this](const httplib::Request& req,
                                                                          httplib::Response& res) {
    auto s = find(req.matches[1]);
    const int n = std::stoi(req.matches[2]);
    if (s->pending_generates.load() > 0) {
      throw Error(Errc::Conflict, "a full generation is in flight for session '" + s->id + "'");
    }
    Turn turn(*s);
    Story story;
    LinePlan plan;
    PipelineParams params;
    {
      std::lock_guard lock(s->state_mu);
      story = s->story;
      plan = s->plan;
      params = s->params;
    }
    if (n < 0 || static_cast<std::size_t>(n) >= plan.size()) {
      throw Error(Errc::InvalidLineIndex, "line " + std::to_string(n) + " is outside the " +
                                              std::to_string(plan.size()) + "-line plan");
    }
    if (static_cast<std::size_t>(n) >= story.lines.size()) {
      throw Error(Errc::Conflict, "line " + std::to_string(n) + " has not been generated yet");
    }
    const auto p = providers();
    Story updated;
    try {
      updated = regenerate_line(story, n, plan, *p.base, *p.guide, params);
    } catch (const Error& e) {
      if (e.code() == Errc::InvalidLineIndex) throw;
      throw StoryError(Error(Errc::ProviderUnavailable, e.what()), story);
    }
    std::lock_guard lock(s->state_mu);
    s->story = std::move(updated);
    ++s->revision;
    persist(*s);
    auto body = story_body(*s);
    body["n"] = n;
    body["line"] = to_json(s->story.lines[static_cast<std::size_t>(n)]);
    detail::reply(res, 200, body);
  });
}

void ApiServer::Impl::generate(const httplib::Request& req, httplib::Response& res) {
  auto s = find(req.matches[1]);
  const bool stream = req.has_param("stream") && req.get_param_value("stream") != "0";
  ++s->pending_generates;
  const auto ticket = s->take_ticket();

  // Runs the story under the session's turn; returns the body to send.
  auto run = [this, s, ticket](const LineCallback& on_line) -> std::pair<int, json> {
    Turn turn(*s, ticket);
    struct Done {
      Session& s;
      ~Done() { --s.pending_generates; }
    } done{*s};
    LinePlan plan;
    PipelineParams params;
    {
      std::lock_guard lock(s->state_mu);
      plan = s->plan;
      params = s->params;
    }
    Story story;
    try {
      const auto p = providers();
      story = generate_story(plan, *p.base, *p.guide, params, on_line);
    } catch (const StoryError& e) {
      auto body = detail::error_body(e.code(), e.what());
      body["partial"] = to_json(e.partial());
      return {502, body};
    } catch (const Error& e) {
      auto body = detail::error_body(e.code(), e.what());
      body["partial"] = to_json(Story{});
      return {502, body};
    }
    std::lock_guard lock(s->state_mu);
    s->story = std::move(story);
    ++s->revision;
    persist(*s);
    return {200, story_body(*s)};
  };

  if (!stream) {
    auto [status, body] = run({});
    detail::reply(res, status, body);
    return;
  }

  auto started = std::make_shared<std::atomic<bool>>(false);
  res.set_chunked_content_provider(
      "application/x-ndjson",
      [run, started](std::size_t, httplib::DataSink& sink) {
        started->store(true);
        auto [status, body] = run([&sink](const StoryLine& line) {
          const auto chunk = json{{"line", to_json(line)}}.dump() + "\n";
          sink.write(chunk.data(), chunk.size());
        });
        const auto tail = (status == 200 ? json{{"done", true}, {"story", body}} : body).dump() + "\n";
        sink.write(tail.data(), tail.size());
        sink.done();
        return true;
      },
      [s, ticket, started](bool) {
        // The provider never ran: give the turn back in order.
        if (!started->load()) {
          s->finish_turn(ticket);
          --s->pending_generates;
        }
      });
}

ApiServer::ApiServer(ProviderFactory providers, ApiOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->factory = std::move(providers);
  impl_->options = std::move(options);
  impl_->options.pipeline.validate();
  impl_->restore();
  impl_->routes();
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::start(const std::string& host, int port) { return impl_->runner.start(host, port); }
void ApiServer::listen(const std::string& host, int port) { impl_->runner.listen(host, port); }
void ApiServer::stop() { impl_->runner.stop(); }
int ApiServer::port() const noexcept { return impl_->runner.port(); }

std::size_t ApiServer::session_count() const {
  std::lock_guard lock(impl_->sessions_mu);
  return impl_->sessions.size();
}

}  // namespace plugblend
