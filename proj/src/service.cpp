#include "defamekit/service.hpp"

#include <algorithm>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include <httplib.h>

#include "defamekit/clock.hpp"
#include "defamekit/errors.hpp"
#include "defamekit/game.hpp"
#include "defamekit/rng.hpp"

namespace defamekit {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(JobStatus s) {
  switch (s) {
    case JobStatus::pending: return "pending";
    case JobStatus::running: return "running";
    case JobStatus::done: return "done";
    case JobStatus::failed: return "failed";
  }
  return "pending";
}

namespace {

struct HttpError {
  int status;
  std::string message;
};

std::string numbered(char prefix, int n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%06d", prefix, n);
  return buf;
}

// Keeps the last record so jobs can report attempts and timing.
class RecordingRunner : public CampaignRunner {
 public:
  explicit RecordingRunner(CampaignRunner& inner) : inner_(inner) {}
  GenerationRecord run(const CampaignBrief& brief, std::uint64_t seed) override {
    auto rec = inner_.run(brief, seed);
    last = rec;
    return rec;
  }
  std::optional<GenerationRecord> last;

 private:
  CampaignRunner& inner_;
};

struct Job {
  std::string id;
  std::string session_id;
  JobStatus status = JobStatus::pending;
  std::optional<GenerationRecord> record;
  std::vector<TurnEvent> events;
  std::string error;
};

json job_to_json(const Job& j) {
  json out{{"job_id", j.id}, {"session_id", j.session_id}, {"status", to_string(j.status)}};
  json events = json::array();
  for (const auto& e : j.events) events.push_back(turn_event_to_json(e));
  out["events"] = events;
  out["record"] = j.record ? generation_record_to_json(*j.record) : json();
  if (!j.error.empty()) out["error"] = j.error;
  return out;
}

std::uint64_t opponent_seed(const ConflictState& s) { return derive_seed({s.seed, fnv1a64("opponent")}); }

}  // namespace

struct Service::Impl {
  struct Session {
    std::string id;
    std::mutex mu;
    std::condition_variable cv;
    ConflictState state;
    std::map<std::string, Job> jobs;
    int job_counter = 0;
    std::size_t outstanding = 0;
    std::deque<std::function<void()>> queue;
    std::unique_ptr<GeneratorBackend> backend;
    std::unique_ptr<RuntimeCampaignRunner> runner;
    std::jthread worker;
  };

  AppConfig config;
  JudgeSuite suite;
  SteadyClock clock;
  std::mutex mu;
  std::map<std::string, std::unique_ptr<Session>> sessions;
  int session_counter = 0;
  std::mutex preview_mu;
  std::unique_ptr<GeneratorBackend> preview_backend;
  httplib::Server server;
  std::jthread server_thread;

  explicit Impl(AppConfig c) : config(std::move(c)), suite(make_judge_suite(config.judge)) {
    preview_backend = make_backend(config.backend);
    restore();
  }

  ~Impl() {
    server.stop();
    std::lock_guard lock(mu);
    for (auto& [id, s] : sessions) {
      std::lock_guard session_lock(s->mu);
      s->worker.request_stop();
      s->cv.notify_all();
    }
  }

  Session& open_session(std::string id, ConflictState state) {
    auto s = std::make_unique<Session>();
    s->id = id;
    s->state = std::move(state);
    s->backend = make_backend(config.backend);
    s->runner = std::make_unique<RuntimeCampaignRunner>(*s->backend, suite, config.sampling, config.retry, clock);
    Session* raw = s.get();
    s->worker = std::jthread([raw](std::stop_token st) { worker_loop(*raw, st); });
    auto& slot = sessions[id];
    slot = std::move(s);
    return *slot;
  }

  static void worker_loop(Session& s, std::stop_token st) {
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock lock(s.mu);
        s.cv.wait(lock, [&] { return st.stop_requested() || !s.queue.empty(); });
        if (s.queue.empty()) return;
        task = std::move(s.queue.front());
        s.queue.pop_front();
      }
      task();
      {
        std::lock_guard lock(s.mu);
        --s.outstanding;
      }
      s.cv.notify_all();
    }
  }

  void persist(const Session& s) {
    if (config.sessions_dir.empty()) return;
    json snap{{"session_id", s.id}, {"job_counter", s.job_counter}, {"state", conflict_to_json(s.state)}};
    write_text_file((fs::path(config.sessions_dir) / (s.id + ".json")).string(), snap.dump(2) + "\n");
  }

  void restore() {
    if (config.sessions_dir.empty() || !fs::is_directory(config.sessions_dir)) return;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(config.sessions_dir))
      if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
      const json snap = read_json_file(p.string());
      const std::string id = snap.at("session_id").get<std::string>();
      auto& s = open_session(id, conflict_snapshot_from_json(snap.at("state")));
      s.job_counter = snap.value("job_counter", 0);
      if (id.size() > 1 && id[0] == 's') session_counter = std::max(session_counter, std::atoi(id.c_str() + 1));
    }
  }

  Session& find(const std::string& id) {
    std::lock_guard lock(mu);
    auto it = sessions.find(id);
    if (it == sessions.end()) throw HttpError{404, "unknown session: " + id};
    return *it->second;
  }

  static json state_json(const Session& s) {
    json j = conflict_to_json(s.state);
    json legal = json::array();
    for (const auto& a : legal_actions(s.state)) legal.push_back(action_to_json(a));
    j["legal_actions"] = legal;
    j["session_id"] = s.id;
    j["busy"] = s.outstanding > 0;
    return j;
  }

  // Caller holds s.mu.
  std::string enqueue_turns(Session& s, std::optional<Action> player_action) {
    const std::string job_id = numbered('j', ++s.job_counter);
    Job job;
    job.id = job_id;
    job.session_id = s.id;
    s.jobs[job_id] = job;
    ++s.outstanding;
    s.queue.push_back([this, &s, job_id, player_action] { run_job(s, job_id, player_action); });
    s.cv.notify_all();
    return job_id;
  }

  void run_job(Session& s, const std::string& job_id, std::optional<Action> player_action) {
    ConflictState state;
    {
      std::lock_guard lock(s.mu);
      s.jobs[job_id].status = JobStatus::running;
      state = s.state;
    }
    RecordingRunner runner(*s.runner);
    std::vector<TurnEvent> events;
    std::string error;
    try {
      if (player_action) {
        auto [next, ev] = apply_action(state, *player_action, runner);
        state = std::move(next);
        events.push_back(std::move(ev));
      }
      if (state.status == Status::ongoing && state.turn == Side::opponent) {
        auto [next, ev] = opponent_turn(state, opponent_seed(state), runner);
        state = std::move(next);
        events.push_back(std::move(ev));
      }
    } catch (const std::exception& e) {
      error = e.what();
    }
    std::lock_guard lock(s.mu);
    Job& job = s.jobs[job_id];
    job.record = runner.last;
    if (!error.empty()) {
      job.status = JobStatus::failed;
      job.error = error;
      return;
    }
    s.state = std::move(state);
    job.events = std::move(events);
    job.status = JobStatus::done;
    persist(s);
  }

  ServiceResponse create_session(const json& body) {
    ConflictState state = conflict_from_json(config.conflict);
    if (body.is_object() && body.contains("seed")) state.seed = body.at("seed").get<std::uint64_t>();
    std::string id;
    Session* s;
    {
      std::lock_guard lock(mu);
      id = numbered('s', ++session_counter);
      s = &open_session(id, std::move(state));
    }
    std::lock_guard lock(s->mu);
    persist(*s);
    json out{{"session_id", id}, {"state", state_json(*s)}};
    if (s->state.turn == Side::opponent && s->state.status == Status::ongoing) out["job_id"] = enqueue_turns(*s, std::nullopt);
    return {201, out};
  }

  ServiceResponse post_action(Session& s, const json& body) {
    Action action;
    try {
      action = action_from_json(body.contains("action") ? body.at("action") : body);
    } catch (const IllegalAction& e) {
      throw HttpError{400, e.what()};
    }
    std::lock_guard lock(s.mu);
    if (s.state.status != Status::ongoing) throw HttpError{409, "session is over: " + std::string(to_string(s.state.status))};
    if (s.outstanding > 0) throw HttpError{409, "a job is still running for this session"};
    if (s.state.turn != Side::player) throw HttpError{409, "not the player's turn"};
    if (!is_legal(s.state, action)) throw HttpError{400, "illegal action: " + action_to_json(action).dump()};

    if (std::holds_alternative<LaunchCampaign>(action)) {
      const auto job_id = enqueue_turns(s, action);
      return {202, {{"job_id", job_id}, {"status", "pending"}}};
    }
    // Collect and pass never generate; apply them now.
    RecordingRunner unused(*s.runner);
    auto [next, ev] = apply_action(s.state, action, unused);
    s.state = std::move(next);
    json events = json::array({turn_event_to_json(ev)});
    json out;
    if (s.state.status == Status::ongoing && s.state.turn == Side::opponent) {
      const Action reply = choose_opponent_action(s.state);
      if (std::holds_alternative<LaunchCampaign>(reply)) {
        persist(s);
        out["job_id"] = enqueue_turns(s, std::nullopt);
      } else {
        auto [after, oev] = opponent_turn(s.state, opponent_seed(s.state), unused);
        s.state = std::move(after);
        events.push_back(turn_event_to_json(oev));
      }
    }
    persist(s);
    out["events"] = events;
    out["state"] = state_json(s);
    return {200, out};
  }

  ServiceResponse posters(Session& s) {
    std::lock_guard lock(s.mu);
    json list = json::array();
    for (const auto& e : s.state.history) {
      if (!e.poster) continue;
      list.push_back({{"turn", e.turn},
                      {"actor", to_string(e.actor)},
                      {"poster", poster_to_json(*e.poster)},
                      {"fallback", e.fallback},
                      {"attempts", e.attempts},
                      {"outcome", e.outcome}});
    }
    return {200, {{"session_id", s.id}, {"posters", list}}};
  }

  ServiceResponse preview(const json& body) {
    if (!body.is_object()) throw HttpError{400, "preview needs a JSON object"};
    if (body.contains("session_id")) {
      Session& s = find(body.at("session_id").get<std::string>());
      std::lock_guard lock(s.mu);
      if (s.state.status != Status::ongoing) throw HttpError{409, "session is over"};
    }
    CampaignBrief brief;
    try {
      brief = brief_from_json(body.contains("brief") ? body.at("brief") : body);
    } catch (const std::exception& e) {
      throw HttpError{400, e.what()};
    }
    const auto report = validate_brief(brief);
    if (!report.ok()) {
      json v = report.violations;
      return {400, {{"error", "invalid brief"}, {"violations", v}}};
    }
    SamplingConfig sampling = config.sampling;
    sampling.seed = body.value("seed", std::uint64_t{0});
    std::lock_guard lock(preview_mu);
    EpisodeOptions opts;
    opts.prompt_id = "preview";
    if (!preview_backend->loaded()) {
      try {
        opts.prep_ms = preview_backend->load();
      } catch (const std::exception& e) {
        throw HttpError{502, e.what()};
      }
    }
    auto rec = generate_until_success(*preview_backend, brief, sampling, suite, config.retry, clock, opts);
    json out{{"record", generation_record_to_json(rec)}, {"outcome", to_string(rec.outcome)},
             {"attempts", rec.attempts.size()}};
    out["poster"] = rec.poster ? poster_to_json(*rec.poster) : json();
    out["judge"] = json();
    for (auto it = rec.attempts.rbegin(); it != rec.attempts.rend(); ++it)
      if (it->judge) {
        out["judge"] = judge_result_to_json(*it->judge);
        break;
      }
    return {rec.outcome == Outcome::backend_error ? 502 : 200, out};
  }

  ServiceResponse route(const std::string& method, const std::string& path, const std::string& body_text) {
    std::vector<std::string> parts;
    std::size_t i = 0;
    while (i < path.size()) {
      const auto j = path.find('/', i);
      const auto end = j == std::string::npos ? path.size() : j;
      if (end > i) parts.push_back(path.substr(i, end - i));
      i = end + 1;
    }
    json body = json::object();
    if (method == "POST" && !body_text.empty()) {
      body = json::parse(body_text, nullptr, false);
      if (body.is_discarded()) throw HttpError{400, "request body is not valid JSON"};
    }
    const auto n = parts.size();
    if (n < 2 || parts[0] != "api") throw HttpError{404, "not found: " + path};
    if (parts[1] == "preview" && n == 2) {
      if (method != "POST") throw HttpError{405, "use POST"};
      return preview(body);
    }
    if (parts[1] != "session") throw HttpError{404, "not found: " + path};
    if (n == 2) {
      if (method != "POST") throw HttpError{405, "use POST"};
      return create_session(body);
    }
    Session& s = find(parts[2]);
    if (n == 4 && parts[3] == "state" && method == "GET") {
      std::lock_guard lock(s.mu);
      return {200, state_json(s)};
    }
    if (n == 4 && parts[3] == "action" && method == "POST") return post_action(s, body);
    if (n == 4 && parts[3] == "posters" && method == "GET") return posters(s);
    if (n == 5 && parts[3] == "job" && method == "GET") {
      std::lock_guard lock(s.mu);
      auto it = s.jobs.find(parts[4]);
      if (it == s.jobs.end()) throw HttpError{404, "unknown job: " + parts[4]};
      json out = job_to_json(it->second);
      if (it->second.status == JobStatus::done || it->second.status == JobStatus::failed) out["state"] = state_json(s);
      return {200, out};
    }
    if (n == 4 && (parts[3] == "state" || parts[3] == "posters")) throw HttpError{405, "use GET"};
    if (n == 4 && parts[3] == "action") throw HttpError{405, "use POST"};
    throw HttpError{404, "not found: " + method + " " + path};
  }
};

Service::Service(AppConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Service::~Service() { stop(); }

ServiceResponse Service::handle(const std::string& method, const std::string& path, const std::string& body) {
  try {
    return impl_->route(method, path, body);
  } catch (const HttpError& e) {
    return {e.status, {{"error", e.message}}};
  } catch (const IllegalAction& e) {
    return {400, {{"error", e.what()}}};
  } catch (const std::exception& e) {
    return {500, {{"error", e.what()}}};
  }
}

void Service::drain(const std::string& session_id) {
  auto& s = impl_->find(session_id);
  std::unique_lock lock(s.mu);
  s.cv.wait(lock, [&] { return s.outstanding == 0; });
}

namespace {

void install_routes(httplib::Server& svr, Service& service, const std::string& static_dir) {
  auto handler = [&service](const httplib::Request& req, httplib::Response& res) {
    auto r = service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  svr.Get(R"(/api/.*)", handler);
  svr.Post(R"(/api/.*)", handler);
  if (!static_dir.empty()) svr.set_mount_point("/", static_dir);
}

}  // namespace

int Service::start(const std::string& host, int port) {
  install_routes(impl_->server, *this, impl_->config.static_dir);
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port) + " (port in use?)");
  impl_->server_thread = std::jthread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void Service::run(const std::string& host, int port) {
  install_routes(impl_->server, *this, impl_->config.static_dir);
  if (!impl_->server.bind_to_port(host, port))
    throw ConfigError("cannot bind " + host + ":" + std::to_string(port) + " (port in use?)");
  impl_->server.listen_after_bind();
}

void Service::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->server_thread.joinable()) impl_->server_thread.join();
}

}  // namespace defamekit
