#include <doctest.h>

#include <httplib.h>

#include "defamekit/errors.hpp"
#include "defamekit/service.hpp"
#include "unit/fixtures.hpp"

using namespace defamekit;
using nlohmann::json;

namespace {

AppConfig config_in(const fixtures::TempDir& dir) {
  auto c = load_app_config(fixtures::data("app_config.json"));
  c.sessions_dir = dir.file("sessions");
  c.backend.mock.pass_probability = 1.0;
  return c;
}

json post(Service& s, const std::string& path, const json& body, int expect) {
  const auto r = s.handle("POST", path, body.dump());
  CHECK_MESSAGE(r.status == expect, r.body.dump());
  return r.body;
}

json get(Service& s, const std::string& path, int expect = 200) {
  const auto r = s.handle("GET", path, "");
  CHECK_MESSAGE(r.status == expect, r.body.dump());
  return r.body;
}

json launch(const std::string& id) {
  return {{"type", "launch_campaign"}, {"intel_ids", {id}}, {"audience", "soldiers"}, {"angle", "bad family lineage"}};
}

}  // namespace

TEST_SUITE("service") {

TEST_CASE("session lifecycle through the route handler") {
  fixtures::TempDir dir("service_flow");
  Service svc(config_in(dir));
  const auto created = post(svc, "/api/session", json::object(), 201);
  const std::string sid = created["session_id"];
  CHECK(sid == "s000001");
  CHECK(created["state"]["status"] == "ongoing");
  CHECK(created["state"]["legal_actions"].size() == 2);
  const std::string base = "/api/session/" + sid;

  // Collect is applied at once; the opponent also collects (it holds no intel).
  const auto collected = post(svc, base + "/action", {{"type", "collect_intel"}}, 200);
  CHECK(collected["events"].size() == 2);
  CHECK(collected["state"]["turn"] == "player");
  const std::string intel = collected["events"][0]["collected_id"];

  // Launching returns a job; the worker also plays the opponent's reply.
  const auto accepted = post(svc, base + "/action", {{"action", launch(intel)}}, 202);
  const std::string job = accepted["job_id"];
  svc.drain(sid);
  const auto done = get(svc, base + "/job/" + job);
  CHECK(done["status"] == "done");
  REQUIRE(done["events"].size() == 2);
  CHECK(done["events"][0]["actor"] == "player");
  CHECK(done["events"][0]["target_delta"] == -15);
  CHECK(done["events"][0]["opponent_score"] == 35);
  CHECK_FALSE(done["record"].is_null());

  const auto posters = get(svc, base + "/posters");
  CHECK(posters["posters"].size() >= 1);
  CHECK(posters["posters"][0]["poster"]["signature"] == "John Kantakouzenos");

  const auto state = get(svc, base + "/state");
  CHECK(state["busy"] == false);
  CHECK(state["turn_count"] == 4);
}

TEST_CASE("error statuses") {
  fixtures::TempDir dir("service_errors");
  Service svc(config_in(dir));
  const std::string sid = post(svc, "/api/session", json::object(), 201)["session_id"];
  const std::string base = "/api/session/" + sid;
  get(svc, "/api/session/s999999/state", 404);
  get(svc, base + "/job/j000042", 404);
  get(svc, "/api/nothing", 404);
  post(svc, base + "/action", {{"type", "dance"}}, 400);
  post(svc, base + "/action", launch("f-failure"), 400);
  CHECK(svc.handle("POST", base + "/action", "{broken").status == 400);
  CHECK(svc.handle("GET", "/api/session", "").status == 405);
  CHECK(svc.handle("GET", base + "/action", "").status == 405);
  CHECK(svc.handle("POST", base + "/state", "{}").status == 405);
}

TEST_CASE("terminal and busy sessions answer 409") {
  fixtures::TempDir dir("service_409");
  auto cfg = config_in(dir);
  cfg.conflict["initial_scores"] = {{"player", 50}, {"opponent", 10}};
  Service svc(cfg);
  const std::string sid = post(svc, "/api/session", json::object(), 201)["session_id"];
  const std::string base = "/api/session/" + sid;
  std::string intel = post(svc, base + "/action", {{"type", "collect_intel"}}, 200)["events"][0]["collected_id"];
  post(svc, base + "/action", launch(intel), 202);
  // The job may still be queued; either way a second move must not start.
  const auto second = svc.handle("POST", base + "/action", json{{"type", "pass"}}.dump());
  CHECK(second.status == 409);
  svc.drain(sid);
  CHECK(get(svc, base + "/state")["status"] == "player_won");
  post(svc, base + "/action", {{"type", "pass"}}, 409);
  const auto brief = brief_to_json(fixtures::appendix_brief());
  post(svc, "/api/preview", {{"brief", brief}, {"session_id", sid}}, 409);
}

TEST_CASE("preview generates without touching sessions") {
  fixtures::TempDir dir("service_preview");
  Service svc(config_in(dir));
  const auto brief = brief_to_json(fixtures::appendix_brief());
  const auto r = post(svc, "/api/preview", {{"brief", brief}, {"seed", 3}}, 200);
  CHECK(r["outcome"] == "success");
  CHECK(r["poster"]["signature"] == "John Kantakouzenos");
  CHECK(r["judge"]["verdict"] == 1);
  json bad = brief;
  bad["intelligence"] = json::object();
  const auto invalid = post(svc, "/api/preview", {{"brief", bad}}, 400);
  CHECK_FALSE(invalid["violations"].empty());
  post(svc, "/api/preview", {{"brief", {{"sender", 1}}}}, 400);
}

TEST_CASE("sessions persist across restarts") {
  fixtures::TempDir dir("service_persist");
  std::string sid;
  json before;
  {
    Service svc(config_in(dir));
    sid = post(svc, "/api/session", json::object(), 201)["session_id"];
    post(svc, "/api/session/" + sid + "/action", {{"type", "collect_intel"}}, 200);
    before = get(svc, "/api/session/" + sid + "/state");
  }
  Service again(config_in(dir));
  const auto after = get(again, "/api/session/" + sid + "/state");
  CHECK(after == before);
  CHECK(post(again, "/api/session", json::object(), 201)["session_id"] == "s000002");
}

TEST_CASE("http layer serves the same routes") {
  fixtures::TempDir dir("service_http");
  Service svc(config_in(dir));
  const int port = svc.start("127.0.0.1", 0);
  REQUIRE(port > 0);
  httplib::Client cli("127.0.0.1", port);
  auto res = cli.Post("/api/session", "{}", "application/json");
  REQUIRE(res);
  CHECK(res->status == 201);
  const std::string sid = json::parse(res->body)["session_id"];
  auto st = cli.Get("/api/session/" + sid + "/state");
  REQUIRE(st);
  CHECK(st->status == 200);
  CHECK(json::parse(st->body)["player"]["score"] == 50);
  auto missing = cli.Get("/api/session/zzz/state");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  svc.stop();
}

}  // TEST_SUITE
