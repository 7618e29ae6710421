#include <doctest.h>

#include "defamekit/config.hpp"
#include "defamekit/errors.hpp"
#include "defamekit/game.hpp"
#include "unit/fixtures.hpp"

using namespace defamekit;
using nlohmann::json;

TEST_SUITE("config") {

TEST_CASE("sample app config loads with paths relative to its file") {
  const auto c = load_app_config(fixtures::data("app_config.json"));
  CHECK(c.backend.kind == "mock");
  CHECK(c.backend.mock.model_id == "mock-16bit");
  CHECK(c.judge.kind == "rules");
  REQUIRE(c.judge.rulebook);
  CHECK(c.judge.rulebook->intel_keywords.count("failure") == 1);
  CHECK(c.retry.max_attempts == 10);
  CHECK(c.retry.time_budget_ms == 5000);
  CHECK(conflict_from_json(c.conflict).player.profile.name == "John Kantakouzenos");
  CHECK(c.sessions_dir.find("sessions") != std::string::npos);
  CHECK(make_judge_suite(c.judge).criteria.size() == 7);
  CHECK(make_backend(c.backend)->model_id() == "mock-16bit");
}

TEST_CASE("config errors") {
  json j = read_json_file(fixtures::data("app_config.json"));
  const std::string base = fixtures::data("");
  SUBCASE("unknown backend") {
    j["backend"]["kind"] = "gpu";
    CHECK_THROWS_AS(app_config_from_json(j, base), ConfigError);
  }
  SUBCASE("missing rulebook file") {
    j["judge"]["rulebook"] = "nope.json";
    CHECK_THROWS_AS(app_config_from_json(j, base), ConfigError);
  }
  SUBCASE("port out of range") {
    j["port"] = 70000;
    CHECK_THROWS_AS(app_config_from_json(j, base), ConfigError);
  }
  SUBCASE("bad retry") {
    j["retry"]["max_attempts"] = 0;
    CHECK_THROWS_AS(app_config_from_json(j, base), ConfigError);
  }
  SUBCASE("no conflict") {
    j.erase("conflict");
    CHECK_THROWS_AS(app_config_from_json(j, base), ConfigError);
  }
  SUBCASE("inline conflict with a rule override") {
    j["conflict"] = read_json_file(fixtures::data("conflict.json"));
    j["rule"] = {{"intel_weight", 20}};
    const auto c = app_config_from_json(j, base);
    CHECK(conflict_from_json(c.conflict).rule.intel_weight == 20);
  }
  SUBCASE("remote judge needs an endpoint") {
    j["judge"] = {{"kind", "remote"}};
    CHECK_THROWS_AS(app_config_from_json(j, base), ConfigError);
  }
  CHECK_THROWS_AS(load_app_config(fixtures::data("missing.json")), ConfigError);
}

TEST_CASE("file helpers") {
  fixtures::TempDir dir("config_files");
  const auto path = dir.file("deep/nested/out.txt");
  write_text_file(path, "hello");
  CHECK(read_text_file(path) == "hello");
  write_text_file(dir.file("x.json"), "{not json");
  CHECK_THROWS_AS(read_json_file(dir.file("x.json")), ConfigError);
  CHECK_THROWS_AS(read_text_file(dir.file("none.txt")), IoError);
}

}  // TEST_SUITE
