#include <doctest.h>

#include <random>
#include <set>

#include "defamekit/errors.hpp"
#include "defamekit/runtime.hpp"
#include "unit/fixtures.hpp"

using namespace defamekit;
using nlohmann::json;

namespace {

JudgeSuite rules() {
  return make_rule_suite(std::make_shared<const Rulebook>(load_rulebook(fixtures::data("rulebook.json"))));
}

MockConfig timed(double overhead_ms) {
  MockConfig c;
  c.overhead_ms = overhead_ms;
  return c;
}

}  // namespace

TEST_SUITE("runtime") {

TEST_CASE("structural validation requires the sender's signature") {
  auto brief = fixtures::appendix_brief();
  CHECK(structural_validate(brief, fixtures::poster("gold")).pass);
  brief.sender.name = "Someone Else";
  const auto r = structural_validate(brief, fixtures::poster("gold"));
  CHECK_FALSE(r.pass);
  REQUIRE(r.failures.size() == 1);
  CHECK(r.failures[0].section == "signature");
  CHECK_FALSE(structural_validate(brief, "").pass);
}

TEST_CASE("first verdict-1 attempt ends the episode") {
  const auto brief = fixtures::appendix_brief();
  auto c = timed(100);
  c.pass_pattern = {false, false, true};
  VirtualClock clock;
  MockBackend m(c, &clock);
  m.load();
  const auto r = generate_until_success(m, brief, {}, rules(), {}, clock);
  CHECK(r.outcome == Outcome::success);
  CHECK(r.attempts.size() == 3);
  CHECK(r.attempts[0].verdict == 0);
  CHECK(r.attempts[2].verdict == 1);
  REQUIRE(r.poster);
  CHECK(r.poster->signature == brief.sender.name);
  CHECK(r.timing.per_attempt_ms == std::vector<double>{100, 100, 100});
}

TEST_CASE("attempt cap and budget") {
  const auto brief = fixtures::appendix_brief();
  SUBCASE("cap") {
    auto c = timed(10);
    c.pass_probability = 0;
    VirtualClock clock;
    MockBackend m(c, &clock);
    m.load();
    const auto r = generate_until_success(m, brief, {}, rules(), {3, 5000}, clock);
    CHECK(r.outcome == Outcome::attempts_exhausted);
    CHECK(r.attempts.size() == 3);
  }
  SUBCASE("budget stops before an attempt that would overrun") {
    auto c = timed(1500);
    c.pass_probability = 0;
    VirtualClock clock;
    MockBackend m(c, &clock);
    m.load();
    const auto r = generate_until_success(m, brief, {}, rules(), {10, 5000}, clock);
    CHECK(r.outcome == Outcome::budget_exhausted);
    CHECK(r.attempts.size() == 3);
    CHECK(r.attempts.back().end_ms == doctest::Approx(4500));
  }
  SUBCASE("invalid policy") {
    MockBackend m({});
    VirtualClock clock;
    CHECK_THROWS_AS(generate_until_success(m, brief, {}, rules(), {0, 5000}, clock), ConfigError);
    CHECK_THROWS_AS(generate_until_success(m, brief, {}, rules(), {1, 0}, clock), ConfigError);
  }
}

TEST_CASE("attempts are sequential and never exceed budget or cap") {
  const auto brief = fixtures::appendix_brief();
  std::mt19937_64 rng(5);
  for (int ep = 0; ep < 300; ++ep) {
    MockConfig c;
    c.overhead_ms = 50 + static_cast<double>(rng() % 400);
    c.per_token_ms = 1;
    c.tokens_mean = 100;
    c.tokens_jitter = 100;
    c.pass_probability = 0.3;
    VirtualClock clock;
    MockBackend m(c, &clock);
    m.load();
    SamplingConfig s;
    s.seed = rng();
    const RetryPolicy policy{static_cast<int>(1 + rng() % 12), 3000};
    const auto r = generate_until_success(m, brief, s, rules(), policy, clock);
    REQUIRE_FALSE(r.attempts.empty());
    CHECK(static_cast<int>(r.attempts.size()) <= policy.max_attempts);
    for (std::size_t i = 1; i < r.attempts.size(); ++i) CHECK(r.attempts[i].start_ms >= r.attempts[i - 1].end_ms);
    // An attempt only starts when the slowest one so far would still fit.
    double slowest = 0;
    for (const auto& a : r.attempts) {
      if (a.index > 0) CHECK(a.start_ms + slowest <= policy.time_budget_ms);
      slowest = std::max(slowest, a.wall_ms);
    }
    if (r.outcome == Outcome::success) CHECK(r.attempts.back().verdict == 1);
    for (std::size_t i = 0; i + 1 < r.attempts.size(); ++i) CHECK(r.attempts[i].verdict == 0);
  }
}

TEST_CASE("backend faults end the episode") {
  const auto brief = fixtures::appendix_brief();
  auto c = timed(10);
  c.pass_probability = 0;
  c.error_at_call = 1;
  VirtualClock clock;
  MockBackend m(c, &clock);
  m.load();
  const auto r = generate_until_success(m, brief, {}, rules(), {}, clock);
  CHECK(r.outcome == Outcome::backend_error);
  CHECK(r.attempts.size() == 1);
  CHECK(r.error.find("scripted") != std::string::npos);
}

TEST_CASE("judge faults leave attempts unjudged") {
  const auto brief = fixtures::appendix_brief();
  JudgeSuite failing;
  failing.criteria = {{"x", Tier::hard, [](const CampaignBrief&, std::string_view, const PosterOutput&) -> int {
                         throw JudgeError("x", "offline");
                       }}};
  VirtualClock clock;
  MockBackend m(timed(5), &clock);
  m.load();
  const auto r = generate_until_success(m, brief, {}, failing, {4, 5000}, clock);
  CHECK(r.outcome == Outcome::attempts_exhausted);
  REQUIRE(r.attempts.size() == 4);
  for (const auto& a : r.attempts) {
    CHECK(a.unjudged);
    CHECK_FALSE(a.judge);
  }
}

TEST_CASE("seeded episodes replay exactly") {
  const auto brief = fixtures::appendix_brief();
  MockConfig c = timed(20);
  c.pass_probability = 0.4;
  SamplingConfig s;
  s.seed = 77;
  auto run = [&] {
    VirtualClock clock;
    MockBackend m(c, &clock);
    m.load();
    return generate_until_success(m, brief, s, rules(), {}, clock, {"p1", "", 0, 0});
  };
  const auto a = run();
  const auto b = run();
  CHECK(generation_record_to_json(a) == generation_record_to_json(b));
  std::set<std::uint64_t> seeds;
  for (const auto& at : a.attempts) seeds.insert(*at.seed);
  CHECK(seeds.size() == a.attempts.size());
  CHECK(a.attempts[0].seed == attempt_seed(77, 0));
}

TEST_CASE("generation record json round trip") {
  const auto brief = fixtures::appendix_brief();
  auto c = timed(20);
  c.pass_pattern = {false, true};
  VirtualClock clock;
  MockBackend m(c, &clock);
  m.load();
  SamplingConfig s;
  s.seed = 3;
  const auto r = generate_until_success(m, brief, s, rules(), {}, clock, {"p9", "", 4, 1145});
  const auto j = generation_record_to_json(r);
  CHECK(generation_record_to_json(generation_record_from_json(j)) == j);
  CHECK(j["timing"]["prep_ms"] == 1145);
  CHECK(j["outcome"] == "success");
  CHECK(outcome_from_string("budget_exhausted") == Outcome::budget_exhausted);
  CHECK_THROWS_AS(outcome_from_string("nope"), FieldError);
}

TEST_CASE("timing measurement medians and zero-token warning") {
  const auto brief = fixtures::appendix_brief();
  MockConfig c;
  c.prep_ms = 1145;
  c.per_token_ms = 10;
  c.tokens_mean = 200;
  VirtualClock clock;
  MockBackend m(c, &clock);
  const auto agg = measure_timing(m, {brief, brief}, {}, 3, clock);
  CHECK(agg.prep_ms.size() == 3);
  CHECK(agg.attempt_ms.size() == 6);
  CHECK(agg.median_prep_ms == 1145);
  CHECK(agg.median_attempt_ms == doctest::Approx(2000));
  CHECK(agg.median_per_token_ms == doctest::Approx(10));
  CHECK(agg.warnings.empty());

  MockConfig z;
  z.tokens_mean = 0;
  MockBackend mz(z, &clock);
  const auto zagg = measure_timing(mz, {brief}, {}, 2, clock);
  CHECK(zagg.per_token_ms.empty());
  CHECK(zagg.warnings.size() == 1);
  CHECK_THROWS_AS(measure_timing(mz, {}, {}, 1, clock), std::invalid_argument);
}

}  // TEST_SUITE
