#include <doctest.h>

#include <random>
#include <set>

#include "defamekit/errors.hpp"
#include "defamekit/game.hpp"
#include "unit/fixtures.hpp"

using namespace defamekit;
using nlohmann::json;

namespace {

ConflictState fresh() { return load_conflict(fixtures::data("conflict.json")); }

// Moves every pool item into the inventory of `side`.
void reveal_all(ConflictState& s, Side side) {
  auto& st = s.side(side);
  st.inventory.insert(st.inventory.end(), st.pool.begin(), st.pool.end());
  st.pool.clear();
}

std::set<std::string> all_ids(const SideState& s) {
  std::set<std::string> ids;
  for (const auto* list : {&s.inventory, &s.pool})
    for (const auto& o : *list) ids.insert(o.id);
  return ids;
}

std::size_t id_count(const SideState& s) { return s.inventory.size() + s.pool.size(); }

}  // namespace

TEST_SUITE("game") {

TEST_CASE("initial state from the sample config") {
  const auto s = fresh();
  CHECK(s.player.score == 50);
  CHECK(s.opponent.score == 50);
  CHECK(s.turn == Side::player);
  CHECK(s.status == Status::ongoing);
  CHECK(s.player.pool.size() == 3);
  CHECK(s.player.inventory.empty());
  const auto legal = legal_actions(s);
  REQUIRE(legal.size() == 2);
  CHECK(std::holds_alternative<CollectIntel>(legal[0]));
  CHECK(std::holds_alternative<Pass>(legal[1]));
  CHECK(s.rule.affinity_of("bad family lineage", "soldiers") == 5);
  CHECK(s.rule.affinity_of("incompetence", "peasants") == 0);
}

TEST_CASE("collecting moves one pool item into the inventory") {
  ScriptedCampaignRunner runner({Outcome::success});
  const auto s = fresh();
  const auto [next, ev] = apply_action(s, CollectIntel{}, runner);
  CHECK(next.player.pool.size() == 2);
  REQUIRE(next.player.inventory.size() == 1);
  CHECK(next.player.inventory[0].id == ev.collected_id);
  CHECK(all_ids(next.player) == all_ids(s.player));
  CHECK(next.turn == Side::opponent);
  CHECK(next.turn_count == 1);
  CHECK(runner.calls() == 0);
  CHECK(apply_action(s, CollectIntel{}, runner).second.collected_id == ev.collected_id);
}

TEST_CASE("campaign deltas follow the reputation rule") {
  auto s = fresh();
  reveal_all(s, Side::player);
  SUBCASE("single intel with positive affinity") {
    ScriptedCampaignRunner runner({Outcome::success});
    const auto [next, ev] = apply_action(s, LaunchCampaign{{"f-failure"}, "soldiers", "bad family lineage"}, runner);
    CHECK(ev.target_delta == -15);
    CHECK(ev.sender_delta == 5);
    CHECK_FALSE(ev.fallback);
    REQUIRE(ev.poster);
    CHECK(next.opponent.score == 35);
    CHECK(next.player.score == 55);
    CHECK(next.player.inventory.size() == 2);
    CHECK(ev.outcome == "success");
  }
  SUBCASE("two intel with negative affinity") {
    ScriptedCampaignRunner runner({Outcome::success});
    const auto [next, ev] =
        apply_action(s, LaunchCampaign{{"f-failure", "f-heresy"}, "soldiers", "moral corruption"}, runner);
    CHECK(ev.target_delta == -15);
    CHECK(next.player.inventory.size() == 1);
  }
  SUBCASE("failed generation falls back at reduced effect") {
    ScriptedCampaignRunner runner({Outcome::attempts_exhausted});
    const auto [next, ev] = apply_action(s, LaunchCampaign{{"f-failure", "f-addiction"}, "soldiers", "cowardice"}, runner);
    CHECK(ev.fallback);
    CHECK(ev.target_delta == -12.5);
    CHECK(ev.sender_delta == 2.5);
    REQUIRE(ev.poster);
    CHECK(ev.poster->signature == s.player.profile.name);
    CHECK(next.opponent.score == 37.5);
  }
  SUBCASE("backend fault aborts the turn") {
    ScriptedCampaignRunner runner({Outcome::backend_error});
    CHECK_THROWS_AS(apply_action(s, LaunchCampaign{{"f-failure"}, "soldiers", "cowardice"}, runner), BackendError);
  }
}

TEST_CASE("illegal moves are rejected") {
  auto s = fresh();
  ScriptedCampaignRunner runner({Outcome::success});
  CHECK_THROWS_AS(apply_action(s, LaunchCampaign{{"f-failure"}, "soldiers", "cowardice"}, runner), IllegalAction);
  reveal_all(s, Side::player);
  CHECK_FALSE(is_legal(s, LaunchCampaign{{"f-failure", "f-failure"}, "soldiers", "cowardice"}));
  CHECK_FALSE(is_legal(s, LaunchCampaign{{"f-failure"}, "sailors", "cowardice"}));
  CHECK_FALSE(is_legal(s, LaunchCampaign{{"f-failure"}, "soldiers", "piracy"}));
  CHECK_FALSE(is_legal(s, LaunchCampaign{{}, "soldiers", "cowardice"}));
  CHECK_FALSE(is_legal(s, CollectIntel{}));
  s.player.inventory.push_back({"f-failure-2", {"failure", "Another failed embassy."}});
  CHECK_FALSE(is_legal(s, LaunchCampaign{{"f-failure", "f-failure-2"}, "soldiers", "cowardice"}));
  CHECK(is_legal(s, LaunchCampaign{{"f-failure", "f-heresy"}, "soldiers", "cowardice"}));
  for (const auto& a : legal_actions(s)) CHECK(is_legal(s, a));
  s.status = Status::player_won;
  CHECK(legal_actions(s).empty());
  CHECK_FALSE(is_legal(s, Pass{}));
}

TEST_CASE("outcome check favours the side that just moved") {
  auto s = fresh();
  auto with = [&](double player, double opponent) {
    s.player.score = player;
    s.opponent.score = opponent;
    return s;
  };
  CHECK(check_outcome(with(50, 50), Side::player) == Status::ongoing);
  CHECK(check_outcome(with(0, 0), Side::player) == Status::player_defeated);
  CHECK(check_outcome(with(0, 0), Side::opponent) == Status::player_won);
  CHECK(check_outcome(with(80, 30), Side::player) == Status::player_won);
  CHECK(check_outcome(with(80, 30), Side::opponent) == Status::player_won);
  CHECK(check_outcome(with(20, 70), Side::player) == Status::player_defeated);
  CHECK(check_outcome(with(10, 0), Side::player) == Status::player_won);
  CHECK(check_outcome(with(10, 0), Side::opponent) == Status::player_won);
}

TEST_CASE("greedy opponent matches a brute-force choice") {
  auto s = fresh();
  s.turn = Side::opponent;
  CHECK(std::holds_alternative<CollectIntel>(choose_opponent_action(s)));
  reveal_all(s, Side::opponent);
  const auto chosen = std::get<LaunchCampaign>(choose_opponent_action(s));
  // Oracle: scan every id pair/audience/angle directly.
  std::optional<std::tuple<double, std::vector<std::string>, std::string, std::string>> best;
  const auto& inv = s.opponent.inventory;
  for (std::size_t i = 0; i < inv.size(); ++i)
    for (std::size_t k = i; k < inv.size(); ++k) {
      std::vector<std::string> ids{inv[i].id};
      if (k != i) {
        if (inv[i].item.kind == inv[k].item.kind) continue;
        ids.push_back(inv[k].id);
      }
      std::sort(ids.begin(), ids.end());
      for (const auto& aud : s.audiences)
        for (const auto& ang : s.angles) {
          const double d = -(10.0 * ids.size() + s.rule.affinity_of(ang, aud));
          auto cand = std::make_tuple(d, ids, aud, ang);
          if (!best || cand < *best) best = cand;
        }
    }
  REQUIRE(best);
  auto ids = chosen.intel_ids;
  std::sort(ids.begin(), ids.end());
  CHECK(ids == std::get<1>(*best));
  CHECK(chosen.audience == std::get<2>(*best));
  CHECK(chosen.angle == std::get<3>(*best));
  CHECK(predicted_delta(s.rule, chosen).first == -25);

  s.opponent.inventory.clear();
  CHECK(std::holds_alternative<Pass>(choose_opponent_action(s)));
}

TEST_CASE("random play keeps scores bounded and intel unique") {
  std::mt19937_64 rng(2024);
  for (int game = 0; game < 1000; ++game) {
    auto s = fresh();
    s.seed = rng();
    s.player.score = static_cast<double>(rng() % 101);
    s.opponent.score = static_cast<double>(rng() % 101);
    ScriptedCampaignRunner runner({Outcome::success, Outcome::attempts_exhausted, Outcome::budget_exhausted});
    const std::size_t player_ids = id_count(s.player), opponent_ids = id_count(s.opponent);
    for (int turn = 0; turn < 20 && s.status == Status::ongoing; ++turn) {
      const auto legal = legal_actions(s);
      REQUIRE_FALSE(legal.empty());
      auto [next, ev] = turn % 2 && rng() % 2 ? opponent_turn(s, rng(), runner)
                                               : apply_action(s, legal[rng() % legal.size()], runner);
      s = std::move(next);
      CHECK(s.player.score >= 0);
      CHECK(s.player.score <= 100);
      CHECK(s.opponent.score >= 0);
      CHECK(s.opponent.score <= 100);
      CHECK(all_ids(s.player).size() == id_count(s.player));
      CHECK(all_ids(s.opponent).size() == id_count(s.opponent));
      CHECK(id_count(s.player) <= player_ids);
      CHECK(id_count(s.opponent) <= opponent_ids);
      CHECK(s.status == check_outcome(s));
    }
  }
}

TEST_CASE("constructed games reach both terminal states") {
  ScriptedCampaignRunner runner({Outcome::success});
  SUBCASE("player wins") {
    auto s = fresh();
    s.opponent.score = 20;
    reveal_all(s, Side::player);
    const auto [next, ev] = apply_action(s, LaunchCampaign{{"f-failure", "f-addiction"}, "soldiers", "cowardice"}, runner);
    CHECK(next.opponent.score == 0);
    CHECK(next.status == Status::player_won);
    CHECK_THROWS_AS(apply_action(next, Pass{}, runner), IllegalAction);
  }
  SUBCASE("player defeated") {
    auto s = fresh();
    s.player.score = 10;
    reveal_all(s, Side::opponent);
    auto [after_pass, ev1] = apply_action(s, Pass{}, runner);
    CHECK(after_pass.turn == Side::opponent);
    const auto [next, ev2] = opponent_turn(after_pass, 3, runner);
    CHECK(next.player.score == 0);
    CHECK(next.status == Status::player_defeated);
  }
  SUBCASE("opponent turn guards") {
    const auto s = fresh();
    CHECK_THROWS_AS(opponent_turn(s, 1, runner), IllegalAction);
  }
}

TEST_CASE("snapshots round trip") {
  auto s = fresh();
  ScriptedCampaignRunner runner({Outcome::success, Outcome::attempts_exhausted});
  s = apply_action(s, CollectIntel{}, runner).first;
  s = opponent_turn(s, 5, runner).first;
  const auto j = conflict_to_json(s);
  const auto back = conflict_snapshot_from_json(json::parse(j.dump()));
  CHECK(conflict_to_json(back) == j);
  CHECK(back.history.size() == 2);
  CHECK(back.player == s.player);
  for (const auto& a : std::vector<Action>{CollectIntel{}, Pass{}, LaunchCampaign{{"x", "y"}, "a", "b"}})
    CHECK(action_from_json(action_to_json(a)) == a);
}

TEST_CASE("conflict config errors") {
  json j = read_json_file(fixtures::data("conflict.json"));
  SUBCASE("score out of range") {
    j["initial_scores"]["player"] = 120;
    CHECK_THROWS_AS(conflict_from_json(j), ConfigError);
  }
  SUBCASE("bad affinity") {
    j["rule"]["affinity"][0]["value"] = 3;
    CHECK_THROWS_AS(conflict_from_json(j), ConfigError);
  }
  SUBCASE("repeated intel id") {
    j["player"]["intel_pool"][1]["id"] = "f-failure";
    CHECK_THROWS_AS(conflict_from_json(j), ConfigError);
  }
  SUBCASE("no angles") {
    j["angles"] = json::array();
    CHECK_THROWS_AS(conflict_from_json(j), ConfigError);
  }
  SUBCASE("array scores and opponent first") {
    j["initial_scores"] = {30, 60};
    j["first_turn"] = "opponent";
    const auto s = conflict_from_json(j);
    CHECK(s.player.score == 30);
    CHECK(s.turn == Side::opponent);
  }
  CHECK_THROWS_AS(load_conflict(fixtures::data("nope.json")), IoError);
}

TEST_CASE("runtime campaign runner drives the generation loop") {
  auto s = fresh();
  reveal_all(s, Side::player);
  MockConfig mc;
  mc.overhead_ms = 100;
  mc.pass_pattern = {false, true};
  VirtualClock clock;
  MockBackend backend(mc, &clock);
  const auto suite = make_rule_suite(std::make_shared<const Rulebook>(load_rulebook(fixtures::data("rulebook.json"))));
  RuntimeCampaignRunner runner(backend, suite, {}, {}, clock);
  const auto [next, ev] = apply_action(s, LaunchCampaign{{"f-failure"}, "soldiers", "bad family lineage"}, runner);
  CHECK(backend.loaded());
  CHECK(ev.attempts == 2);
  CHECK_FALSE(ev.fallback);
  CHECK(ev.target_delta == -15);
}

}  // TEST_SUITE
