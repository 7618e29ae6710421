#include "defamekit/game.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "defamekit/errors.hpp"
#include "defamekit/rng.hpp"

namespace defamekit {

using nlohmann::json;

const char* to_string(Side s) { return s == Side::player ? "player" : "opponent"; }

const char* to_string(Status s) {
  switch (s) {
    case Status::ongoing: return "ongoing";
    case Status::player_won: return "player_won";
    case Status::player_defeated: return "player_defeated";
  }
  return "ongoing";
}

Side other(Side s) { return s == Side::player ? Side::opponent : Side::player; }

namespace {

Side side_from_string(const std::string& s) {
  if (s == "player") return Side::player;
  if (s == "opponent") return Side::opponent;
  throw ConfigError("unknown side: " + s);
}

Status status_from_string(const std::string& s) {
  if (s == "ongoing") return Status::ongoing;
  if (s == "player_won") return Status::player_won;
  if (s == "player_defeated") return Status::player_defeated;
  throw ConfigError("unknown status: " + s);
}

double clamp_score(double v) { return std::clamp(v, 0.0, 100.0); }

const OwnedIntel* find_intel(const std::vector<OwnedIntel>& items, const std::string& id) {
  for (const auto& it : items)
    if (it.id == id) return &it;
  return nullptr;
}

json intel_to_json(const OwnedIntel& o) { return {{"id", o.id}, {"kind", o.item.kind}, {"body", o.item.body}}; }

std::vector<OwnedIntel> intel_list_from_json(const json& j, const std::string& path) {
  std::vector<OwnedIntel> out;
  if (j.is_null()) return out;
  if (!j.is_array()) throw ConfigError(path + " must be an array");
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    const std::string where = path + "[" + std::to_string(i) + "]";
    if (!e.is_object() || !e.contains("id") || !e.contains("kind") || !e.contains("body"))
      throw ConfigError(where + " needs id, kind and body");
    out.push_back({e.at("id").get<std::string>(), {e.at("kind").get<std::string>(), e.at("body").get<std::string>()}});
  }
  return out;
}

SideState side_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + " must be an object");
  SideState s;
  if (!j.contains("profile")) throw ConfigError(path + ".profile missing");
  try {
    s.profile = profile_from_json(j.at("profile"), path + ".profile");
  } catch (const FieldError& e) {
    throw ConfigError(e.what());
  }
  s.score = j.value("score", 50.0);
  s.goal = j.value("goal", std::string{});
  s.inventory = intel_list_from_json(j.value("inventory", json()), path + ".inventory");
  s.pool = intel_list_from_json(j.value("intel_pool", j.value("pool", json())), path + ".intel_pool");
  return s;
}

json side_to_json(const SideState& s) {
  json inv = json::array(), pool = json::array();
  for (const auto& o : s.inventory) inv.push_back(intel_to_json(o));
  for (const auto& o : s.pool) pool.push_back(intel_to_json(o));
  return {{"profile", profile_to_json(s.profile)}, {"score", s.score}, {"goal", s.goal},
          {"inventory", inv}, {"intel_pool", pool}};
}

ReputationRule rule_from_json(const json& j) {
  ReputationRule r;
  if (j.is_null()) return r;
  r.intel_weight = j.value("intel_weight", r.intel_weight);
  r.sender_gain = j.value("sender_gain", r.sender_gain);
  r.fallback_factor = j.value("fallback_factor", r.fallback_factor);
  if (!(r.fallback_factor > 0.0 && r.fallback_factor <= 1.0)) throw ConfigError("rule.fallback_factor must be in (0, 1]");
  if (j.contains("affinity")) {
    for (const auto& e : j.at("affinity")) {
      const double v = e.at("value").get<double>();
      if (v != -5.0 && v != 0.0 && v != 5.0) throw ConfigError("rule.affinity values must be -5, 0 or 5");
      r.affinity[{e.at("angle").get<std::string>(), e.at("audience").get<std::string>()}] = v;
    }
  }
  return r;
}

json rule_to_json(const ReputationRule& r) {
  json aff = json::array();
  for (const auto& [key, v] : r.affinity) aff.push_back({{"angle", key.first}, {"audience", key.second}, {"value", v}});
  return {{"intel_weight", r.intel_weight}, {"sender_gain", r.sender_gain}, {"fallback_factor", r.fallback_factor},
          {"affinity", aff}};
}

void check_unique_ids(const ConflictState& s) {
  for (Side side : {Side::player, Side::opponent}) {
    std::set<std::string> seen;
    const auto& st = s.side(side);
    for (const auto* list : {&st.inventory, &st.pool})
      for (const auto& o : *list)
        if (!seen.insert(o.id).second)
          throw ConfigError(std::string(to_string(side)) + " intel id repeated: " + o.id);
  }
}

PosterOutput stock_poster(const CampaignBrief& brief) {
  PosterOutput p;
  p.title = "Notice to all " + brief.audience;
  p.subtitle = "Concerning " + brief.target.name;
  std::string kinds;
  for (const auto& i : brief.intelligence) kinds += (kinds.empty() ? "" : " and ") + i.kind;
  p.body = brief.target.name + " stands accused of " + kinds + ".";
  p.signature = brief.sender.name;
  p.catchphrase = brief.sender.catchphrases.public_line;
  p.raw_text = p.title + "\n" + p.subtitle + "\n\n" + p.body + "\n\n" + p.signature + "\n\"" + p.catchphrase + "\"";
  return p;
}

std::pair<ConflictState, TurnEvent> apply_with_seed(const ConflictState& s, const Action& a, CampaignRunner& runner,
                                                    std::uint64_t turn_seed) {
  if (!is_legal(s, a)) throw IllegalAction("illegal " + action_kind(a) + " for " + to_string(s.turn));
  ConflictState next = s;
  const Side mover = s.turn;
  TurnEvent ev;
  ev.turn = s.turn_count;
  ev.actor = mover;
  ev.action = a;
  SideState& me = next.side(mover);
  SideState& them = next.side(other(mover));

  if (std::holds_alternative<CollectIntel>(a)) {
    SeedStream rng(turn_seed);
    const auto idx = static_cast<std::ptrdiff_t>(rng.below(me.pool.size()));
    OwnedIntel item = me.pool[idx];
    me.pool.erase(me.pool.begin() + idx);
    ev.collected_id = item.id;
    me.inventory.push_back(std::move(item));
  } else if (const auto* c = std::get_if<LaunchCampaign>(&a)) {
    const CampaignBrief brief = campaign_brief(s, mover, *c);
    GenerationRecord rec = runner.run(brief, turn_seed);
    if (rec.outcome == Outcome::backend_error)
      throw BackendError(rec.error.empty() ? "campaign generation failed" : rec.error);
    auto [target_delta, sender_delta] = predicted_delta(s.rule, *c);
    ev.attempts = static_cast<int>(rec.attempts.size());
    ev.outcome = to_string(rec.outcome);
    if (rec.succeeded() && rec.poster) {
      ev.poster = rec.poster;
    } else {
      ev.fallback = true;
      target_delta *= s.rule.fallback_factor;
      sender_delta *= s.rule.fallback_factor;
      ev.poster = stock_poster(brief);
    }
    ev.target_delta = target_delta;
    ev.sender_delta = sender_delta;
    them.score = clamp_score(them.score + target_delta);
    me.score = clamp_score(me.score + sender_delta);
    std::erase_if(me.inventory, [&](const OwnedIntel& o) {
      return std::find(c->intel_ids.begin(), c->intel_ids.end(), o.id) != c->intel_ids.end();
    });
  }

  next.turn = other(mover);
  next.turn_count = s.turn_count + 1;
  ev.player_score = next.player.score;
  ev.opponent_score = next.opponent.score;
  next.history.push_back(ev);
  next.status = check_outcome(next, mover);
  return {std::move(next), std::move(ev)};
}

}  // namespace

double ReputationRule::affinity_of(const std::string& angle, const std::string& audience) const {
  auto it = affinity.find({angle, audience});
  return it == affinity.end() ? 0.0 : it->second;
}

std::string action_kind(const Action& a) {
  if (std::holds_alternative<CollectIntel>(a)) return "collect_intel";
  if (std::holds_alternative<LaunchCampaign>(a)) return "launch_campaign";
  return "pass";
}

json action_to_json(const Action& a) {
  json j{{"type", action_kind(a)}};
  if (const auto* c = std::get_if<LaunchCampaign>(&a)) {
    j["intel_ids"] = c->intel_ids;
    j["audience"] = c->audience;
    j["angle"] = c->angle;
  }
  return j;
}

Action action_from_json(const json& j) {
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string())
    throw IllegalAction("action needs a string \"type\"");
  const auto type = j.at("type").get<std::string>();
  if (type == "collect_intel" || type == "CollectIntel") return CollectIntel{};
  if (type == "pass" || type == "Pass") return Pass{};
  if (type == "launch_campaign" || type == "LaunchCampaign") {
    LaunchCampaign c;
    try {
      c.intel_ids = j.at("intel_ids").get<std::vector<std::string>>();
      c.audience = j.at("audience").get<std::string>();
      c.angle = j.at("angle").get<std::string>();
    } catch (const json::exception&) {
      throw IllegalAction("launch_campaign needs intel_ids, audience and angle");
    }
    return c;
  }
  throw IllegalAction("unknown action type: " + type);
}

RuntimeCampaignRunner::RuntimeCampaignRunner(GeneratorBackend& backend, const JudgeSuite& suite,
                                             SamplingConfig sampling, RetryPolicy policy, const Clock& clock)
    : backend_(backend), suite_(suite), sampling_(sampling), policy_(policy), clock_(clock) {}

GenerationRecord RuntimeCampaignRunner::run(const CampaignBrief& brief, std::uint64_t seed) {
  SamplingConfig sampling = sampling_;
  sampling.seed = seed;
  EpisodeOptions opts;
  opts.prompt_id = "campaign";
  if (!backend_.loaded()) opts.prep_ms = backend_.load();
  return generate_until_success(backend_, brief, sampling, suite_, policy_, clock_, opts);
}

ScriptedCampaignRunner::ScriptedCampaignRunner(std::vector<Outcome> script) : script_(std::move(script)) {
  if (script_.empty()) script_.push_back(Outcome::success);
}

GenerationRecord ScriptedCampaignRunner::run(const CampaignBrief& brief, std::uint64_t seed) {
  const Outcome o = script_[calls_++ % script_.size()];
  GenerationRecord rec;
  rec.prompt_id = "campaign";
  rec.model_id = "scripted";
  rec.brief = brief;
  rec.outcome = o;
  AttemptRecord at;
  at.seed = seed;
  if (o == Outcome::backend_error) {
    rec.error = "scripted backend fault";
    return rec;
  }
  at.raw_text = render_mock_poster(brief, o == Outcome::success);
  at.structural = structural_validate(brief, at.raw_text);
  at.verdict = o == Outcome::success ? 1 : 0;
  rec.attempts.push_back(at);
  if (o == Outcome::success) rec.poster = at.structural.poster;
  return rec;
}

ConflictState conflict_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("conflict config must be a JSON object");
  ConflictState s;
  if (!j.contains("player") || !j.contains("opponent")) throw ConfigError("conflict config needs player and opponent");
  s.player = side_from_json(j.at("player"), "player");
  s.opponent = side_from_json(j.at("opponent"), "opponent");
  if (j.contains("initial_scores")) {
    const auto& sc = j.at("initial_scores");
    if (sc.is_array() && sc.size() == 2) {
      s.player.score = sc[0].get<double>();
      s.opponent.score = sc[1].get<double>();
    } else if (sc.is_object()) {
      s.player.score = sc.value("player", s.player.score);
      s.opponent.score = sc.value("opponent", s.opponent.score);
    }
  }
  for (double v : {s.player.score, s.opponent.score})
    if (v < 0.0 || v > 100.0) throw ConfigError("scores must lie in [0, 100]");
  s.goal_threshold = j.value("goal_threshold", 50.0);
  if (!(s.goal_threshold > 0.0)) throw ConfigError("goal_threshold must be positive");
  s.rule = rule_from_json(j.value("rule", json()));
  s.audiences = j.value("audiences", std::vector<std::string>{});
  s.angles = j.value("angles", std::vector<std::string>{});
  if (s.audiences.empty() || s.angles.empty()) throw ConfigError("conflict config needs non-empty audiences and angles");
  s.seed = j.value("seed", std::uint64_t{0});
  s.turn = side_from_string(j.value("first_turn", std::string("player")));
  check_unique_ids(s);
  s.status = check_outcome(s, other(s.turn));
  return s;
}

ConflictState load_conflict(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open conflict config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  json j = json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw ConfigError("conflict config is not valid JSON: " + path);
  return conflict_from_json(j);
}

json turn_event_to_json(const TurnEvent& e) {
  json j{{"turn", e.turn},
         {"actor", to_string(e.actor)},
         {"action", action_to_json(e.action)},
         {"target_delta", e.target_delta},
         {"sender_delta", e.sender_delta},
         {"fallback", e.fallback},
         {"attempts", e.attempts},
         {"outcome", e.outcome},
         {"player_score", e.player_score},
         {"opponent_score", e.opponent_score}};
  if (!e.collected_id.empty()) j["collected_id"] = e.collected_id;
  j["poster"] = e.poster ? poster_to_json(*e.poster) : json();
  return j;
}

TurnEvent turn_event_from_json(const json& j) {
  TurnEvent e;
  e.turn = j.at("turn").get<int>();
  e.actor = side_from_string(j.at("actor").get<std::string>());
  e.action = action_from_json(j.at("action"));
  e.collected_id = j.value("collected_id", std::string{});
  e.target_delta = j.value("target_delta", 0.0);
  e.sender_delta = j.value("sender_delta", 0.0);
  e.fallback = j.value("fallback", false);
  e.attempts = j.value("attempts", 0);
  e.outcome = j.value("outcome", std::string{});
  e.player_score = j.value("player_score", 0.0);
  e.opponent_score = j.value("opponent_score", 0.0);
  if (j.contains("poster") && !j.at("poster").is_null()) e.poster = poster_from_json(j.at("poster"));
  return e;
}

json conflict_to_json(const ConflictState& s) {
  json hist = json::array();
  for (const auto& e : s.history) hist.push_back(turn_event_to_json(e));
  return {{"player", side_to_json(s.player)},
          {"opponent", side_to_json(s.opponent)},
          {"turn", to_string(s.turn)},
          {"turn_count", s.turn_count},
          {"history", hist},
          {"status", to_string(s.status)},
          {"rule", rule_to_json(s.rule)},
          {"goal_threshold", s.goal_threshold},
          {"audiences", s.audiences},
          {"angles", s.angles},
          {"seed", s.seed}};
}

ConflictState conflict_snapshot_from_json(const json& j) {
  ConflictState s;
  s.player = side_from_json(j.at("player"), "player");
  s.opponent = side_from_json(j.at("opponent"), "opponent");
  s.turn = side_from_string(j.at("turn").get<std::string>());
  s.turn_count = j.at("turn_count").get<int>();
  for (const auto& e : j.at("history")) s.history.push_back(turn_event_from_json(e));
  s.status = status_from_string(j.at("status").get<std::string>());
  s.rule = rule_from_json(j.at("rule"));
  s.goal_threshold = j.at("goal_threshold").get<double>();
  s.audiences = j.at("audiences").get<std::vector<std::string>>();
  s.angles = j.at("angles").get<std::vector<std::string>>();
  s.seed = j.at("seed").get<std::uint64_t>();
  check_unique_ids(s);
  return s;
}

std::vector<Action> legal_actions(const ConflictState& s) {
  std::vector<Action> out;
  if (s.status != Status::ongoing) return out;
  const SideState& me = s.side(s.turn);
  if (!me.pool.empty()) out.push_back(CollectIntel{});
  const auto& inv = me.inventory;
  std::vector<std::vector<std::string>> subsets;
  for (std::size_t i = 0; i < inv.size(); ++i) {
    subsets.push_back({inv[i].id});
    for (std::size_t k = i + 1; k < inv.size(); ++k)
      if (inv[i].item.kind != inv[k].item.kind) subsets.push_back({inv[i].id, inv[k].id});
  }
  for (const auto& ids : subsets)
    for (const auto& audience : s.audiences)
      for (const auto& angle : s.angles) out.push_back(LaunchCampaign{ids, audience, angle});
  out.push_back(Pass{});
  return out;
}

bool is_legal(const ConflictState& s, const Action& a) {
  if (s.status != Status::ongoing) return false;
  const SideState& me = s.side(s.turn);
  if (std::holds_alternative<Pass>(a)) return true;
  if (std::holds_alternative<CollectIntel>(a)) return !me.pool.empty();
  const auto& c = std::get<LaunchCampaign>(a);
  if (c.intel_ids.empty() || c.intel_ids.size() > 2) return false;
  if (c.intel_ids.size() == 2 && c.intel_ids[0] == c.intel_ids[1]) return false;
  std::set<std::string> kinds;
  for (const auto& id : c.intel_ids) {
    const auto* it = find_intel(me.inventory, id);
    if (!it || !kinds.insert(it->item.kind).second) return false;
  }
  return std::find(s.audiences.begin(), s.audiences.end(), c.audience) != s.audiences.end() &&
         std::find(s.angles.begin(), s.angles.end(), c.angle) != s.angles.end();
}

CampaignBrief campaign_brief(const ConflictState& s, Side sender, const LaunchCampaign& c) {
  CampaignBrief b;
  b.sender = s.side(sender).profile;
  b.target = s.side(other(sender)).profile;
  for (const auto& id : c.intel_ids) {
    const auto* it = find_intel(s.side(sender).inventory, id);
    if (!it) throw IllegalAction("intel not in inventory: " + id);
    b.intelligence.push_back(it->item);
  }
  b.audience = c.audience;
  b.angle = c.angle;
  return b;
}

std::pair<double, double> predicted_delta(const ReputationRule& rule, const LaunchCampaign& c) {
  const double k = static_cast<double>(c.intel_ids.size());
  return {-(k * rule.intel_weight + rule.affinity_of(c.angle, c.audience)), rule.sender_gain};
}

Status check_outcome(const ConflictState& s, Side mover) {
  const double own = s.side(mover).score;
  const double theirs = s.side(other(mover)).score;
  auto win = [](Side side) { return side == Side::player ? Status::player_won : Status::player_defeated; };
  if (own <= 0.0) return win(other(mover));
  if (own - theirs >= s.goal_threshold) return win(mover);
  if (theirs <= 0.0) return win(mover);
  if (theirs - own >= s.goal_threshold) return win(other(mover));
  return Status::ongoing;
}

Status check_outcome(const ConflictState& s) {
  const Side mover = s.history.empty() ? Side::player : s.history.back().actor;
  return check_outcome(s, mover);
}

std::pair<ConflictState, TurnEvent> apply_action(const ConflictState& s, const Action& a, CampaignRunner& runner) {
  return apply_with_seed(s, a, runner, derive_seed({s.seed, static_cast<std::uint64_t>(s.turn_count)}));
}

Action choose_opponent_action(const ConflictState& s) {
  const auto actions = legal_actions(s);
  const LaunchCampaign* best = nullptr;
  double best_delta = 0.0;
  auto key = [](const LaunchCampaign& c) {
    auto ids = c.intel_ids;
    std::sort(ids.begin(), ids.end());
    return std::make_tuple(ids, c.audience, c.angle);
  };
  for (const auto& a : actions) {
    const auto* c = std::get_if<LaunchCampaign>(&a);
    if (!c) continue;
    const double d = predicted_delta(s.rule, *c).first;
    if (!best || d < best_delta || (d == best_delta && key(*c) < key(*best))) {
      best = c;
      best_delta = d;
    }
  }
  if (best) return *best;
  for (const auto& a : actions)
    if (std::holds_alternative<CollectIntel>(a)) return a;
  return Pass{};
}

std::pair<ConflictState, TurnEvent> opponent_turn(const ConflictState& s, std::uint64_t policy_seed,
                                                  CampaignRunner& runner) {
  if (s.status != Status::ongoing) throw IllegalAction("conflict is over");
  if (s.turn != Side::opponent) throw IllegalAction("not the opponent's turn");
  return apply_with_seed(s, choose_opponent_action(s), runner,
                         derive_seed({policy_seed, static_cast<std::uint64_t>(s.turn_count)}));
}

}  // namespace defamekit
