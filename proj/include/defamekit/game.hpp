#pragma once

// Two-sided reputational conflict: collect intel, launch smear campaigns
// through the generation runtime, update reputations by a fixed rule,
// and resolve the conflict when one side wins or is defeated.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "defamekit/domain.hpp"
#include "defamekit/runtime.hpp"

namespace defamekit {

enum class Side { player, opponent };
enum class Status { ongoing, player_won, player_defeated };

const char* to_string(Side s);
const char* to_string(Status s);
Side other(Side s);

struct OwnedIntel {
  std::string id;
  IntelligenceItem item;
  bool operator==(const OwnedIntel&) const = default;
};

struct SideState {
  CharacterProfile profile;
  double score = 50.0;
  std::string goal;
  std::vector<OwnedIntel> inventory;  // intel about the other side
  std::vector<OwnedIntel> pool;       // not yet discovered
  bool operator==(const SideState&) const = default;
};

struct ReputationRule {
  double intel_weight = 10.0;
  std::map<std::pair<std::string, std::string>, double> affinity;  // (angle, audience)
  double sender_gain = 5.0;
  double fallback_factor = 0.5;

  double affinity_of(const std::string& angle, const std::string& audience) const;
  bool operator==(const ReputationRule&) const = default;
};

struct CollectIntel {
  bool operator==(const CollectIntel&) const = default;
};
struct LaunchCampaign {
  std::vector<std::string> intel_ids;
  std::string audience;
  std::string angle;
  bool operator==(const LaunchCampaign&) const = default;
};
struct Pass {
  bool operator==(const Pass&) const = default;
};
using Action = std::variant<CollectIntel, LaunchCampaign, Pass>;

std::string action_kind(const Action& a);
nlohmann::json action_to_json(const Action& a);
Action action_from_json(const nlohmann::json& j);

struct TurnEvent {
  int turn = 0;
  Side actor = Side::player;
  Action action;
  std::string collected_id;  // CollectIntel only
  double target_delta = 0.0;
  double sender_delta = 0.0;
  bool fallback = false;  // generation failed, stock poster at reduced effect
  std::optional<PosterOutput> poster;
  int attempts = 0;
  std::string outcome;  // runtime outcome for campaigns
  double player_score = 0.0;  // after the turn
  double opponent_score = 0.0;
};

struct ConflictState {
  SideState player;
  SideState opponent;
  Side turn = Side::player;
  int turn_count = 0;
  std::vector<TurnEvent> history;
  Status status = Status::ongoing;
  ReputationRule rule;
  double goal_threshold = 50.0;
  std::vector<std::string> audiences;
  std::vector<std::string> angles;
  std::uint64_t seed = 0;

  SideState& side(Side s) { return s == Side::player ? player : opponent; }
  const SideState& side(Side s) const { return s == Side::player ? player : opponent; }
};

// Produces a poster for a brief. Implementations decide how (runtime,
// scripted outcomes in tests, ...). A backend_error outcome aborts the turn.
class CampaignRunner {
 public:
  virtual ~CampaignRunner() = default;
  virtual GenerationRecord run(const CampaignBrief& brief, std::uint64_t seed) = 0;
};

class RuntimeCampaignRunner : public CampaignRunner {
 public:
  RuntimeCampaignRunner(GeneratorBackend& backend, const JudgeSuite& suite, SamplingConfig sampling,
                        RetryPolicy policy, const Clock& clock);
  GenerationRecord run(const CampaignBrief& brief, std::uint64_t seed) override;

 private:
  GeneratorBackend& backend_;
  const JudgeSuite& suite_;
  SamplingConfig sampling_;
  RetryPolicy policy_;
  const Clock& clock_;
};

// Replays a fixed list of outcomes (cycled); success renders a mock poster.
class ScriptedCampaignRunner : public CampaignRunner {
 public:
  explicit ScriptedCampaignRunner(std::vector<Outcome> script);
  GenerationRecord run(const CampaignBrief& brief, std::uint64_t seed) override;
  std::size_t calls() const { return calls_; }

 private:
  std::vector<Outcome> script_;
  std::size_t calls_ = 0;
};

ConflictState conflict_from_json(const nlohmann::json& config);
ConflictState load_conflict(const std::string& path);

// Snapshots carry the full state including history.
nlohmann::json conflict_to_json(const ConflictState& s);
ConflictState conflict_snapshot_from_json(const nlohmann::json& j);

std::vector<Action> legal_actions(const ConflictState& s);
bool is_legal(const ConflictState& s, const Action& a);

CampaignBrief campaign_brief(const ConflictState& s, Side sender, const LaunchCampaign& c);

// Rule-predicted (target, sender) deltas for a campaign, before clamping.
std::pair<double, double> predicted_delta(const ReputationRule& rule, const LaunchCampaign& c);

// Mover defaults to the side that made the last recorded turn.
Status check_outcome(const ConflictState& s);
Status check_outcome(const ConflictState& s, Side mover);

std::pair<ConflictState, TurnEvent> apply_action(const ConflictState& s, const Action& a, CampaignRunner& runner);

// Greedy opponent choice: strongest predicted campaign, else collect, else pass.
Action choose_opponent_action(const ConflictState& s);
std::pair<ConflictState, TurnEvent> opponent_turn(const ConflictState& s, std::uint64_t policy_seed,
                                                  CampaignRunner& runner);

nlohmann::json turn_event_to_json(const TurnEvent& e);
TurnEvent turn_event_from_json(const nlohmann::json& j);

}  // namespace defamekit
