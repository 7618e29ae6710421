#pragma once

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "defamekit/domain.hpp"

namespace defamekit {

namespace criterion {
inline constexpr const char* kOverall = "overall";
inline constexpr const char* kAngle = "angle";
inline constexpr const char* kIntelligence = "intelligence";
inline constexpr const char* kAlignment = "alignment";
inline constexpr const char* kWriting = "writing";
inline constexpr const char* kAudience = "audience";
inline constexpr const char* kRhetorical = "rhetorical";
inline constexpr std::array<const char*, 7> kAll = {kOverall, kAngle,    kIntelligence, kAlignment,
                                                    kWriting, kAudience, kRhetorical};
}  // namespace criterion

enum class Tier { hard, easy };

Tier default_tier(std::string_view criterion_id);
// The pass/fail question asked for a criterion.
std::string criterion_question(std::string_view criterion_id);

// Returns 0 or 1; throws JudgeError when the evaluation itself fails.
using CriterionEvaluator =
    std::function<int(const CampaignBrief& brief, std::string_view prompt_text, const PosterOutput& poster)>;

struct JudgeCriterion {
  std::string id;
  Tier tier = Tier::hard;
  CriterionEvaluator evaluate;
};

struct JudgeSuite {
  std::vector<JudgeCriterion> criteria;
  std::size_t max_in_flight = 1;  // concurrent criterion evaluations
};

struct JudgeResult {
  std::vector<std::pair<std::string, int>> bits;  // suite order
  int verdict = 1;
  std::vector<std::string> warnings;

  int bit(std::string_view id) const;  // -1 when absent
};

nlohmann::json judge_result_to_json(const JudgeResult& r);
JudgeResult judge_result_from_json(const nlohmann::json& j);

// Verdict = min over the bits; an empty suite passes vacuously with a warning.
int verdict_of(const std::vector<std::pair<std::string, int>>& bits);

// Throws JudgeError naming the first failing criterion.
JudgeResult judge(const JudgeSuite& suite, const CampaignBrief& brief, std::string_view prompt_text,
                  const PosterOutput& poster);

// Deterministic offline stand-in for the cloud judge.
struct Rulebook {
  std::map<std::string, std::vector<std::string>> intel_keywords;     // intel kind -> keywords
  std::map<std::string, std::vector<std::string>> angle_keywords;     // angle -> keywords
  std::map<std::string, std::vector<std::string>> audience_lexicon;   // audience -> words
  std::vector<std::string> banned_words;
  std::vector<std::string> anachronism_tokens;  // digit-only tokens, e.g. "1999"
};

Rulebook rulebook_from_json(const nlohmann::json& j);
nlohmann::json rulebook_to_json(const Rulebook& r);
Rulebook load_rulebook(const std::string& path);

// Pure function of its inputs. Intelligence checks the body; angle and
// audience look at the whole poster text. Angles and audiences without a
// rulebook entry fall back to their own wording as the single keyword; an
// intel kind without an entry is a ConfigError.
int rule_judge_evaluate(std::string_view criterion_id, const CampaignBrief& brief, const PosterOutput& poster,
                        const Rulebook& rulebook);

JudgeSuite make_rule_suite(std::shared_ptr<const Rulebook> rulebook);

// Cloud judge over a chat-completions endpoint. Hard criteria go to the
// stronger model, easy ones to the cheaper model. The first line of the
// answer must be PASS or FAIL.
struct RemoteJudgeConfig {
  std::string endpoint;
  std::string hard_model = "gpt-4o";
  std::string easy_model = "gpt-4o-mini";
  std::string api_key;  // filled from DEFAMEKIT_JUDGE_API_KEY when empty
  int retries = 2;      // extra attempts after a transport failure
  double timeout_s = 60.0;
  std::size_t max_in_flight = 4;
};

inline constexpr const char* kJudgeApiKeyEnv = "DEFAMEKIT_JUDGE_API_KEY";

RemoteJudgeConfig remote_judge_config_from_json(const nlohmann::json& j);

// Parses a judge answer; throws JudgeError unless the first line is PASS or FAIL.
int parse_judge_answer(std::string_view criterion_id, std::string_view answer);

std::string render_judge_prompt(std::string_view criterion_id, const CampaignBrief& brief, std::string_view prompt_text,
                                const PosterOutput& poster);

JudgeSuite make_remote_suite(RemoteJudgeConfig config);

}  // namespace defamekit
