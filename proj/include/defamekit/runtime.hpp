#pragma once

// Generate -> validate -> judge -> retry, under an attempt cap and a
// latency budget, with per-attempt timing capture.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "defamekit/backend.hpp"
#include "defamekit/clock.hpp"
#include "defamekit/domain.hpp"
#include "defamekit/judge.hpp"

namespace defamekit {

struct StructuralReport {
  bool pass = false;
  std::vector<SectionFailure> failures;
  std::optional<PosterOutput> poster;
};

// Pass iff the text parses into a poster and is signed by the brief's sender.
StructuralReport structural_validate(const CampaignBrief& brief, std::string_view raw_text);

struct RetryPolicy {
  int max_attempts = 10;
  double time_budget_ms = 5000.0;
};

enum class Outcome { success, budget_exhausted, attempts_exhausted, backend_error };

const char* to_string(Outcome o);
Outcome outcome_from_string(std::string_view s);

struct AttemptRecord {
  int index = 0;
  std::optional<std::uint64_t> seed;
  std::string raw_text;
  StructuralReport structural;
  std::optional<JudgeResult> judge;  // absent when structure failed or judging failed
  bool unjudged = false;
  std::string judge_error;
  int verdict = 0;
  int token_count = 0;
  double start_ms = 0.0;  // relative to episode start
  double end_ms = 0.0;
  double wall_ms = 0.0;
};

struct TimingBreakdown {
  double prep_ms = 0.0;
  std::vector<double> per_attempt_ms;
  std::vector<double> per_token_ms;  // attempts with zero tokens are skipped
};

struct GenerationRecord {
  std::string prompt_id;
  std::string model_id;
  int sample_index = 0;
  CampaignBrief brief;
  std::vector<AttemptRecord> attempts;
  Outcome outcome = Outcome::attempts_exhausted;
  std::optional<PosterOutput> poster;  // set on success
  std::string error;
  TimingBreakdown timing;

  bool succeeded() const { return outcome == Outcome::success; }
};

nlohmann::json generation_record_to_json(const GenerationRecord& r);
GenerationRecord generation_record_from_json(const nlohmann::json& j);

struct EpisodeOptions {
  std::string prompt_id;
  std::string prompt_text;  // text shown to the judge; defaults to the canonical brief
  int sample_index = 0;
  double prep_ms = 0.0;  // recorded in the timing breakdown, not charged to the budget
};

// Seed for attempt `index` of an episode with base seed `base`.
std::uint64_t attempt_seed(std::uint64_t base, int index);

// Attempts run strictly in sequence. The loop stops at the first verdict-1
// attempt, at max_attempts, or when the next attempt would not finish
// inside the time budget (predicted from the slowest attempt so far).
// Backend faults end the episode with Outcome::backend_error; judge faults
// leave the attempt unjudged and count toward max_attempts.
GenerationRecord generate_until_success(GeneratorBackend& backend, const CampaignBrief& brief,
                                        const SamplingConfig& sampling, const JudgeSuite& suite,
                                        const RetryPolicy& policy, const Clock& clock,
                                        const EpisodeOptions& options = {});

struct TimingAggregate {
  std::vector<double> prep_ms;
  std::vector<double> attempt_ms;
  std::vector<double> per_token_ms;
  std::vector<int> token_counts;
  double median_prep_ms = 0.0;
  double median_attempt_ms = 0.0;
  double median_per_token_ms = 0.0;
  std::size_t failures = 0;
  std::vector<std::string> warnings;
};

// Loads the backend once per repetition and generates once per brief.
TimingAggregate measure_timing(GeneratorBackend& backend, const std::vector<CampaignBrief>& briefs,
                               const SamplingConfig& sampling, int repetitions, const Clock& clock);

}  // namespace defamekit
