#pragma once

// Benchmark pipeline: run many sampled episodes per prompt and model, then
// turn the episode logs into success rates, waiting and expected
// time-to-success distributions, rank agreement and a difficulty subset.

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "defamekit/backend.hpp"
#include "defamekit/runtime.hpp"
#include "defamekit/stats.hpp"

namespace defamekit {

struct BenchPrompt {
  std::string prompt_id;
  CampaignBrief brief;
  std::string prompt_text;  // optional rendered prompt for the judge
};

// Accepts a JSON array or JSON Lines. Each entry may be a bare brief, an
// object with `brief` (plus optional `prompt_id`/`id` and `prompt`), or a
// dataset/DAG record with `input.brief`. Missing ids become p000, p001, ...
std::vector<BenchPrompt> load_bench_prompts(const std::string& path);

struct BenchRunOptions {
  int samples = 100;
  SamplingConfig sampling;
  RetryPolicy policy{1, std::numeric_limits<double>::infinity()};
  std::uint64_t seed = 0;
};

// Loads the backend once, runs `samples` episodes per prompt in
// (prompt, sample) order and hands each record to `sink`.
void run_bench(GeneratorBackend& backend, const Clock& clock, const std::vector<BenchPrompt>& prompts,
               const JudgeSuite& suite, const BenchRunOptions& options,
               const std::function<void(const GenerationRecord&)>& sink);

struct TrialData {
  std::vector<stats::PromptTrialSet> trials;     // ordered by (model, prompt)
  std::map<std::string, std::vector<double>> prep_ms;  // per model
};

// Every judged attempt contributes one trial; unjudged attempts are skipped.
TrialData trials_from_records(const std::vector<GenerationRecord>& records);
// Episode log (.jsonl) or trial CSV (prompt_id,model_id,pass,tokens,attempt_ms[,prep_ms]).
TrialData load_trials(const std::string& path);
std::vector<GenerationRecord> load_generation_records(const std::string& path);

struct PromptResult {
  std::string prompt_id;
  stats::SuccessEstimate estimate;
  stats::WaitingTime waiting;
  stats::ExpectedTime expected;
};

struct ModelAnalysis {
  std::string model_id;
  stats::SuccessEstimate overall;
  double prep_ms = 0.0;       // median
  double eval_ms = 0.0;       // median single-attempt time
  double per_token_ms = 0.0;  // median
  std::optional<stats::TokenStats> tokens;
  std::vector<PromptResult> prompts;
  std::optional<stats::PercentileTable> attempts_table;
  std::optional<stats::PercentileTable> time_table;
  stats::EcdfCurve attempts_ecdf;
  stats::EcdfCurve time_ecdf;
  std::size_t censored = 0;  // prompts with no success at all
};

struct PairAnalysis {
  std::string first;
  std::string second;
  std::optional<double> rho;
  std::optional<double> subset_rho;
  stats::PairedOutcome outcome;
  std::optional<stats::McNemarResult> mcnemar;
};

struct BenchAnalysis {
  std::vector<ModelAnalysis> models;
  std::vector<PairAnalysis> pairs;
  double difficulty_quantile = 0.4;
  std::optional<stats::DifficultySubset> difficulty;
};

BenchAnalysis analyze_trials(const TrialData& data, double difficulty_quantile = 0.4);

// Plain-text report with markdown-style tables. Deterministic.
std::string render_report(const BenchAnalysis& analysis);

// CSV name -> content.
std::map<std::string, std::string> render_csv(const BenchAnalysis& analysis);

// Plot geometry shared by the ECDF SVGs.
namespace svg {
inline constexpr double kWidth = 640, kHeight = 400;
inline constexpr double kLeft = 60, kRight = 20, kTop = 30, kBottom = 50;
}  // namespace svg

struct EcdfSeries {
  std::string label;
  stats::EcdfCurve curve;
};

std::string render_ecdf_svg(const std::vector<EcdfSeries>& series, const std::string& title, const std::string& x_label);
// SVG file name -> content (expected attempts, expected time-to-success).
std::map<std::string, std::string> render_ecdf_svgs(const BenchAnalysis& analysis);

}  // namespace defamekit
