#pragma once

// Benchmark statistics: success rates with standard errors, waiting and
// expected time-to-success, ECDFs and percentile tables, McNemar's test,
// Spearman rank correlation with ties, the pooled difficulty subset and
// token-length statistics. All functions are pure.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace defamekit::stats {

struct PromptTrialSet {
  std::string prompt_id;
  std::string model_id;
  std::vector<int> pass_bits;
  std::vector<int> token_counts;
  std::vector<double> attempt_times_ms;
};

struct SuccessEstimate {
  double p_hat = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

// p_hat = mean of the bits, se = sqrt(p(1-p)/n). Throws std::invalid_argument on n = 0.
SuccessEstimate success_rate(std::span<const int> pass_bits);
SuccessEstimate success_rate(const PromptTrialSet& trials);
SuccessEstimate success_estimate(double p_hat, std::size_t n);

struct WaitingTime {
  double value = 0.0;  // expected attempts, >= 1
  bool censored = false;
};

WaitingTime waiting_time(const SuccessEstimate& estimate);
WaitingTime waiting_time(double p_hat);

struct ExpectedTime {
  double ms = 0.0;
  bool censored = false;
};

// prep + waiting * eval; a censored waiting time gives a censored result.
ExpectedTime expected_time(double prep_ms, double eval_ms, const WaitingTime& waiting);

struct EcdfCurve {
  std::vector<double> values;   // sorted samples
  std::vector<double> heights;  // k / n at each sorted sample
  double at(double x) const;    // fraction of samples <= x
};

struct PercentileTable {
  double min = 0, p25 = 0, median = 0, p75 = 0, p95 = 0, max = 0;
};

// Throws std::invalid_argument on empty input.
EcdfCurve ecdf(std::span<const double> samples);
// Linear interpolation between closest ranks, rank = 1 + q (n - 1).
double quantile(std::span<const double> samples, double q);
double median(std::span<const double> samples);
PercentileTable percentiles(std::span<const double> samples);

struct PairedOutcome {
  std::size_t both_pass = 0;    // a
  std::size_t first_only = 0;   // b
  std::size_t second_only = 0;  // c
  std::size_t both_fail = 0;    // d
  std::size_t total() const { return both_pass + first_only + second_only + both_fail; }
};

PairedOutcome paired_outcome(std::span<const int> first, std::span<const int> second);

struct McNemarResult {
  double chi2 = 0.0;
  double p_value = 1.0;
};

// Survival function of the chi-square distribution with one degree of freedom.
double chi2_1_survival(double x);

// Continuity-corrected, clamped statistic. Throws UndefinedStatistic when b + c = 0.
McNemarResult mcnemar(const PairedOutcome& outcome);

// Average ranks (1-based) with ties sharing the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

// Pearson correlation of tie-averaged ranks. Throws std::invalid_argument
// on length mismatch or length < 3, UndefinedStatistic on a constant series.
double spearman(std::span<const double> x, std::span<const double> y);

struct DifficultySubset {
  double threshold = 0.0;
  std::vector<std::string> prompts;  // sorted by id
};

// Threshold = `q` quantile of all pooled per-model rates; the subset holds
// prompts whose cross-model mean rate is below it.
DifficultySubset difficulty_subset(const std::map<std::string, std::vector<double>>& per_prompt_rates, double q);

struct TokenStats {
  double mean = 0.0;
  double cv = 0.0;  // sample standard deviation / mean
};

// Throws UndefinedStatistic when the mean is zero.
TokenStats token_stats(std::span<const int> counts);

}  // namespace defamekit::stats
