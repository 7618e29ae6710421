#include "defamekit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "defamekit/errors.hpp"

namespace defamekit::stats {

SuccessEstimate success_estimate(double p_hat, std::size_t n) {
  if (n == 0) throw std::invalid_argument("success rate needs at least one trial");
  return {p_hat, std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(n)), n};
}

SuccessEstimate success_rate(std::span<const int> bits) {
  if (bits.empty()) throw std::invalid_argument("success rate needs at least one trial");
  const double passes = static_cast<double>(std::count_if(bits.begin(), bits.end(), [](int b) { return b != 0; }));
  return success_estimate(passes / static_cast<double>(bits.size()), bits.size());
}

SuccessEstimate success_rate(const PromptTrialSet& trials) { return success_rate(trials.pass_bits); }

WaitingTime waiting_time(double p_hat) {
  if (p_hat <= 0.0) return {0.0, true};
  return {1.0 / p_hat, false};
}

WaitingTime waiting_time(const SuccessEstimate& e) { return waiting_time(e.p_hat); }

ExpectedTime expected_time(double prep_ms, double eval_ms, const WaitingTime& w) {
  if (w.censored) return {0.0, true};
  return {prep_ms + w.value * eval_ms, false};
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> sorted_copy(std::span<const double> s) {
  if (s.empty()) throw std::invalid_argument("statistic needs at least one sample");
  std::vector<double> v(s.begin(), s.end());
  std::sort(v.begin(), v.end());
  return v;
}

double quantile_sorted(const std::vector<double>& v, double q) {
  q = std::clamp(q, 0.0, 1.0);
  const double rank = 1.0 + q * static_cast<double>(v.size() - 1);  // 1-based
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const double frac = rank - static_cast<double>(lo);
  if (lo >= v.size()) return v.back();
  return v[lo - 1] + frac * (v[lo] - v[lo - 1]);
}

}  // namespace

double EcdfCurve::at(double x) const {
  if (values.empty()) return 0.0;
  const auto k = std::upper_bound(values.begin(), values.end(), x) - values.begin();
  return static_cast<double>(k) / static_cast<double>(values.size());
}

EcdfCurve ecdf(std::span<const double> samples) {
  EcdfCurve c;
  c.values = sorted_copy(samples);
  const double n = static_cast<double>(c.values.size());
  for (std::size_t i = 0; i < c.values.size(); ++i) c.heights.push_back(static_cast<double>(i + 1) / n);
  return c;
}

double quantile(std::span<const double> samples, double q) { return quantile_sorted(sorted_copy(samples), q); }

double median(std::span<const double> samples) { return quantile(samples, 0.5); }

PercentileTable percentiles(std::span<const double> samples) {
  const auto v = sorted_copy(samples);
  return {v.front(), quantile_sorted(v, 0.25), quantile_sorted(v, 0.5),
          quantile_sorted(v, 0.75), quantile_sorted(v, 0.95), v.back()};
}

// ---------------------------------------------------------------------------

PairedOutcome paired_outcome(std::span<const int> first, std::span<const int> second) {
  if (first.size() != second.size()) throw std::invalid_argument("paired outcomes need equal lengths");
  PairedOutcome o;
  for (std::size_t i = 0; i < first.size(); ++i) {
    const bool a = first[i] != 0, b = second[i] != 0;
    if (a && b) ++o.both_pass;
    else if (a) ++o.first_only;
    else if (b) ++o.second_only;
    else ++o.both_fail;
  }
  return o;
}

double chi2_1_survival(double x) {
  if (x <= 0.0) return 1.0;
  return std::erfc(std::sqrt(x / 2.0));
}

McNemarResult mcnemar(const PairedOutcome& o) {
  const double b = static_cast<double>(o.first_only);
  const double c = static_cast<double>(o.second_only);
  if (b + c == 0.0) throw UndefinedStatistic("McNemar's test is undefined without discordant pairs");
  const double corrected = std::max(std::fabs(b - c) - 1.0, 0.0);
  const double chi2 = corrected * corrected / (b + c);
  return {chi2, chi2_1_survival(chi2)};
}

// ---------------------------------------------------------------------------

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman needs series of equal length");
  if (x.size() < 3) throw std::invalid_argument("spearman needs at least three pairs");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(rx.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedStatistic("spearman is undefined for a constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// ---------------------------------------------------------------------------

DifficultySubset difficulty_subset(const std::map<std::string, std::vector<double>>& rates, double q) {
  if (rates.empty()) throw std::invalid_argument("difficulty subset needs at least one prompt");
  std::vector<double> pooled;
  for (const auto& [id, r] : rates) pooled.insert(pooled.end(), r.begin(), r.end());
  DifficultySubset out;
  out.threshold = quantile(pooled, q);
  for (const auto& [id, r] : rates) {
    if (r.empty()) continue;
    const double mean = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
    if (mean < out.threshold) out.prompts.push_back(id);
  }
  return out;
}

TokenStats token_stats(std::span<const int> counts) {
  if (counts.empty()) throw std::invalid_argument("token stats need at least one count");
  const double n = static_cast<double>(counts.size());
  double sum = 0;
  for (int c : counts) sum += c;
  const double mean = sum / n;
  if (mean == 0.0) throw UndefinedStatistic("coefficient of variation is undefined for zero mean");
  if (counts.size() == 1) return {mean, 0.0};
  double ss = 0;
  for (int c : counts) ss += (c - mean) * (c - mean);
  return {mean, std::sqrt(ss / (n - 1.0)) / mean};
}

}  // namespace defamekit::stats
