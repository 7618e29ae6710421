#include "defamekit/runtime.hpp"

#include <algorithm>

#include "defamekit/errors.hpp"
#include "defamekit/rng.hpp"
#include "defamekit/stats.hpp"
#include "defamekit/text.hpp"

namespace defamekit {

using nlohmann::json;

StructuralReport structural_validate(const CampaignBrief& brief, std::string_view raw_text) {
  StructuralReport r;
  PosterParse parsed = parse_poster(raw_text);
  if (!parsed.ok()) {
    r.failures = std::move(parsed.failures);
    return r;
  }
  if (text::normalize_whitespace(parsed.poster->signature) != text::normalize_whitespace(brief.sender.name)) {
    r.failures.push_back({"signature", "does not match sender '" + brief.sender.name + "'"});
    return r;
  }
  r.pass = true;
  r.poster = std::move(parsed.poster);
  return r;
}

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::success: return "success";
    case Outcome::budget_exhausted: return "budget_exhausted";
    case Outcome::attempts_exhausted: return "attempts_exhausted";
    case Outcome::backend_error: return "backend_error";
  }
  return "unknown";
}

Outcome outcome_from_string(std::string_view s) {
  if (s == "success") return Outcome::success;
  if (s == "budget_exhausted") return Outcome::budget_exhausted;
  if (s == "attempts_exhausted") return Outcome::attempts_exhausted;
  if (s == "backend_error") return Outcome::backend_error;
  throw FieldError("outcome", "unknown outcome '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json failures_to_json(const std::vector<SectionFailure>& failures) {
  json a = json::array();
  for (const auto& f : failures) a.push_back({{"section", f.section}, {"reason", f.reason}});
  return a;
}

std::vector<SectionFailure> failures_from_json(const json& a) {
  std::vector<SectionFailure> out;
  for (const auto& f : a) out.push_back({f.at("section").get<std::string>(), f.at("reason").get<std::string>()});
  return out;
}

}  // namespace

json generation_record_to_json(const GenerationRecord& r) {
  json attempts = json::array();
  for (const auto& a : r.attempts) {
    json ja{{"index", a.index},
            {"raw_text", a.raw_text},
            {"structural", {{"pass", a.structural.pass}, {"failures", failures_to_json(a.structural.failures)}}},
            {"verdict", a.verdict},
            {"unjudged", a.unjudged},
            {"token_count", a.token_count},
            {"start_ms", a.start_ms},
            {"end_ms", a.end_ms},
            {"wall_ms", a.wall_ms}};
    if (a.seed) ja["seed"] = *a.seed;
    if (a.judge) ja["judge"] = judge_result_to_json(*a.judge);
    if (!a.judge_error.empty()) ja["judge_error"] = a.judge_error;
    attempts.push_back(std::move(ja));
  }
  json j{{"prompt_id", r.prompt_id},
         {"model_id", r.model_id},
         {"sample_index", r.sample_index},
         {"brief", brief_to_json(r.brief)},
         {"attempts", attempts},
         {"outcome", to_string(r.outcome)},
         {"timing",
          {{"prep_ms", r.timing.prep_ms}, {"per_attempt_ms", r.timing.per_attempt_ms}, {"per_token_ms", r.timing.per_token_ms}}}};
  if (r.poster) j["poster"] = poster_to_json(*r.poster);
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

GenerationRecord generation_record_from_json(const json& j) {
  GenerationRecord r;
  r.prompt_id = j.value("prompt_id", "");
  r.model_id = j.value("model_id", "");
  r.sample_index = j.value("sample_index", 0);
  r.brief = brief_from_json(j.at("brief"));
  for (const auto& ja : j.at("attempts")) {
    AttemptRecord a;
    a.index = ja.value("index", 0);
    if (ja.contains("seed")) a.seed = ja["seed"].get<std::uint64_t>();
    a.raw_text = ja.value("raw_text", "");
    if (ja.contains("structural")) {
      a.structural.pass = ja["structural"].value("pass", false);
      a.structural.failures = failures_from_json(ja["structural"].value("failures", json::array()));
    }
    if (ja.contains("judge")) a.judge = judge_result_from_json(ja["judge"]);
    a.unjudged = ja.value("unjudged", false);
    a.judge_error = ja.value("judge_error", "");
    a.verdict = ja.value("verdict", 0);
    a.token_count = ja.value("token_count", 0);
    a.start_ms = ja.value("start_ms", 0.0);
    a.end_ms = ja.value("end_ms", 0.0);
    a.wall_ms = ja.value("wall_ms", 0.0);
    r.attempts.push_back(std::move(a));
  }
  r.outcome = outcome_from_string(j.at("outcome").get<std::string>());
  if (j.contains("poster")) r.poster = poster_from_json(j["poster"]);
  r.error = j.value("error", "");
  if (j.contains("timing")) {
    const auto& t = j["timing"];
    r.timing.prep_ms = t.value("prep_ms", 0.0);
    r.timing.per_attempt_ms = t.value("per_attempt_ms", std::vector<double>{});
    r.timing.per_token_ms = t.value("per_token_ms", std::vector<double>{});
  }
  return r;
}

// ---------------------------------------------------------------------------
// Retry loop

std::uint64_t attempt_seed(std::uint64_t base, int index) {
  return derive_seed({base, static_cast<std::uint64_t>(index)});
}

GenerationRecord generate_until_success(GeneratorBackend& backend, const CampaignBrief& brief,
                                        const SamplingConfig& sampling, const JudgeSuite& suite,
                                        const RetryPolicy& policy, const Clock& clock, const EpisodeOptions& options) {
  if (policy.max_attempts <= 0) throw ConfigError("max_attempts must be positive");
  if (!(policy.time_budget_ms > 0)) throw ConfigError("time budget must be positive");

  GenerationRecord rec;
  rec.prompt_id = options.prompt_id;
  rec.model_id = backend.model_id();
  rec.sample_index = options.sample_index;
  rec.brief = brief;
  rec.timing.prep_ms = options.prep_ms;
  const std::string prompt_text = options.prompt_text.empty() ? serialize_brief(brief) : options.prompt_text;

  const double start = clock.now_ms();
  double slowest = 0.0;
  for (int i = 0; i < policy.max_attempts; ++i) {
    const double elapsed = clock.now_ms() - start;
    if (i > 0 && (elapsed >= policy.time_budget_ms || elapsed + slowest > policy.time_budget_ms)) {
      rec.outcome = Outcome::budget_exhausted;
      return rec;
    }

    AttemptRecord a;
    a.index = i;
    a.start_ms = elapsed;
    GenerationRequest req{&brief, sampling, options.prompt_id};
    if (sampling.seed) {
      a.seed = attempt_seed(*sampling.seed, i);
      req.sampling.seed = a.seed;
    }

    GenerationOutput out;
    try {
      out = backend.generate(req);
    } catch (const std::exception& e) {
      rec.outcome = Outcome::backend_error;
      rec.error = e.what();
      return rec;
    }
    a.raw_text = std::move(out.raw_text);
    a.token_count = out.token_count;
    a.structural = structural_validate(brief, a.raw_text);
    if (a.structural.pass) {
      try {
        a.judge = judge(suite, brief, prompt_text, *a.structural.poster);
        a.verdict = a.judge->verdict;
      } catch (const JudgeError& e) {
        a.unjudged = true;
        a.judge_error = e.what();
      }
    }
    a.end_ms = clock.now_ms() - start;
    a.wall_ms = a.end_ms - a.start_ms;
    slowest = std::max(slowest, a.wall_ms);

    rec.timing.per_attempt_ms.push_back(a.wall_ms);
    if (a.token_count > 0) rec.timing.per_token_ms.push_back(a.wall_ms / a.token_count);

    const bool success = a.verdict == 1;
    if (success) rec.poster = a.structural.poster;
    rec.attempts.push_back(std::move(a));
    if (success) {
      rec.outcome = Outcome::success;
      return rec;
    }
  }
  rec.outcome = Outcome::attempts_exhausted;
  return rec;
}

// ---------------------------------------------------------------------------

TimingAggregate measure_timing(GeneratorBackend& backend, const std::vector<CampaignBrief>& briefs,
                               const SamplingConfig& sampling, int repetitions, const Clock& clock) {
  if (briefs.empty()) throw std::invalid_argument("measure_timing needs at least one brief");
  TimingAggregate agg;
  std::size_t zero_token = 0;
  for (int rep = 0; rep < repetitions; ++rep) {
    try {
      agg.prep_ms.push_back(backend.load());
    } catch (const std::exception& e) {
      ++agg.failures;
      agg.warnings.push_back(std::string("load failed: ") + e.what());
      continue;
    }
    for (const auto& brief : briefs) {
      const double t0 = clock.now_ms();
      GenerationOutput out;
      try {
        out = backend.generate({&brief, sampling, {}});
      } catch (const std::exception& e) {
        ++agg.failures;
        agg.warnings.push_back(std::string("generation failed: ") + e.what());
        continue;
      }
      const double t = clock.now_ms() - t0;
      agg.attempt_ms.push_back(t);
      agg.token_counts.push_back(out.token_count);
      if (out.token_count > 0)
        agg.per_token_ms.push_back(t / out.token_count);
      else
        ++zero_token;
    }
    backend.unload();
  }
  if (zero_token > 0)
    agg.warnings.push_back(std::to_string(zero_token) + " generation(s) produced no tokens; excluded from per-token median");
  if (!agg.prep_ms.empty()) agg.median_prep_ms = stats::median(agg.prep_ms);
  if (!agg.attempt_ms.empty()) agg.median_attempt_ms = stats::median(agg.attempt_ms);
  if (!agg.per_token_ms.empty()) agg.median_per_token_ms = stats::median(agg.per_token_ms);
  return agg;
}

}  // namespace defamekit
