#include "defamekit/bench.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "defamekit/errors.hpp"
#include "defamekit/rng.hpp"
#include "defamekit/text.hpp"

namespace defamekit {

using nlohmann::json;

namespace {

std::vector<json> read_json_entries(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string content = ss.str();
  const std::string trimmed = text::trim(content);
  std::vector<json> out;
  if (trimmed.empty()) return out;
  if (trimmed.front() == '[') {
    try {
      for (auto& e : json::parse(trimmed)) out.push_back(std::move(e));
    } catch (const json::parse_error& e) {
      throw ParseError(path + ": " + e.what());
    }
    return out;
  }
  int line_no = 0;
  for (const auto& line : text::split_lines(content)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what(), line_no, 1);
    }
  }
  return out;
}

std::string default_prompt_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "p%03zu", i);
  return buf;
}

}  // namespace

std::vector<BenchPrompt> load_bench_prompts(const std::string& path) {
  std::vector<BenchPrompt> prompts;
  const auto entries = read_json_entries(path);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const json& e = entries[i];
    BenchPrompt p;
    p.prompt_id = e.contains("prompt_id") ? e["prompt_id"].get<std::string>()
                  : e.contains("id")      ? e["id"].get<std::string>()
                                          : default_prompt_id(i);
    if (e.contains("brief"))
      p.brief = brief_from_json(e["brief"]);
    else if (e.contains("input") && e["input"].contains("brief"))
      p.brief = brief_from_json(e["input"]["brief"]);
    else
      p.brief = brief_from_json(e);
    if (e.contains("prompt") && e["prompt"].is_string()) p.prompt_text = e["prompt"].get<std::string>();
    prompts.push_back(std::move(p));
  }
  return prompts;
}

void run_bench(GeneratorBackend& backend, const Clock& clock, const std::vector<BenchPrompt>& prompts,
               const JudgeSuite& suite, const BenchRunOptions& options,
               const std::function<void(const GenerationRecord&)>& sink) {
  const double prep = backend.load();
  const std::uint64_t model_hash = fnv1a64(backend.model_id());
  for (const auto& prompt : prompts) {
    for (int s = 0; s < options.samples; ++s) {
      SamplingConfig sampling = options.sampling;
      sampling.seed = derive_seed({options.seed, model_hash, fnv1a64(prompt.prompt_id), static_cast<std::uint64_t>(s)});
      EpisodeOptions ep;
      ep.prompt_id = prompt.prompt_id;
      ep.prompt_text = prompt.prompt_text;
      ep.sample_index = s;
      ep.prep_ms = prep;
      sink(generate_until_success(backend, prompt.brief, sampling, suite, options.policy, clock, ep));
    }
  }
  backend.unload();
}

TrialData trials_from_records(const std::vector<GenerationRecord>& records) {
  std::vector<const GenerationRecord*> sorted;
  for (const auto& r : records) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
    return std::tie(a->model_id, a->prompt_id, a->sample_index) < std::tie(b->model_id, b->prompt_id, b->sample_index);
  });

  TrialData data;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  std::set<std::string> prep_seen;
  for (const auto* r : sorted) {
    auto key = std::make_pair(r->model_id, r->prompt_id);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, data.trials.size()).first;
      data.trials.push_back({r->prompt_id, r->model_id, {}, {}, {}});
    }
    auto& t = data.trials[it->second];
    for (const auto& a : r->attempts) {
      if (a.unjudged) continue;
      t.pass_bits.push_back(a.verdict);
      t.token_counts.push_back(a.token_count);
      t.attempt_times_ms.push_back(a.wall_ms);
    }
    data.prep_ms[r->model_id].push_back(r->timing.prep_ms);
  }
  std::erase_if(data.trials, [](const auto& t) { return t.pass_bits.empty(); });
  return data;
}

std::vector<GenerationRecord> load_generation_records(const std::string& path) {
  std::vector<GenerationRecord> records;
  for (const auto& e : read_json_entries(path)) records.push_back(generation_record_from_json(e));
  return records;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(text::trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.push_back(text::trim(cur));
  return cells;
}

TrialData load_trial_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) return {};
  const auto header = split_csv_line(line);
  auto col = [&](const char* name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  };
  const auto c_prompt = col("prompt_id"), c_model = col("model_id"), c_pass = col("pass"), c_tokens = col("tokens"),
             c_ms = col("attempt_ms"), c_prep = col("prep_ms");
  if (!c_prompt || !c_model || !c_pass || !c_tokens || !c_ms)
    throw ParseError(path + ": header must contain prompt_id,model_id,pass,tokens,attempt_ms", 1, 1);

  TrialData data;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() < header.size()) throw ParseError(path + ":" + std::to_string(line_no) + ": too few columns", line_no, 1);
    auto key = std::make_pair(cells[*c_model], cells[*c_prompt]);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, data.trials.size()).first;
      data.trials.push_back({key.second, key.first, {}, {}, {}});
    }
    try {
      auto& t = data.trials[it->second];
      t.pass_bits.push_back(std::stoi(cells[*c_pass]) != 0 ? 1 : 0);
      t.token_counts.push_back(std::stoi(cells[*c_tokens]));
      t.attempt_times_ms.push_back(std::stod(cells[*c_ms]));
      if (c_prep) data.prep_ms[key.first].push_back(std::stod(cells[*c_prep]));
    } catch (const std::logic_error&) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": malformed number", line_no, 1);
    }
  }
  std::sort(data.trials.begin(), data.trials.end(), [](const auto& a, const auto& b) {
    return std::tie(a.model_id, a.prompt_id) < std::tie(b.model_id, b.prompt_id);
  });
  return data;
}

}  // namespace

TrialData load_trials(const std::string& path) {
  if (path.ends_with(".csv")) return load_trial_csv(path);
  return trials_from_records(load_generation_records(path));
}

BenchAnalysis analyze_trials(const TrialData& data, double q) {
  BenchAnalysis out;
  out.difficulty_quantile = q;

  std::map<std::string, std::vector<const stats::PromptTrialSet*>> by_model;
  for (const auto& t : data.trials) by_model[t.model_id].push_back(&t);

  for (const auto& [model, sets] : by_model) {
    ModelAnalysis m;
    m.model_id = model;
    std::vector<int> bits, tokens;
    std::vector<double> times, per_token;
    for (const auto* t : sets) {
      bits.insert(bits.end(), t->pass_bits.begin(), t->pass_bits.end());
      tokens.insert(tokens.end(), t->token_counts.begin(), t->token_counts.end());
      times.insert(times.end(), t->attempt_times_ms.begin(), t->attempt_times_ms.end());
      for (std::size_t i = 0; i < std::min(t->token_counts.size(), t->attempt_times_ms.size()); ++i)
        if (t->token_counts[i] > 0) per_token.push_back(t->attempt_times_ms[i] / t->token_counts[i]);
    }
    m.overall = stats::success_rate(bits);
    if (auto it = data.prep_ms.find(model); it != data.prep_ms.end() && !it->second.empty())
      m.prep_ms = stats::median(it->second);
    if (!times.empty()) m.eval_ms = stats::median(times);
    if (!per_token.empty()) m.per_token_ms = stats::median(per_token);
    if (!tokens.empty()) {
      try {
        m.tokens = stats::token_stats(tokens);
      } catch (const UndefinedStatistic&) {
      }
    }

    std::vector<double> waits, expected;
    for (const auto* t : sets) {
      PromptResult r;
      r.prompt_id = t->prompt_id;
      r.estimate = stats::success_rate(*t);
      r.waiting = stats::waiting_time(r.estimate);
      r.expected = stats::expected_time(m.prep_ms, m.eval_ms, r.waiting);
      if (r.waiting.censored) {
        ++m.censored;
      } else {
        waits.push_back(r.waiting.value);
        expected.push_back(r.expected.ms);
      }
      m.prompts.push_back(std::move(r));
    }
    if (!waits.empty()) {
      m.attempts_table = stats::percentiles(waits);
      m.time_table = stats::percentiles(expected);
      m.attempts_ecdf = stats::ecdf(waits);
      m.time_ecdf = stats::ecdf(expected);
    }
    out.models.push_back(std::move(m));
  }

  // Per-prompt rates across models.
  std::map<std::string, std::vector<double>> rates;
  std::map<std::string, std::map<std::string, const PromptResult*>> lookup;  // model -> prompt -> result
  for (const auto& m : out.models)
    for (const auto& r : m.prompts) {
      rates[r.prompt_id].push_back(r.estimate.p_hat);
      lookup[m.model_id][r.prompt_id] = &r;
    }
  if (!rates.empty()) out.difficulty = stats::difficulty_subset(rates, q);

  std::map<std::string, std::map<std::string, const stats::PromptTrialSet*>> trial_lookup;
  for (const auto& t : data.trials) trial_lookup[t.model_id][t.prompt_id] = &t;

  for (std::size_t i = 0; i < out.models.size(); ++i) {
    for (std::size_t j = i + 1; j < out.models.size(); ++j) {
      PairAnalysis p;
      p.first = out.models[i].model_id;
      p.second = out.models[j].model_id;
      const auto& la = lookup[p.first];
      const auto& lb = lookup[p.second];
      std::vector<double> x, y, sx, sy;
      std::vector<int> bits_a, bits_b;
      for (const auto& [prompt, ra] : la) {
        auto rb = lb.find(prompt);
        if (rb == lb.end()) continue;
        x.push_back(ra->estimate.p_hat);
        y.push_back(rb->second->estimate.p_hat);
        if (out.difficulty && std::binary_search(out.difficulty->prompts.begin(), out.difficulty->prompts.end(), prompt)) {
          sx.push_back(ra->estimate.p_hat);
          sy.push_back(rb->second->estimate.p_hat);
        }
        const auto& ta = trial_lookup[p.first][prompt]->pass_bits;
        const auto& tb = trial_lookup[p.second][prompt]->pass_bits;
        const std::size_t k = std::min(ta.size(), tb.size());
        bits_a.insert(bits_a.end(), ta.begin(), ta.begin() + static_cast<std::ptrdiff_t>(k));
        bits_b.insert(bits_b.end(), tb.begin(), tb.begin() + static_cast<std::ptrdiff_t>(k));
      }
      try {
        p.rho = stats::spearman(x, y);
      } catch (const std::exception&) {
      }
      try {
        p.subset_rho = stats::spearman(sx, sy);
      } catch (const std::exception&) {
      }
      p.outcome = stats::paired_outcome(bits_a, bits_b);
      try {
        p.mcnemar = stats::mcnemar(p.outcome);
      } catch (const UndefinedStatistic&) {
      }
      out.pairs.push_back(std::move(p));
    }
  }
  return out;
}

}  // namespace defamekit
