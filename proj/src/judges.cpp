#include "defamekit/judge.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <future>

#include <httplib.h>

#include "defamekit/errors.hpp"
#include "defamekit/text.hpp"
#include "http_util.hpp"

namespace defamekit {

using nlohmann::json;

Tier default_tier(std::string_view id) {
  return id == criterion::kWriting || id == criterion::kAudience || id == criterion::kRhetorical ? Tier::easy
                                                                                                 : Tier::hard;
}

std::string criterion_question(std::string_view id) {
  if (id == criterion::kOverall) return "Does the output follow from the instructions in the prompt?";
  if (id == criterion::kAngle) return "Does the text successfully convey the intended thematic or humorous angle?";
  if (id == criterion::kIntelligence)
    return "Are all pieces of intelligence incorporated in a coherent and meaningful way?";
  if (id == criterion::kAlignment)
    return "Does the text adhere to the given constraints, remain within the medieval world, and avoid factual "
           "hallucinations or inappropriate language?";
  if (id == criterion::kWriting) return "Is the text well-written and stylistically consistent with a medieval RPG setting?";
  if (id == criterion::kAudience)
    return "Does the text effectively tailor its content and tone to the intended audience group?";
  if (id == criterion::kRhetorical) return "Is the smear campaign successfully directed at the intended target?";
  return "Does the text satisfy the criterion '" + std::string(id) + "'?";
}

int JudgeResult::bit(std::string_view id) const {
  for (const auto& [k, v] : bits)
    if (k == id) return v;
  return -1;
}

json judge_result_to_json(const JudgeResult& r) {
  json bits = json::object();
  for (const auto& [k, v] : r.bits) bits[k] = v;
  json order = json::array();
  for (const auto& [k, v] : r.bits) order.push_back(k);
  json j{{"bits", bits}, {"order", order}, {"verdict", r.verdict}};
  if (!r.warnings.empty()) j["warnings"] = r.warnings;
  return j;
}

JudgeResult judge_result_from_json(const json& j) {
  JudgeResult r;
  const json& bits = j.at("bits");
  if (j.contains("order")) {
    for (const auto& k : j["order"]) r.bits.emplace_back(k.get<std::string>(), bits.at(k.get<std::string>()).get<int>());
  } else {
    for (const auto& [k, v] : bits.items()) r.bits.emplace_back(k, v.get<int>());
  }
  r.verdict = j.at("verdict").get<int>();
  if (j.contains("warnings")) r.warnings = j["warnings"].get<std::vector<std::string>>();
  return r;
}

int verdict_of(const std::vector<std::pair<std::string, int>>& bits) {
  int v = 1;
  for (const auto& [k, b] : bits) v = std::min(v, b);
  return v;
}

JudgeResult judge(const JudgeSuite& suite, const CampaignBrief& brief, std::string_view prompt_text,
                  const PosterOutput& poster) {
  JudgeResult r;
  const auto& criteria = suite.criteria;
  std::vector<int> bits(criteria.size(), 0);

  auto eval = [&](std::size_t i) {
    const int b = criteria[i].evaluate(brief, prompt_text, poster);
    if (b != 0 && b != 1) throw JudgeError(criteria[i].id, "evaluator returned " + std::to_string(b));
    bits[i] = b;
  };

  const std::size_t width = std::max<std::size_t>(1, suite.max_in_flight);
  if (width == 1) {
    for (std::size_t i = 0; i < criteria.size(); ++i) eval(i);
  } else {
    for (std::size_t start = 0; start < criteria.size(); start += width) {
      std::vector<std::future<void>> batch;
      for (std::size_t i = start; i < std::min(criteria.size(), start + width); ++i)
        batch.push_back(std::async(std::launch::async, eval, i));
      std::exception_ptr first;
      for (auto& f : batch) {
        try {
          f.get();
        } catch (...) {
          if (!first) first = std::current_exception();
        }
      }
      if (first) std::rethrow_exception(first);
    }
  }

  for (std::size_t i = 0; i < criteria.size(); ++i) r.bits.emplace_back(criteria[i].id, bits[i]);
  r.verdict = verdict_of(r.bits);
  if (criteria.empty()) r.warnings.push_back("empty judge suite: verdict passes vacuously");
  return r;
}

// ---------------------------------------------------------------------------
// Rulebook judge

namespace {

std::map<std::string, std::vector<std::string>> keyword_map(const json& j, const char* key) {
  std::map<std::string, std::vector<std::string>> m;
  if (j.contains(key))
    for (const auto& [k, v] : j[key].items()) m[k] = v.get<std::vector<std::string>>();
  return m;
}

bool any_keyword(std::string_view haystack, const std::vector<std::string>& keywords) {
  return std::any_of(keywords.begin(), keywords.end(), [&](const auto& k) { return text::contains_ci(haystack, k); });
}

const std::vector<std::string>& lookup_or(const std::map<std::string, std::vector<std::string>>& m,
                                          const std::string& key, std::vector<std::string>& fallback) {
  if (auto it = m.find(key); it != m.end()) return it->second;
  fallback = {key};
  return fallback;
}

bool is_digits(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

std::string full_text(const PosterOutput& p) {
  return p.title + "\n" + p.subtitle + "\n" + p.body + "\n" + p.contrast_line + "\n" + p.signature + "\n" +
         p.catchphrase;
}

int intelligence_bit(const CampaignBrief& b, const PosterOutput& p, const Rulebook& rb) {
  int bit = 1;
  for (const auto& item : b.intelligence) {
    auto it = rb.intel_keywords.find(item.kind);
    if (it == rb.intel_keywords.end()) throw ConfigError("rulebook has no keywords for intel kind '" + item.kind + "'");
    if (!any_keyword(p.body, it->second)) bit = 0;
  }
  return bit;
}

int alignment_bit(const PosterOutput& p, const Rulebook& rb) {
  const std::string all = full_text(p);
  for (const auto& w : rb.banned_words)
    if (text::contains_word_ci(all, w)) return 0;
  for (const auto& token : text::words(p.body))
    if (is_digits(token) &&
        std::find(rb.anachronism_tokens.begin(), rb.anachronism_tokens.end(), token) != rb.anachronism_tokens.end())
      return 0;
  return 1;
}

int angle_bit(const CampaignBrief& b, const PosterOutput& p, const Rulebook& rb) {
  std::vector<std::string> fallback;
  return any_keyword(full_text(p), lookup_or(rb.angle_keywords, b.angle, fallback)) ? 1 : 0;
}

int audience_bit(const CampaignBrief& b, const PosterOutput& p, const Rulebook& rb) {
  std::vector<std::string> fallback;
  return any_keyword(full_text(p), lookup_or(rb.audience_lexicon, b.audience, fallback)) ? 1 : 0;
}

}  // namespace

Rulebook rulebook_from_json(const json& j) {
  Rulebook r;
  r.intel_keywords = keyword_map(j, "intel_keywords");
  r.angle_keywords = keyword_map(j, "angle_keywords");
  r.audience_lexicon = keyword_map(j, "audience_lexicon");
  if (j.contains("banned_words")) r.banned_words = j["banned_words"].get<std::vector<std::string>>();
  if (j.contains("anachronism_tokens")) r.anachronism_tokens = j["anachronism_tokens"].get<std::vector<std::string>>();
  return r;
}

json rulebook_to_json(const Rulebook& r) {
  return json{{"intel_keywords", r.intel_keywords},
              {"angle_keywords", r.angle_keywords},
              {"audience_lexicon", r.audience_lexicon},
              {"banned_words", r.banned_words},
              {"anachronism_tokens", r.anachronism_tokens}};
}

Rulebook load_rulebook(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open rulebook " + path);
  try {
    return rulebook_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw ConfigError("invalid rulebook " + path + ": " + e.what());
  }
}

int rule_judge_evaluate(std::string_view id, const CampaignBrief& b, const PosterOutput& p, const Rulebook& rb) {
  if (id == criterion::kIntelligence) return intelligence_bit(b, p, rb);
  if (id == criterion::kAlignment) return alignment_bit(p, rb);
  if (id == criterion::kAngle) return angle_bit(b, p, rb);
  if (id == criterion::kAudience) return audience_bit(b, p, rb);
  if (id == criterion::kOverall)
    return std::min({intelligence_bit(b, p, rb), alignment_bit(p, rb), angle_bit(b, p, rb), audience_bit(b, p, rb)});
  return 1;  // writing, rhetorical
}

JudgeSuite make_rule_suite(std::shared_ptr<const Rulebook> rulebook) {
  JudgeSuite suite;
  for (const char* id : criterion::kAll) {
    suite.criteria.push_back({id, default_tier(id),
                              [rulebook, cid = std::string(id)](const CampaignBrief& b, std::string_view,
                                                                const PosterOutput& p) {
                                return rule_judge_evaluate(cid, b, p, *rulebook);
                              }});
  }
  return suite;
}

// ---------------------------------------------------------------------------
// Remote judge

RemoteJudgeConfig remote_judge_config_from_json(const json& j) {
  RemoteJudgeConfig c;
  c.endpoint = j.value("endpoint", c.endpoint);
  c.hard_model = j.value("hard_model", c.hard_model);
  c.easy_model = j.value("easy_model", c.easy_model);
  c.api_key = j.value("api_key", c.api_key);
  c.retries = j.value("retries", c.retries);
  c.timeout_s = j.value("timeout_s", c.timeout_s);
  c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
  if (c.endpoint.empty()) throw ConfigError("remote judge needs an endpoint");
  return c;
}

int parse_judge_answer(std::string_view id, std::string_view answer) {
  const auto lines = text::split_lines(answer);
  std::string first;
  for (const auto& l : lines) {
    first = text::trim(l);
    if (!first.empty()) break;
  }
  if (first == "PASS") return 1;
  if (first == "FAIL") return 0;
  throw JudgeError(std::string(id), "judge answer must start with PASS or FAIL, got '" + first + "'");
}

std::string render_judge_prompt(std::string_view id, const CampaignBrief& brief, std::string_view prompt_text,
                                const PosterOutput& poster) {
  std::string out;
  out += "You are grading a smear-campaign poster written for a medieval role-playing game.\n";
  out += "Answer with a single word on the first line: PASS or FAIL.\n\n";
  out += "Question: " + criterion_question(id) + "\n\n";
  out += "Target audience: " + brief.audience + "\nAngle: " + brief.angle + "\n";
  for (const auto& item : brief.intelligence) out += "Intelligence (" + item.kind + "): " + item.body + "\n";
  out += "\nInstructions given to the writer:\n" + std::string(prompt_text) + "\n\n";
  out += "Poster:\n" + poster.raw_text + "\n";
  return out;
}

JudgeSuite make_remote_suite(RemoteJudgeConfig config) {
  if (config.api_key.empty()) {
    if (const char* k = std::getenv(kJudgeApiKeyEnv)) config.api_key = k;
  }
  auto shared = std::make_shared<const RemoteJudgeConfig>(std::move(config));
  JudgeSuite suite;
  suite.max_in_flight = shared->max_in_flight;
  for (const char* id : criterion::kAll) {
    const Tier tier = default_tier(id);
    suite.criteria.push_back(
        {id, tier,
         [shared, tier, cid = std::string(id)](const CampaignBrief& b, std::string_view prompt, const PosterOutput& p) {
           const auto url = detail::split_url(shared->endpoint);
           const json body{
               {"model", tier == Tier::hard ? shared->hard_model : shared->easy_model},
               {"temperature", 0},
               {"max_tokens", 8},
               {"messages", json::array({{{"role", "user"}, {"content", render_judge_prompt(cid, b, prompt, p)}}})}};
           std::string last_error;
           for (int attempt = 0; attempt <= shared->retries; ++attempt) {
             httplib::Client cli(url.origin);
             const auto t = std::chrono::milliseconds(static_cast<long>(shared->timeout_s * 1000));
             cli.set_connection_timeout(t);
             cli.set_read_timeout(t);
             if (!shared->api_key.empty()) cli.set_bearer_token_auth(shared->api_key);
             auto res = cli.Post(url.prefix + "/v1/chat/completions", body.dump(), "application/json");
             if (!res) {
               last_error = httplib::to_string(res.error());
               continue;
             }
             if (res->status != 200) {
               last_error = "HTTP " + std::to_string(res->status);
               continue;
             }
             std::string answer;
             try {
               answer = json::parse(res->body).at("choices").at(0).at("message").at("content").get<std::string>();
             } catch (const json::exception& e) {
               throw JudgeError(cid, std::string("unexpected judge response: ") + e.what());
             }
             return parse_judge_answer(cid, answer);
           }
           throw JudgeError(cid, "judge unavailable after retries: " + last_error);
         }});
  }
  return suite;
}

}  // namespace defamekit
