#include "defamekit/backend.hpp"

#include <chrono>

#include <httplib.h>

#include "defamekit/errors.hpp"
#include "defamekit/rng.hpp"
#include "defamekit/text.hpp"
#include "http_util.hpp"

namespace defamekit {

using nlohmann::json;

json sampling_to_json(const SamplingConfig& s) {
  json j{{"temperature", s.temperature}, {"top_p", s.top_p}, {"max_new_tokens", s.max_new_tokens}};
  if (s.seed) j["seed"] = *s.seed;
  return j;
}

SamplingConfig sampling_from_json(const json& j) {
  SamplingConfig s;
  s.temperature = j.value("temperature", s.temperature);
  s.top_p = j.value("top_p", s.top_p);
  s.max_new_tokens = j.value("max_new_tokens", s.max_new_tokens);
  if (j.contains("seed") && !j["seed"].is_null()) s.seed = j["seed"].get<std::uint64_t>();
  if (s.temperature < 0) throw ConfigError("temperature must be >= 0");
  if (!(s.top_p > 0 && s.top_p <= 1)) throw ConfigError("top_p must be in (0, 1]");
  if (s.max_new_tokens <= 0) throw ConfigError("max_new_tokens must be positive");
  return s;
}

// ---------------------------------------------------------------------------
// Mock

MockConfig mock_config_from_json(const json& j) {
  MockConfig c;
  c.model_id = j.value("model_id", c.model_id);
  c.prep_ms = j.value("prep_ms", c.prep_ms);
  c.overhead_ms = j.value("overhead_ms", c.overhead_ms);
  c.per_token_ms = j.value("per_token_ms", c.per_token_ms);
  c.tokens_mean = j.value("tokens_mean", c.tokens_mean);
  c.tokens_jitter = j.value("tokens_jitter", c.tokens_jitter);
  c.pass_probability = j.value("pass_probability", c.pass_probability);
  if (j.contains("pass_probabilities"))
    c.pass_probabilities = j["pass_probabilities"].get<std::map<std::string, double>>();
  if (j.contains("pass_pattern")) c.pass_pattern = j["pass_pattern"].get<std::vector<bool>>();
  if (j.contains("outputs")) c.outputs = j["outputs"].get<std::vector<std::string>>();
  c.failure_mode = j.value("failure_mode", c.failure_mode);
  if (j.contains("error_at_call") && !j["error_at_call"].is_null()) c.error_at_call = j["error_at_call"].get<std::size_t>();
  c.seed = j.value("seed", c.seed);
  if (c.pass_probability < 0 || c.pass_probability > 1) throw ConfigError("pass_probability must be in [0, 1]");
  for (const auto& [id, p] : c.pass_probabilities)
    if (p < 0 || p > 1) throw ConfigError("pass probability for '" + id + "' must be in [0, 1]");
  if (c.tokens_mean < 0 || c.tokens_jitter < 0 || c.tokens_jitter > c.tokens_mean)
    throw ConfigError("token settings must satisfy 0 <= jitter <= mean");
  return c;
}

json mock_config_to_json(const MockConfig& c) {
  json j{{"model_id", c.model_id},         {"prep_ms", c.prep_ms},
         {"overhead_ms", c.overhead_ms},   {"per_token_ms", c.per_token_ms},
         {"tokens_mean", c.tokens_mean},   {"tokens_jitter", c.tokens_jitter},
         {"pass_probability", c.pass_probability}, {"pass_probabilities", c.pass_probabilities},
         {"pass_pattern", c.pass_pattern}, {"outputs", c.outputs},
         {"failure_mode", c.failure_mode}, {"seed", c.seed}};
  if (c.error_at_call) j["error_at_call"] = *c.error_at_call;
  return j;
}

namespace {

std::string first_name(const std::string& name) {
  const auto space = name.find(' ');
  return space == std::string::npos ? name : name.substr(0, space);
}

std::string capitalized(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

std::string poster_text(const CampaignBrief& b, bool complete, std::string_view failure_mode) {
  const std::string target = first_name(b.target.name);
  std::size_t mentioned = b.intelligence.size();
  if (!complete && failure_mode == "drop_intel") mentioned = mentioned == 0 ? 0 : mentioned - 1;

  std::string intel;
  for (std::size_t i = 0; i < mentioned; ++i) {
    if (i > 0) intel += " and ";
    intel += "whispered " + b.intelligence[i].kind;
  }
  std::string body = "Behold " + target + " the Foolhardy";
  body += intel.empty() ? ", whose deeds speak for themselves!" : ", known for " + intel + "!";
  body += " Mark the " + b.angle + " behind that name. " + capitalized(b.audience) +
          ", would you trust your fate to such a fool?";
  if (!complete && failure_mode == "long_body") {
    while (text::utf8_length(body) <= kMaxBodyChars) body += " Shame upon shame, folly upon folly.";
  }

  std::string out;
  out += target + " the Foolhardy\n";
  out += "The " + b.target.profession + " of " + b.target.faction + "\n\n";
  out += body + "\n\n";
  out += b.sender.name + " stands for honor, unlike " + target + ".\n\n";
  out += (!complete && failure_mode == "wrong_signature" ? b.target.name : b.sender.name) + "\n";
  if (complete || failure_mode != "drop_catchphrase")
    out += "\xE2\x80\x9C" + b.sender.catchphrases.public_line + "\xE2\x80\x9D\n";
  return out;
}

}  // namespace

std::string render_mock_poster(const CampaignBrief& brief, bool complete) {
  return poster_text(brief, complete, "drop_intel");
}

MockBackend::MockBackend(MockConfig config, VirtualClock* clock) : config_(std::move(config)), clock_(clock) {}

double MockBackend::load() {
  loaded_ = true;
  if (clock_) clock_->advance(config_.prep_ms);
  return config_.prep_ms;
}

GenerationOutput MockBackend::generate(const GenerationRequest& req) {
  if (!loaded_) throw BackendError("mock backend used before load()");
  if (!req.brief) throw BackendError("generation request without a brief");
  const std::size_t call = calls_++;
  if (config_.error_at_call && *config_.error_at_call == call) throw BackendError("scripted backend fault");

  const std::uint64_t stream_seed = req.sampling.seed
                                        ? derive_seed({*req.sampling.seed, fnv1a64(req.prompt_id)})
                                        : derive_seed({config_.seed, call, fnv1a64(req.prompt_id)});
  SeedStream rng(stream_seed);

  GenerationOutput out;
  if (!config_.outputs.empty()) {
    out.raw_text = config_.outputs[call % config_.outputs.size()];
  } else {
    bool pass;
    if (!config_.pass_pattern.empty()) {
      pass = config_.pass_pattern[std::min(call, config_.pass_pattern.size() - 1)];
    } else {
      double p = config_.pass_probability;
      if (auto it = config_.pass_probabilities.find(req.prompt_id); it != config_.pass_probabilities.end()) p = it->second;
      pass = rng.uniform() < p;
    }
    out.raw_text = poster_text(*req.brief, pass, config_.failure_mode);
  }
  out.token_count = config_.tokens_mean;
  if (config_.tokens_jitter > 0)
    out.token_count += static_cast<int>(rng.below(2 * static_cast<std::uint64_t>(config_.tokens_jitter) + 1)) -
                       config_.tokens_jitter;
  last_latency_ms_ = config_.overhead_ms + out.token_count * config_.per_token_ms;
  if (clock_) clock_->advance(last_latency_ms_);
  return out;
}

// ---------------------------------------------------------------------------
// HTTP

HttpBackendConfig http_backend_config_from_json(const json& j) {
  HttpBackendConfig c;
  c.endpoint = j.value("endpoint", c.endpoint);
  c.model_id = j.value("model_id", c.model_id);
  c.completion_path = j.value("completion_path", c.completion_path);
  c.model_path = j.value("model_path", c.model_path);
  c.context_size = j.value("context_size", c.context_size);
  c.gpu_layers = j.value("gpu_layers", c.gpu_layers);
  if (j.contains("extra")) c.extra = j["extra"];
  c.timeout_s = j.value("timeout_s", c.timeout_s);
  return c;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {}

json HttpBackend::request_body(const std::string& prompt, const SamplingConfig& s) const {
  json body = config_.extra.is_object() ? config_.extra : json::object();
  body["prompt"] = prompt;
  body["temperature"] = s.temperature;
  body["top_p"] = s.top_p;
  body["n_predict"] = s.max_new_tokens;
  body["max_tokens"] = s.max_new_tokens;
  if (s.seed) body["seed"] = *s.seed;
  if (!config_.model_path.empty()) body["model"] = config_.model_path;
  if (config_.context_size > 0) body["n_ctx"] = config_.context_size;
  if (config_.gpu_layers >= 0) body["n_gpu_layers"] = config_.gpu_layers;
  return body;
}

namespace {

httplib::Client make_client(const std::string& origin, double timeout_s) {
  httplib::Client cli(origin);
  const auto t = std::chrono::milliseconds(static_cast<long>(timeout_s * 1000));
  cli.set_connection_timeout(t);
  cli.set_read_timeout(t);
  cli.set_write_timeout(t);
  return cli;
}

}  // namespace

double HttpBackend::load() {
  const auto url = detail::split_url(config_.endpoint);
  auto cli = make_client(url.origin, config_.timeout_s);
  const auto start = std::chrono::steady_clock::now();
  auto health = cli.Get(url.prefix + "/health");
  if (!health) throw BackendError("backend unreachable: " + httplib::to_string(health.error()));
  if (health->status != 200) throw BackendError("backend not ready: HTTP " + std::to_string(health->status));
  // Warm-up call so the first real attempt does not pay for cache setup.
  SamplingConfig warm;
  warm.max_new_tokens = 1;
  auto res = cli.Post(url.prefix + config_.completion_path, request_body("{}", warm).dump(), "application/json");
  if (!res) throw BackendError("backend warm-up failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw BackendError("backend warm-up returned HTTP " + std::to_string(res->status));
  loaded_ = true;
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

GenerationOutput HttpBackend::generate(const GenerationRequest& req) {
  if (!loaded_) throw BackendError("http backend used before load()");
  const auto url = detail::split_url(config_.endpoint);
  auto cli = make_client(url.origin, config_.timeout_s);
  const std::string prompt = serialize_brief(*req.brief) + "\n";
  auto res = cli.Post(url.prefix + config_.completion_path, request_body(prompt, req.sampling).dump(), "application/json");
  if (!res) throw BackendError("backend request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw BackendError("backend returned HTTP " + std::to_string(res->status));
  GenerationOutput out;
  try {
    const json j = json::parse(res->body);
    if (j.contains("content")) {
      out.raw_text = j["content"].get<std::string>();
      out.token_count = j.value("tokens_predicted", 0);
    } else {
      out.raw_text = j.at("choices").at(0).at("text").get<std::string>();
      if (j.contains("usage")) out.token_count = j["usage"].value("completion_tokens", 0);
    }
  } catch (const json::exception& e) {
    throw BackendError(std::string("unexpected backend response: ") + e.what());
  }
  return out;
}

}  // namespace defamekit
