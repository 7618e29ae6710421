#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "defamekit/clock.hpp"
#include "defamekit/domain.hpp"

namespace defamekit {

struct SamplingConfig {
  double temperature = 0.75;
  double top_p = 0.9;
  int max_new_tokens = 256;
  std::optional<std::uint64_t> seed;
};

nlohmann::json sampling_to_json(const SamplingConfig& s);
SamplingConfig sampling_from_json(const nlohmann::json& j);

struct GenerationRequest {
  const CampaignBrief* brief = nullptr;
  SamplingConfig sampling;
  std::string prompt_id;  // lets scripted mocks vary per prompt
};

struct GenerationOutput {
  std::string raw_text;
  int token_count = 0;
};

// A loaded session serves one generate call at a time.
class GeneratorBackend {
 public:
  virtual ~GeneratorBackend() = default;
  virtual std::string model_id() const = 0;
  // Returns the measured preparation time (model load, cache warm-up) in ms.
  virtual double load() = 0;
  virtual GenerationOutput generate(const GenerationRequest& request) = 0;
  virtual void unload() = 0;
  virtual bool loaded() const = 0;
};

// Offline backend with scripted or stochastic behaviour.
//
// Output selection per call, in priority order:
//   1. `outputs`: verbatim texts, cycled by call index;
//   2. `pass_pattern`: per-call pass/fail flags (last flag repeats);
//   3. Bernoulli draw with the per-prompt probability (or the default).
// Passing calls render a well-formed poster that mentions every intel kind,
// the audience and the angle; failing calls apply `failure_mode`.
struct MockConfig {
  std::string model_id = "mock";
  double prep_ms = 0.0;
  double overhead_ms = 0.0;  // per-attempt cost independent of length
  double per_token_ms = 0.0;
  int tokens_mean = 150;
  int tokens_jitter = 0;  // uniform in [mean - jitter, mean + jitter]
  double pass_probability = 1.0;
  std::map<std::string, double> pass_probabilities;  // by prompt id
  std::vector<bool> pass_pattern;
  std::vector<std::string> outputs;
  std::string failure_mode = "drop_intel";  // drop_intel | drop_catchphrase | long_body | wrong_signature
  std::optional<std::size_t> error_at_call;  // simulate a backend fault on this call index
  std::uint64_t seed = 0;                     // stream used when the request carries no seed
};

MockConfig mock_config_from_json(const nlohmann::json& j);
nlohmann::json mock_config_to_json(const MockConfig& c);

// Poster a mock emits for a brief; `complete` = false drops the last intel item.
std::string render_mock_poster(const CampaignBrief& brief, bool complete);

class MockBackend final : public GeneratorBackend {
 public:
  // When `clock` is given, load/generate advance it by the scripted latencies.
  explicit MockBackend(MockConfig config, VirtualClock* clock = nullptr);

  std::string model_id() const override { return config_.model_id; }
  double load() override;
  GenerationOutput generate(const GenerationRequest& request) override;
  void unload() override { loaded_ = false; }
  bool loaded() const override { return loaded_; }

  const MockConfig& config() const { return config_; }
  std::size_t calls() const { return calls_; }
  // Latency of the most recent generate call.
  double last_latency_ms() const { return last_latency_ms_; }

 private:
  MockConfig config_;
  VirtualClock* clock_;
  bool loaded_ = false;
  std::size_t calls_ = 0;
  double last_latency_ms_ = 0.0;
};

// Local inference server with a completions-style API (llama.cpp server
// `/completion`, or OpenAI-style `/v1/completions` responses). The brief is
// sent as its canonical JSON document; model path, context size and layer
// offload hints travel opaquely in every request.
struct HttpBackendConfig {
  std::string endpoint = "http://127.0.0.1:8080";
  std::string model_id = "http";
  std::string completion_path = "/completion";
  std::string model_path;
  int context_size = 0;
  int gpu_layers = -1;
  nlohmann::json extra = nlohmann::json::object();
  double timeout_s = 30.0;
};

HttpBackendConfig http_backend_config_from_json(const nlohmann::json& j);

class HttpBackend final : public GeneratorBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config);

  std::string model_id() const override { return config_.model_id; }
  double load() override;
  GenerationOutput generate(const GenerationRequest& request) override;
  void unload() override { loaded_ = false; }
  bool loaded() const override { return loaded_; }

 private:
  nlohmann::json request_body(const std::string& prompt, const SamplingConfig& s) const;

  HttpBackendConfig config_;
  bool loaded_ = false;
};

}  // namespace defamekit
