#pragma once

// Application configuration for the service and CLI: which backend and
// judge to build, sampling and retry defaults, the conflict setup and
// file locations.

#include <memory>
#include <string>

#include <json.hpp>

#include "defamekit/backend.hpp"
#include "defamekit/clock.hpp"
#include "defamekit/judge.hpp"
#include "defamekit/runtime.hpp"

namespace defamekit {

struct BackendSpec {
  std::string kind = "mock";  // mock | http
  MockConfig mock;
  HttpBackendConfig http;
};

struct JudgeSpec {
  std::string kind = "rules";  // rules | remote
  std::string rulebook_path;
  std::shared_ptr<const Rulebook> rulebook;
  RemoteJudgeConfig remote;
};

struct AppConfig {
  BackendSpec backend;
  JudgeSpec judge;
  SamplingConfig sampling;
  RetryPolicy retry;
  nlohmann::json conflict;  // conflict configuration document
  std::string sessions_dir;
  std::string static_dir;
  int port = 8080;
};

BackendSpec backend_spec_from_json(const nlohmann::json& j);
// Relative paths resolve against `base_dir`. Referenced files must exist.
JudgeSpec judge_spec_from_json(const nlohmann::json& j, const std::string& base_dir);
AppConfig app_config_from_json(const nlohmann::json& j, const std::string& base_dir);
AppConfig load_app_config(const std::string& path);

std::unique_ptr<GeneratorBackend> make_backend(const BackendSpec& spec, VirtualClock* clock = nullptr);
JudgeSuite make_judge_suite(const JudgeSpec& spec);

// Small file helpers shared by the CLI and service.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
nlohmann::json read_json_file(const std::string& path);

}  // namespace defamekit
