#include "defamekit/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "defamekit/errors.hpp"
#include "defamekit/game.hpp"

namespace defamekit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string resolve(const std::string& p, const std::string& base_dir) {
  if (p.empty()) return p;
  fs::path path(p);
  if (path.is_relative() && !base_dir.empty()) path = fs::path(base_dir) / path;
  return path.lexically_normal().string();
}

std::string existing_file(const std::string& p, const std::string& base_dir, const std::string& what) {
  const auto path = resolve(p, base_dir);
  if (!fs::is_regular_file(path)) throw ConfigError(what + " not found: " + path);
  return path;
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

json read_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("not valid JSON: " + path);
  return j;
}

BackendSpec backend_spec_from_json(const json& j) {
  BackendSpec b;
  if (j.is_null()) return b;
  b.kind = j.value("kind", b.kind);
  if (b.kind == "mock") {
    b.mock = mock_config_from_json(j.value("mock", json::object()));
  } else if (b.kind == "http") {
    b.http = http_backend_config_from_json(j.value("http", json::object()));
  } else {
    throw ConfigError("backend.kind must be mock or http");
  }
  return b;
}

JudgeSpec judge_spec_from_json(const json& j, const std::string& base_dir) {
  JudgeSpec s;
  if (!j.is_null()) s.kind = j.value("kind", s.kind);
  if (s.kind == "rules") {
    if (j.is_null() || !j.contains("rulebook")) throw ConfigError("judge.rulebook is required for the rules judge");
    const auto& rb = j.at("rulebook");
    if (rb.is_string()) {
      s.rulebook_path = existing_file(rb.get<std::string>(), base_dir, "rulebook");
      s.rulebook = std::make_shared<const Rulebook>(load_rulebook(s.rulebook_path));
    } else {
      s.rulebook = std::make_shared<const Rulebook>(rulebook_from_json(rb));
    }
  } else if (s.kind == "remote") {
    s.remote = remote_judge_config_from_json(j.value("remote", json::object()));
  } else {
    throw ConfigError("judge.kind must be rules or remote");
  }
  return s;
}

AppConfig app_config_from_json(const json& j, const std::string& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  AppConfig c;
  c.backend = backend_spec_from_json(j.value("backend", json()));
  c.judge = judge_spec_from_json(j.value("judge", json()), base_dir);
  if (j.contains("sampling")) c.sampling = sampling_from_json(j.at("sampling"));
  if (j.contains("retry")) {
    const auto& r = j.at("retry");
    c.retry.max_attempts = r.value("max_attempts", c.retry.max_attempts);
    c.retry.time_budget_ms = r.value("time_budget_ms", c.retry.time_budget_ms);
    if (c.retry.max_attempts < 1) throw ConfigError("retry.max_attempts must be >= 1");
    if (!(c.retry.time_budget_ms > 0)) throw ConfigError("retry.time_budget_ms must be positive");
  }
  if (!j.contains("conflict")) throw ConfigError("config needs a conflict section");
  const auto& conflict = j.at("conflict");
  c.conflict = conflict.is_string() ? read_json_file(existing_file(conflict.get<std::string>(), base_dir, "conflict"))
                                    : conflict;
  if (j.contains("rule")) c.conflict["rule"] = j.at("rule");
  conflict_from_json(c.conflict);  // validate early
  c.sessions_dir = resolve(j.value("sessions_dir", std::string{}), base_dir);
  c.static_dir = resolve(j.value("static_dir", std::string{}), base_dir);
  if (!c.static_dir.empty() && !fs::is_directory(c.static_dir))
    throw ConfigError("static_dir not found: " + c.static_dir);
  c.port = j.value("port", c.port);
  if (c.port < 1 || c.port > 65535) throw ConfigError("port must lie in [1, 65535]");
  return c;
}

AppConfig load_app_config(const std::string& path) {
  if (!fs::is_regular_file(path)) throw ConfigError("config not found: " + path);
  const auto base = fs::path(path).parent_path().string();
  return app_config_from_json(read_json_file(path), base);
}

std::unique_ptr<GeneratorBackend> make_backend(const BackendSpec& spec, VirtualClock* clock) {
  if (spec.kind == "http") return std::make_unique<HttpBackend>(spec.http);
  return std::make_unique<MockBackend>(spec.mock, clock);
}

JudgeSuite make_judge_suite(const JudgeSpec& spec) {
  if (spec.kind == "remote") return make_remote_suite(spec.remote);
  return make_rule_suite(spec.rulebook);
}

}  // namespace defamekit
