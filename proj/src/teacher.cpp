#include "defamekit/teacher.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "defamekit/errors.hpp"
#include "http_util.hpp"

namespace defamekit {

using nlohmann::json;

ReplayTeacher::ReplayTeacher(std::vector<TranscriptEntry> entries, std::string model_id)
    : entries_(std::move(entries)), model_id_(std::move(model_id)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].prompt.empty())
      sequence_.push_back(i);
    else
      by_prompt_.emplace(entries_[i].prompt, i);
  }
}

std::unique_ptr<ReplayTeacher> ReplayTeacher::from_file(const std::string& path, std::string model_id) {
  std::ifstream in(path);
  if (!in) throw TeacherError("cannot open transcript " + path);
  std::vector<TranscriptEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      entries.push_back({j.value("prompt", ""), j.at("response").get<std::string>()});
    } catch (const json::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what(), line_no, 1);
    }
  }
  return std::make_unique<ReplayTeacher>(std::move(entries), std::move(model_id));
}

std::string ReplayTeacher::complete(const std::string& prompt, int /*max_tokens*/) {
  std::lock_guard lock(mu_);
  ++calls_;
  if (auto it = by_prompt_.find(prompt); it != by_prompt_.end()) return entries_[it->second].response;
  if (sequence_.empty()) throw TeacherError("replay transcript has no response for prompt");
  const auto& e = entries_[sequence_[cursor_ % sequence_.size()]];
  ++cursor_;
  return e.response;
}

std::size_t ReplayTeacher::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

HttpTeacher::HttpTeacher(std::string base_url, std::string model, std::string api_key, int max_in_flight,
                         double timeout_s)
    : base_url_(std::move(base_url)),
      model_(std::move(model)),
      api_key_(std::move(api_key)),
      timeout_s_(timeout_s),
      in_flight_(std::max(1, max_in_flight)) {}

std::unique_ptr<HttpTeacher> HttpTeacher::from_env(std::string base_url, std::string model, int max_in_flight) {
  const char* key = std::getenv(kApiKeyEnv);
  return std::make_unique<HttpTeacher>(std::move(base_url), std::move(model), key ? key : "", max_in_flight);
}

std::string HttpTeacher::complete(const std::string& prompt, int max_tokens) {
  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{in_flight_};

  const auto url = detail::split_url(base_url_);
  httplib::Client cli(url.origin);
  const auto timeout = std::chrono::milliseconds(static_cast<long>(timeout_s_ * 1000));
  cli.set_connection_timeout(timeout);
  cli.set_read_timeout(timeout);
  if (!api_key_.empty()) cli.set_bearer_token_auth(api_key_);

  const json body{{"model", model_},
                  {"max_tokens", max_tokens},
                  {"messages", json::array({{{"role", "user"}, {"content", prompt}}})}};
  auto res = cli.Post(url.prefix + "/v1/chat/completions", body.dump(), "application/json");
  if (!res) throw TeacherError("teacher request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw TeacherError("teacher returned HTTP " + std::to_string(res->status));
  try {
    const json j = json::parse(res->body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw TeacherError(std::string("unexpected teacher response: ") + e.what());
  }
}

std::string complete_with_retry(TeacherClient& teacher, const std::string& prompt, int max_tokens,
                                const TeacherRetry& retry) {
  double backoff = retry.initial_backoff_ms;
  const int attempts = std::max(1, retry.attempts);
  for (int a = 1;; ++a) {
    try {
      return teacher.complete(prompt, max_tokens);
    } catch (const TeacherError&) {
      if (a >= attempts) throw;
    }
    if (retry.sleep)
      retry.sleep(backoff);
    else
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(backoff));
    backoff *= 2;
  }
}

}  // namespace defamekit
