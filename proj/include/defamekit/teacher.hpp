#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <unordered_map>
#include <vector>

namespace defamekit {

// The larger model that writes free-form DAG components and gold outputs.
class TeacherClient {
 public:
  virtual ~TeacherClient() = default;
  virtual std::string model_id() const = 0;
  // Throws TeacherError on failure.
  virtual std::string complete(const std::string& prompt, int max_tokens) = 0;
};

struct TranscriptEntry {
  std::string prompt;  // empty: matches nothing, served in sequence
  std::string response;
};

// Offline teacher. A prompt with an exact transcript match gets that
// response; anything else gets the next unmatched-prompt entry in file
// order, wrapping around.
class ReplayTeacher : public TeacherClient {
 public:
  ReplayTeacher(std::vector<TranscriptEntry> entries, std::string model_id = "replay");
  // JSON Lines, one {"prompt": ..., "response": ...} object per line.
  static std::unique_ptr<ReplayTeacher> from_file(const std::string& path, std::string model_id = "replay");

  std::string model_id() const override { return model_id_; }
  std::string complete(const std::string& prompt, int max_tokens) override;
  std::size_t calls() const;

 private:
  std::vector<TranscriptEntry> entries_;
  std::unordered_map<std::string, std::size_t> by_prompt_;
  std::vector<std::size_t> sequence_;
  std::string model_id_;
  mutable std::mutex mu_;
  std::size_t cursor_ = 0;
  std::size_t calls_ = 0;
};

// Chat-completions endpoint: POST {base_url}/v1/chat/completions.
class HttpTeacher : public TeacherClient {
 public:
  static constexpr const char* kApiKeyEnv = "DEFAMEKIT_TEACHER_API_KEY";

  HttpTeacher(std::string base_url, std::string model, std::string api_key, int max_in_flight = 4,
              double timeout_s = 60.0);
  // Reads the bearer token from DEFAMEKIT_TEACHER_API_KEY (may be unset for local servers).
  static std::unique_ptr<HttpTeacher> from_env(std::string base_url, std::string model, int max_in_flight = 4);

  std::string model_id() const override { return model_; }
  std::string complete(const std::string& prompt, int max_tokens) override;

 private:
  std::string base_url_;
  std::string model_;
  std::string api_key_;
  double timeout_s_;
  std::counting_semaphore<1024> in_flight_;
};

struct TeacherRetry {
  int attempts = 3;
  double initial_backoff_ms = 500.0;
  std::function<void(double ms)> sleep;  // defaults to std::this_thread::sleep_for
};

// Retries with exponential backoff; rethrows the last TeacherError.
std::string complete_with_retry(TeacherClient& teacher, const std::string& prompt, int max_tokens,
                                const TeacherRetry& retry);

}  // namespace defamekit
