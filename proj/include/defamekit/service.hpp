#pragma once

// REST service hosting conflict sessions. Campaign generation runs as
// asynchronous jobs on a per-session worker; clients poll job status.
//
//   POST /api/session                  -> {session_id, state}
//   GET  /api/session/{id}/state
//   POST /api/session/{id}/action      -> {job_id} or {state[, job_id]}
//   GET  /api/session/{id}/job/{job}
//   GET  /api/session/{id}/posters
//   POST /api/preview                  -> generation record, never touches a session

#include <memory>
#include <string>

#include <json.hpp>

#include "defamekit/config.hpp"

namespace defamekit {

enum class JobStatus { pending, running, done, failed };
const char* to_string(JobStatus s);

struct ServiceResponse {
  int status = 200;
  nlohmann::json body;
};

class Service {
 public:
  explicit Service(AppConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Routes one request. Used by the HTTP layer and directly by tests.
  ServiceResponse handle(const std::string& method, const std::string& path, const std::string& body);

  // Blocks until every queued job of the session has finished (tests, shutdown).
  void drain(const std::string& session_id);

  // Binds and serves on a background thread; throws ConfigError when the
  // port cannot be bound. Returns the bound port.
  int start(const std::string& host, int port);
  // Serves on the calling thread until stop().
  void run(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace defamekit
