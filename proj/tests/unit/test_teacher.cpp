#include <doctest.h>

#include <atomic>

#include "defamekit/errors.hpp"
#include "defamekit/teacher.hpp"
#include "unit/fixtures.hpp"
#include "unit/stub_server.hpp"

using namespace defamekit;
using nlohmann::json;

TEST_SUITE("teacher") {

TEST_CASE("replay teacher matches prompts first, then serves the sequence") {
  ReplayTeacher t(std::vector<TranscriptEntry>{{"", "one"}, {"exact", "matched"}, {"", "two"}});
  CHECK(t.complete("anything", 10) == "one");
  CHECK(t.complete("exact", 10) == "matched");
  CHECK(t.complete("other", 10) == "two");
  CHECK(t.complete("again", 10) == "one");
  CHECK(t.calls() == 4);
}

TEST_CASE("replay teacher without unmatched entries fails") {
  ReplayTeacher t(std::vector<TranscriptEntry>{{"only", "this"}});
  CHECK(t.complete("only", 5) == "this");
  CHECK_THROWS_AS(t.complete("else", 5), TeacherError);
}

TEST_CASE("replay transcript file") {
  auto t = ReplayTeacher::from_file(fixtures::data("dag/teacher_replay.jsonl"));
  CHECK_FALSE(t->complete("x", 10).empty());
  CHECK_THROWS_AS(ReplayTeacher::from_file(fixtures::data("missing.jsonl")), TeacherError);
}

namespace {

class FlakyTeacher : public TeacherClient {
 public:
  explicit FlakyTeacher(int failures) : failures_(failures) {}
  std::string model_id() const override { return "flaky"; }
  std::string complete(const std::string&, int) override {
    if (calls++ < failures_) throw TeacherError("transient");
    return "fine";
  }
  int calls = 0;

 private:
  int failures_;
};

}  // namespace

TEST_CASE("retry doubles the backoff and rethrows the last error") {
  std::vector<double> waits;
  TeacherRetry retry;
  retry.attempts = 3;
  retry.initial_backoff_ms = 10;
  retry.sleep = [&](double ms) { waits.push_back(ms); };

  FlakyTeacher ok(2);
  CHECK(complete_with_retry(ok, "p", 5, retry) == "fine");
  CHECK(waits == std::vector<double>{10, 20});

  waits.clear();
  FlakyTeacher bad(5);
  CHECK_THROWS_AS(complete_with_retry(bad, "p", 5, retry), TeacherError);
  CHECK(bad.calls == 3);
  CHECK(waits.size() == 2);
}

TEST_CASE("http teacher speaks chat completions") {
  StubServer stub;
  std::string auth;
  json seen;
  stub.server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    seen = json::parse(req.body);
    res.set_content(json{{"choices", {{{"message", {{"content", "a rumour"}}}}}}}.dump(), "application/json");
  });
  stub.server.Post("/broken/v1/chat/completions",
                   [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  stub.start();

  HttpTeacher t(stub.url(), "teacher-x", "secret");
  CHECK(t.complete("tell me", 64) == "a rumour");
  CHECK(auth == "Bearer secret");
  CHECK(seen["model"] == "teacher-x");
  CHECK(seen["max_tokens"] == 64);
  CHECK(seen["messages"][0]["content"] == "tell me");

  HttpTeacher broken(stub.url() + "/broken", "m", "");
  CHECK_THROWS_AS(broken.complete("x", 1), TeacherError);
  HttpTeacher nobody("http://127.0.0.1:1", "m", "", 1, 0.5);
  CHECK_THROWS_AS(nobody.complete("x", 1), TeacherError);
}

}  // TEST_SUITE
