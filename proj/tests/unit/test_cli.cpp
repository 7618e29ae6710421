#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "defamekit/cli.hpp"
#include "defamekit/config.hpp"
#include "defamekit/text.hpp"
#include "unit/fixtures.hpp"

using namespace defamekit;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli_dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<json> jsonl(const std::string& path) {
  std::vector<json> rows;
  for (const auto& line : text::split_lines(read_text_file(path)))
    if (!text::trim(line).empty()) rows.push_back(json::parse(line));
  return rows;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit 64") {
  CHECK(cli({}).code == exit_code::kUsage);
  CHECK(cli({"frobnicate"}).code == exit_code::kUsage);
  CHECK(cli({"dag", "validate"}).code == exit_code::kUsage);
  CHECK(cli({"bench", "run", "--prompts", "x", "--out", "y", "--backend", "tpu"}).code == exit_code::kUsage);
  const auto help = cli({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("bench") != std::string::npos);
}

TEST_CASE("dag validate") {
  const auto ok = cli({"dag", "validate", fixtures::data("dag/sample_dag.json")});
  CHECK(ok.code == 0);
  CHECK(ok.out == "ok: 18 nodes, 16 edges\n");
  const auto cyc = cli({"dag", "validate", fixtures::data("dag/cyclic_dag.json")});
  CHECK(cyc.code == exit_code::kValidation);
  CHECK(cyc.err.find("cycle: a,b") != std::string::npos);
  CHECK(cli({"dag", "validate", fixtures::data("dag/missing.json")}).code != 0);
}

TEST_CASE("dag run and dataset generate/split") {
  fixtures::TempDir dir("cli_dataset");
  const auto replay = fixtures::data("dag/teacher_replay.jsonl");
  const auto run = cli({"dag", "run", fixtures::data("dag/sample_dag.json"), "--seed", "4", "--count", "3", "--out",
                        dir.file("inputs.jsonl"), "--replay", replay});
  REQUIRE_MESSAGE(run.code == 0, run.err);
  const auto inputs = jsonl(dir.file("inputs.jsonl"));
  REQUIRE(inputs.size() == 3);
  CHECK(inputs[2]["index"] == 2);
  CHECK(inputs[0]["input"].contains("brief"));

  CHECK(cli({"dag", "run", fixtures::data("dag/sample_dag.json"), "--out", dir.file("x.jsonl")}).code == exit_code::kUsage);

  const auto gen = cli({"dataset", "generate", "--dag", fixtures::data("dag/sample_dag.json"), "--template",
                        fixtures::data("dag/template.txt"), "--replay", replay, "--count", "20", "--seed", "1",
                        "--out", dir.file("pairs.jsonl")});
  REQUIRE_MESSAGE(gen.code == 0, gen.err);
  CHECK(jsonl(dir.file("pairs.jsonl")).size() == 20);

  const auto split = cli({"dataset", "split", "--in", dir.file("pairs.jsonl"), "--ratio", "0.8", "--seed", "2"});
  REQUIRE_MESSAGE(split.code == 0, split.err);
  CHECK(jsonl(dir.file("pairs.train.jsonl")).size() == 16);
  CHECK(jsonl(dir.file("pairs.eval.jsonl")).size() == 4);
  CHECK(cli({"dataset", "split", "--in", dir.file("pairs.jsonl"), "--ratio", "1.5", "--seed", "2"}).code ==
        exit_code::kValidation);
  CHECK(cli({"dataset", "split", "--in", dir.file("none.jsonl"), "--ratio", "0.5", "--seed", "2"}).code == exit_code::kIo);

  const auto judged = cli({"judge", "run", "--in", dir.file("pairs.jsonl"), "--rulebook", fixtures::data("rulebook.json"),
                           "--out", dir.file("judged.jsonl")});
  REQUIRE_MESSAGE(judged.code == 0, judged.err);
  CHECK(jsonl(dir.file("judged.jsonl")).size() == 20);
}

TEST_CASE("judge run on the reference posters") {
  fixtures::TempDir dir("cli_judge");
  const auto brief = brief_to_json(fixtures::appendix_brief());
  std::string lines;
  for (const char* name : {"gold", "quant4"}) lines += json{{"brief", brief}, {"output", fixtures::poster(name)}}.dump() + "\n";
  lines += json{{"brief", brief}, {"output", "not a poster"}}.dump() + "\n";
  write_text_file(dir.file("in.jsonl"), lines);
  const auto r = cli({"judge", "run", "--in", dir.file("in.jsonl"), "--rulebook", fixtures::data("rulebook.json"), "--out",
                      dir.file("out.jsonl")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out == "2/3 passed\n");
  const auto rows = jsonl(dir.file("out.jsonl"));
  CHECK(rows[0]["verdict"] == 1);
  CHECK(rows[2]["structural_pass"] == false);
}

TEST_CASE("bench run then analyze") {
  fixtures::TempDir dir("cli_bench");
  const auto run = cli({"bench", "run", "--backend", "mock", "--mock-config", fixtures::data("mock_models.json"),
                        "--prompts", fixtures::data("bench_prompts.jsonl"), "--samples", "5", "--rulebook",
                        fixtures::data("rulebook.json"), "--seed", "3", "--out", dir.file("episodes.jsonl")});
  REQUIRE_MESSAGE(run.code == 0, run.err);
  const auto episodes = jsonl(dir.file("episodes.jsonl"));
  CHECK(episodes.size() == 2 * 12 * 5);

  const auto an = cli({"bench", "analyze", "--in", dir.file("episodes.jsonl"), "--report", dir.file("report.md"), "--csv",
                       dir.file("csv"), "--ecdf-svg", dir.file("svg")});
  REQUIRE_MESSAGE(an.code == 0, an.err);
  CHECK(read_text_file(dir.file("report.md")).find("mock-4bit") != std::string::npos);
  CHECK(std::filesystem::exists(dir.file("csv/success_rates.csv")));
  CHECK(std::filesystem::exists(dir.file("svg/ecdf_expected_time.svg")));

  // Same seed, same log.
  cli({"bench", "run", "--backend", "mock", "--mock-config", fixtures::data("mock_models.json"), "--prompts",
       fixtures::data("bench_prompts.jsonl"), "--samples", "5", "--rulebook", fixtures::data("rulebook.json"), "--seed",
       "3", "--out", dir.file("again.jsonl")});
  CHECK(read_text_file(dir.file("again.jsonl")) == read_text_file(dir.file("episodes.jsonl")));

  CHECK(cli({"bench", "analyze", "--in", dir.file("missing.jsonl"), "--report", dir.file("r.md")}).code == exit_code::kIo);
}

TEST_CASE("serve rejects a bad config") {
  CHECK(cli({"serve", "--config", fixtures::data("missing.json")}).code == exit_code::kValidation);
}

}  // TEST_SUITE
