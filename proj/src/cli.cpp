#include "defamekit/cli.hpp"

#include <algorithm>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>

#include "defamekit/bench.hpp"
#include "defamekit/config.hpp"
#include "defamekit/dag.hpp"
#include "defamekit/errors.hpp"
#include "defamekit/rng.hpp"
#include "defamekit/service.hpp"
#include "defamekit/teacher.hpp"

namespace defamekit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Raised for argument combinations CLI11 cannot express.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) lines.push_back(line);
  }
  return lines;
}

std::string jsonl(const std::vector<json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  return out;
}

std::unique_ptr<TeacherClient> make_teacher(const std::string& url, const std::string& replay, const std::string& model,
                                            int workers) {
  if (!url.empty() && !replay.empty()) throw UsageError("use either --teacher or --replay");
  if (!replay.empty()) return ReplayTeacher::from_file(replay, model.empty() ? "replay" : model);
  if (!url.empty()) return HttpTeacher::from_env(url, model.empty() ? "teacher" : model, workers);
  return std::make_unique<ReplayTeacher>(std::vector<TranscriptEntry>{}, "none");
}

struct Context {
  std::ostream& out;
  std::ostream& err;
};

int cmd_dag_validate(Context& c, const std::string& file) {
  const DagSpec spec = load_dag_spec(file);
  const auto report = validate_dag(spec);
  if (!report.ok()) {
    for (const auto& v : report.violations) c.err << v << "\n";
    return exit_code::kValidation;
  }
  c.out << "ok: " << spec.nodes.size() << " nodes, " << spec.edges.size() << " edges\n";
  return exit_code::kOk;
}

int cmd_dag_run(Context& c, const std::string& file, std::uint64_t seed, int count, const std::string& out_path,
                const std::string& teacher_url, const std::string& replay, const std::string& model) {
  const DagSpec spec = load_dag_spec(file);
  const auto report = validate_dag(spec);
  if (!report.ok()) {
    for (const auto& v : report.violations) c.err << v << "\n";
    return exit_code::kValidation;
  }
  const bool generates = std::any_of(spec.nodes.begin(), spec.nodes.end(), [](const DagNode& n) { return !n.is_choice(); });
  if (generates && teacher_url.empty() && replay.empty())
    throw UsageError("spec has generation nodes; pass --teacher URL or --replay FILE");
  auto teacher = make_teacher(teacher_url, replay, model, 1);
  std::vector<json> rows;
  for (int k = 0; k < count; ++k) {
    const std::uint64_t s = derive_seed({seed, static_cast<std::uint64_t>(k)});
    const auto input = execute_dag(spec, s, *teacher);
    rows.push_back({{"index", k}, {"seed", s}, {"input", assembled_input_to_json(input)}});
  }
  write_text_file(out_path, jsonl(rows));
  c.out << "wrote " << rows.size() << " inputs to " << out_path << "\n";
  return exit_code::kOk;
}

int cmd_dataset_generate(Context& c, const std::string& dag, const std::string& tmpl_path, const std::string& url,
                         const std::string& replay, const std::string& model, std::size_t count, std::uint64_t seed,
                         std::size_t workers, const std::string& out_path) {
  if (url.empty() && replay.empty()) throw UsageError("dataset generate needs --teacher URL or --replay FILE");
  const DagSpec spec = load_dag_spec(dag);
  const auto report = validate_dag(spec);
  if (!report.ok()) {
    for (const auto& v : report.violations) c.err << v << "\n";
    return exit_code::kValidation;
  }
  const auto tmpl = TemplateText::parse(read_text_file(tmpl_path));
  auto teacher = make_teacher(url, replay, model, static_cast<int>(workers));
  BuildOptions opts;
  opts.workers = workers;
  const auto pairs = build_dataset(spec, tmpl, count, seed, *teacher, opts);
  std::vector<json> rows;
  for (const auto& p : pairs) rows.push_back(dataset_pair_to_json(p));
  write_text_file(out_path, jsonl(rows));
  c.out << "wrote " << rows.size() << " pairs to " << out_path << "\n";
  return exit_code::kOk;
}

std::string sibling(const std::string& in, const std::string& tag) {
  fs::path p(in);
  return (p.parent_path() / (p.stem().string() + "." + tag + p.extension().string())).string();
}

int cmd_dataset_split(Context& c, const std::string& in, double ratio, std::uint64_t seed, std::string train_out,
                      std::string eval_out) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    c.err << "--ratio must lie in [0, 1]\n";
    return exit_code::kValidation;
  }
  const auto lines = read_lines(in);
  std::vector<std::size_t> ids(lines.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  const auto split = split_dataset(ids, ratio, seed);
  if (train_out.empty()) train_out = sibling(in, "train");
  if (eval_out.empty()) eval_out = sibling(in, "eval");
  std::string train, eval;
  for (auto i : split.train_ids) train += lines[i] + "\n";
  for (auto i : split.eval_ids) eval += lines[i] + "\n";
  write_text_file(train_out, train);
  write_text_file(eval_out, eval);
  c.out << "train " << split.train_ids.size() << " -> " << train_out << "\n";
  c.out << "eval " << split.eval_ids.size() << " -> " << eval_out << "\n";
  return exit_code::kOk;
}

struct BenchArgs {
  std::string backend = "mock";
  std::string prompts;
  int samples = 100;
  double temperature = 0.75;
  double top_p = 0.9;
  int max_new_tokens = 256;
  int max_attempts = 1;
  double time_budget_ms = 0.0;  // 0: unlimited
  std::string out;
  std::string mock_config;
  std::string backend_config;
  std::string endpoint;
  std::string judge = "rules";
  std::string rulebook;
  std::string judge_endpoint;
  std::uint64_t seed = 0;
};

JudgeSuite suite_from_args(const std::string& kind, const std::string& rulebook, const std::string& endpoint) {
  if (kind == "remote") {
    if (endpoint.empty()) throw UsageError("the remote judge needs --judge-endpoint");
    RemoteJudgeConfig cfg;
    cfg.endpoint = endpoint;
    return make_remote_suite(cfg);
  }
  if (rulebook.empty()) throw UsageError("the rules judge needs --rulebook");
  return make_rule_suite(std::make_shared<const Rulebook>(load_rulebook(rulebook)));
}

std::vector<MockConfig> mock_models(const std::string& path) {
  if (path.empty()) return {MockConfig{}};
  const json j = read_json_file(path);
  std::vector<MockConfig> out;
  const json& list = j.is_object() && j.contains("models") ? j.at("models") : j;
  if (list.is_array()) {
    for (const auto& m : list) out.push_back(mock_config_from_json(m));
  } else {
    out.push_back(mock_config_from_json(list));
  }
  if (out.empty()) throw ConfigError("mock config lists no models");
  return out;
}

int cmd_bench_run(Context& c, const BenchArgs& a) {
  const auto prompts = load_bench_prompts(a.prompts);
  for (const auto& p : prompts) {
    const auto report = validate_brief(p.brief);
    if (!report.ok()) {
      c.err << p.prompt_id << ": invalid brief";
      for (const auto& v : report.violations) c.err << "; " << v;
      c.err << "\n";
      return exit_code::kValidation;
    }
  }
  const JudgeSuite suite = suite_from_args(a.judge, a.rulebook, a.judge_endpoint);

  BenchRunOptions opts;
  opts.samples = a.samples;
  json sampling{{"temperature", a.temperature}, {"top_p", a.top_p}, {"max_new_tokens", a.max_new_tokens}};
  opts.sampling = sampling_from_json(sampling);
  opts.policy.max_attempts = a.max_attempts;
  if (a.time_budget_ms > 0) opts.policy.time_budget_ms = a.time_budget_ms;
  opts.seed = a.seed;

  std::ofstream out(a.out, std::ios::trunc);
  if (!out) throw IoError("cannot write " + a.out);
  std::size_t written = 0;
  auto sink = [&](const GenerationRecord& r) {
    out << generation_record_to_json(r).dump() << "\n";
    ++written;
  };

  if (a.backend == "mock") {
    for (auto cfg : mock_models(a.mock_config)) {
      VirtualClock clock;
      MockBackend backend(std::move(cfg), &clock);
      run_bench(backend, clock, prompts, suite, opts, sink);
    }
  } else {
    HttpBackendConfig cfg;
    if (!a.backend_config.empty()) cfg = http_backend_config_from_json(read_json_file(a.backend_config));
    if (!a.endpoint.empty()) cfg.endpoint = a.endpoint;
    HttpBackend backend(cfg);
    SteadyClock clock;
    run_bench(backend, clock, prompts, suite, opts, sink);
  }
  out.flush();
  if (!out) throw IoError("write failed: " + a.out);
  c.out << "wrote " << written << " episode records to " << a.out << "\n";
  return exit_code::kOk;
}

int cmd_bench_analyze(Context& c, const std::string& in, const std::string& report, const std::string& csv_dir,
                      const std::string& svg_dir, double quantile) {
  if (report.empty() && csv_dir.empty() && svg_dir.empty())
    throw UsageError("bench analyze needs at least one of --report, --csv, --ecdf-svg");
  const auto data = load_trials(in);
  const auto analysis = analyze_trials(data, quantile);
  if (!report.empty()) write_text_file(report, render_report(analysis));
  if (!csv_dir.empty())
    for (const auto& [name, content] : render_csv(analysis)) write_text_file((fs::path(csv_dir) / name).string(), content);
  if (!svg_dir.empty())
    for (const auto& [name, content] : render_ecdf_svgs(analysis))
      write_text_file((fs::path(svg_dir) / name).string(), content);
  c.out << "analyzed " << data.trials.size() << " prompt/model cells across " << analysis.models.size() << " models\n";
  return exit_code::kOk;
}

// Accepts dataset pairs ({input:{brief}, output}), episode records
// ({brief, attempts}) or plain {brief, output|raw_text|poster}.
std::pair<CampaignBrief, std::string> judge_item(const json& j) {
  const json* brief = nullptr;
  if (j.contains("input") && j.at("input").contains("brief")) brief = &j.at("input").at("brief");
  if (!brief && j.contains("brief")) brief = &j.at("brief");
  if (!brief) throw FieldError("brief", "missing brief");
  std::string text;
  if (j.contains("output")) {
    text = j.at("output").get<std::string>();
  } else if (j.contains("raw_text")) {
    text = j.at("raw_text").get<std::string>();
  } else if (j.contains("poster") && j.at("poster").is_string()) {
    text = j.at("poster").get<std::string>();
  } else if (j.contains("attempts") && !j.at("attempts").empty()) {
    text = j.at("attempts").back().value("raw_text", std::string{});
  } else {
    throw FieldError("output", "missing poster text");
  }
  return {brief_from_json(*brief), text};
}

int cmd_judge_run(Context& c, const std::string& in, const std::string& suite_kind, const std::string& rulebook,
                  const std::string& endpoint, const std::string& out_path) {
  const JudgeSuite suite = suite_from_args(suite_kind, rulebook, endpoint);
  const auto lines = read_lines(in);
  std::vector<json> rows;
  std::size_t passed = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const json j = json::parse(lines[i], nullptr, false);
    if (j.is_discarded()) throw ParseError("line " + std::to_string(i + 1) + " is not valid JSON", i + 1, 1);
    auto [brief, text] = judge_item(j);
    json row{{"index", i}};
    if (j.contains("prompt_id")) row["prompt_id"] = j.at("prompt_id");
    const auto structural = structural_validate(brief, text);
    row["structural_pass"] = structural.pass;
    json failures = json::array();
    for (const auto& f : structural.failures) failures.push_back({{"section", f.section}, {"reason", f.reason}});
    row["failures"] = failures;
    int verdict = 0;
    if (structural.pass) {
      const std::string prompt = j.value("prompt", std::string{});
      const auto result = judge(suite, brief, prompt, *structural.poster);
      row["judge"] = judge_result_to_json(result);
      verdict = result.verdict;
    } else {
      row["judge"] = json();
    }
    row["verdict"] = verdict;
    passed += verdict;
    rows.push_back(std::move(row));
  }
  write_text_file(out_path, jsonl(rows));
  c.out << passed << "/" << rows.size() << " passed\n";
  return exit_code::kOk;
}

Service* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

int cmd_serve(Context& c, const std::string& config_path, int port, const std::string& host) {
  AppConfig cfg = load_app_config(config_path);
  if (port != 0) cfg.port = port;
  if (cfg.port < 1 || cfg.port > 65535) {
    c.err << "port must lie in [1, 65535]\n";
    return exit_code::kValidation;
  }
  const int p = cfg.port;
  Service service(std::move(cfg));
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  c.out << "listening on " << host << ":" << p << std::endl;
  service.run(host, p);
  g_service = nullptr;
  return exit_code::kOk;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Context ctx{out, err};
  CLI::App app{"Smear-campaign poster generation toolkit", "defamekit"};
  app.require_subcommand(1);

  std::function<int()> action;

  // dag
  auto* dag = app.add_subcommand("dag", "Input-generation DAG tools");
  dag->require_subcommand(1);
  std::string dag_file, dag_out, teacher_url, replay, teacher_model;
  std::uint64_t seed = 0;
  int count = 1;
  auto* dag_validate = dag->add_subcommand("validate", "Check a DAG spec");
  dag_validate->add_option("file", dag_file, "DAG spec (JSON)")->required();
  dag_validate->callback([&] { action = [&] { return cmd_dag_validate(ctx, dag_file); }; });

  auto* dag_run = dag->add_subcommand("run", "Execute a DAG spec");
  dag_run->add_option("file", dag_file, "DAG spec (JSON)")->required();
  dag_run->add_option("--seed", seed, "Base seed");
  dag_run->add_option("--count", count, "Number of executions")->check(CLI::PositiveNumber);
  dag_run->add_option("--out", dag_out, "Output JSONL")->required();
  dag_run->add_option("--teacher", teacher_url, "Teacher base URL");
  dag_run->add_option("--replay", replay, "Teacher transcript (JSONL)");
  dag_run->add_option("--teacher-model", teacher_model, "Teacher model name");
  dag_run->callback([&] {
    action = [&] { return cmd_dag_run(ctx, dag_file, seed, count, dag_out, teacher_url, replay, teacher_model); };
  });

  // dataset
  auto* dataset = app.add_subcommand("dataset", "Training dataset tools");
  dataset->require_subcommand(1);
  std::string ds_dag, ds_template, ds_out, ds_in, train_out, eval_out;
  std::size_t ds_count = 0, workers = 4;
  double ratio = 0.8;
  auto* ds_gen = dataset->add_subcommand("generate", "Build input/output pairs with a teacher");
  ds_gen->add_option("--dag", ds_dag, "DAG spec")->required();
  ds_gen->add_option("--template", ds_template, "Prompt template")->required();
  ds_gen->add_option("--teacher", teacher_url, "Teacher base URL");
  ds_gen->add_option("--replay", replay, "Teacher transcript (JSONL)");
  ds_gen->add_option("--teacher-model", teacher_model, "Teacher model name");
  ds_gen->add_option("--count", ds_count, "Number of pairs")->required();
  ds_gen->add_option("--seed", seed, "Base seed");
  ds_gen->add_option("--workers", workers, "Concurrent teacher calls")->check(CLI::PositiveNumber);
  ds_gen->add_option("--out", ds_out, "Output JSONL")->required();
  ds_gen->callback([&] {
    action = [&] {
      return cmd_dataset_generate(ctx, ds_dag, ds_template, teacher_url, replay, teacher_model, ds_count, seed, workers,
                                  ds_out);
    };
  });

  auto* ds_split = dataset->add_subcommand("split", "Split a JSONL dataset into train/eval");
  ds_split->add_option("--in", ds_in, "Input JSONL")->required();
  ds_split->add_option("--ratio", ratio, "Training fraction")->required();
  ds_split->add_option("--seed", seed, "Seed")->required();
  ds_split->add_option("--train-out", train_out, "Training output (default <stem>.train.jsonl)");
  ds_split->add_option("--eval-out", eval_out, "Evaluation output (default <stem>.eval.jsonl)");
  ds_split->callback([&] { action = [&] { return cmd_dataset_split(ctx, ds_in, ratio, seed, train_out, eval_out); }; });

  // bench
  auto* bench = app.add_subcommand("bench", "Benchmark runs and analysis");
  bench->require_subcommand(1);
  BenchArgs ba;
  auto* bench_run = bench->add_subcommand("run", "Sample episodes for every prompt");
  bench_run->add_option("--backend", ba.backend, "mock or http")->check(CLI::IsMember({"mock", "http"}));
  bench_run->add_option("--prompts", ba.prompts, "Prompt briefs (JSON or JSONL)")->required();
  bench_run->add_option("--samples", ba.samples, "Episodes per prompt")->check(CLI::PositiveNumber);
  bench_run->add_option("--temperature", ba.temperature, "Sampling temperature");
  bench_run->add_option("--top-p", ba.top_p, "Nucleus sampling threshold");
  bench_run->add_option("--max-new-tokens", ba.max_new_tokens, "Token cap per attempt");
  bench_run->add_option("--max-attempts", ba.max_attempts, "Attempts per episode")->check(CLI::PositiveNumber);
  bench_run->add_option("--time-budget-ms", ba.time_budget_ms, "Latency budget per episode (0 = none)");
  bench_run->add_option("--out", ba.out, "Episode log (JSONL)")->required();
  bench_run->add_option("--mock-config", ba.mock_config, "Mock backend configuration (one model or a list)");
  bench_run->add_option("--backend-config", ba.backend_config, "HTTP backend configuration");
  bench_run->add_option("--endpoint", ba.endpoint, "HTTP backend endpoint");
  bench_run->add_option("--judge", ba.judge, "rules or remote")->check(CLI::IsMember({"rules", "remote"}));
  bench_run->add_option("--rulebook", ba.rulebook, "Rulebook for the rules judge");
  bench_run->add_option("--judge-endpoint", ba.judge_endpoint, "Chat-completions endpoint for the remote judge");
  bench_run->add_option("--seed", ba.seed, "Base seed");
  bench_run->callback([&] { action = [&] { return cmd_bench_run(ctx, ba); }; });

  std::string an_in, an_report, an_csv, an_svg;
  double quantile = 0.4;
  auto* bench_an = bench->add_subcommand("analyze", "Statistics, tables and ECDF plots");
  bench_an->add_option("--in", an_in, "Episode log (JSONL) or trial CSV")->required();
  bench_an->add_option("--report", an_report, "Report output");
  bench_an->add_option("--csv", an_csv, "CSV output directory");
  bench_an->add_option("--ecdf-svg", an_svg, "SVG output directory");
  bench_an->add_option("--difficulty-quantile", quantile, "Pooled quantile for the difficult subset")
      ->check(CLI::Range(0.0, 1.0));
  bench_an->callback([&] { action = [&] { return cmd_bench_analyze(ctx, an_in, an_report, an_csv, an_svg, quantile); }; });

  // judge
  auto* judge_cmd = app.add_subcommand("judge", "Judge posters");
  judge_cmd->require_subcommand(1);
  std::string j_in, j_out, j_suite = "rules", j_rulebook, j_endpoint;
  auto* judge_run = judge_cmd->add_subcommand("run", "Validate and judge every line of a JSONL file");
  judge_run->add_option("--in", j_in, "Input JSONL")->required();
  judge_run->add_option("--suite", j_suite, "rules or remote")->check(CLI::IsMember({"rules", "remote"}));
  judge_run->add_option("--rulebook", j_rulebook, "Rulebook for the rules suite");
  judge_run->add_option("--endpoint", j_endpoint, "Chat-completions endpoint for the remote suite");
  judge_run->add_option("--out", j_out, "Output JSONL")->required();
  judge_run->callback([&] { action = [&] { return cmd_judge_run(ctx, j_in, j_suite, j_rulebook, j_endpoint, j_out); }; });

  // serve
  std::string config_path, host = "127.0.0.1";
  int port = 0;
  auto* serve = app.add_subcommand("serve", "Run the REST service");
  serve->add_option("--config", config_path, "Application config (JSON)")->required();
  serve->add_option("--port", port, "Listening port (overrides the config)");
  serve->add_option("--host", host, "Listening address");
  serve->callback([&] { action = [&] { return cmd_serve(ctx, config_path, port, host); }; });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return exit_code::kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_code::kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return exit_code::kUsage;
  }
  if (!action) {
    err << app.help();
    return exit_code::kUsage;
  }

  try {
    return action();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kUsage;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return exit_code::kValidation;
  } catch (const FieldError& e) {
    err << "invalid field: " << e.what() << "\n";
    return exit_code::kValidation;
  } catch (const ConfigError& e) {
    err << "invalid: " << e.what() << "\n";
    return exit_code::kValidation;
  } catch (const DistinctnessError& e) {
    err << e.what() << "\n";
    return exit_code::kValidation;
  } catch (const IllegalAction& e) {
    err << e.what() << "\n";
    return exit_code::kValidation;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return exit_code::kIo;
  } catch (const TeacherError& e) {
    err << "teacher failure: " << e.what() << "\n";
    return exit_code::kIo;
  } catch (const BackendError& e) {
    err << "backend failure: " << e.what() << "\n";
    return exit_code::kIo;
  } catch (const JudgeError& e) {
    err << "judge failure: " << e.what() << "\n";
    return exit_code::kIo;
  } catch (const DagExecutionError& e) {
    err << "dag execution failed: " << e.what() << "\n";
    return exit_code::kIo;
  } catch (const DatasetError& e) {
    err << "dataset generation failed: " << e.what() << "\n";
    return exit_code::kIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kIo;
  }
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_dispatch(args, std::cout, std::cerr);
}

}  // namespace defamekit
