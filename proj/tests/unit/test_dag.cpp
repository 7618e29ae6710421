#include <doctest.h>

#include <numeric>
#include <set>

#include "defamekit/dag.hpp"
#include "defamekit/errors.hpp"
#include "unit/fixtures.hpp"

using namespace defamekit;
using nlohmann::json;

namespace {

// Brace-initialised pairs of strings would turn into a JSON object.
json edge_list(std::vector<std::pair<std::string, std::string>> edges) { return json(edges); }

json profile_nodes_json() {
  // Constant choice nodes filling every required profile field.
  json nodes = json::array();
  for (const char* side : {"sender", "target"}) {
    const std::string s = side;
    nodes.push_back({{"id", s + "_name"}, {"options", {s == "sender" ? "Alaric" : "Osric"}}});
    nodes.push_back({{"id", s + "_misc"}, {"options", {"steady"}}});
  }
  return nodes;
}

json bind_profiles(json bindings) {
  for (const char* side : {"sender", "target"}) {
    const std::string s = side;
    bindings[s + ".name"] = s + "_name";
    for (const char* f : {"profession", "faction", "personality_traits", "catchphrases.public", "catchphrases.private"})
      bindings[s + "." + f] = s + "_misc";
  }
  return bindings;
}

// origin -> class guard table, the kind of conditional list the generator relies on.
const std::map<std::string, std::vector<std::string>> kClassTable{
    {"Norland", {"jarl", "thrall"}}, {"Vesca", {"doge", "merchant", "oarsman"}}, {"Kharun", {"khan"}}};

json country_class_spec() {
  json nodes = profile_nodes_json();
  nodes.push_back({{"id", "country"}, {"options", {"Norland", "Vesca", "Kharun"}}});
  json rows = json::array();
  for (const auto& [c, classes] : kClassTable) rows.push_back({{"when", {{"country", c}}}, {"options", classes}});
  nodes.push_back({{"id", "class"}, {"rows", rows}});
  nodes.push_back({{"id", "kind"}, {"options", {"failure", "greed"}}});
  nodes.push_back({{"id", "body"}, {"type", "generation"}, {"prompt", "A rumour about a {class} of {country}."}});
  json bindings = bind_profiles(json::object());
  bindings["intelligence[0].kind"] = "kind";
  bindings["intelligence[0].body"] = "body";
  bindings["target_audience"] = "class";
  bindings["angle"] = "country";
  return {{"nodes", nodes}, {"edges", edge_list({{"country", "class"}, {"class", "body"}, {"country", "body"}})}, {"bindings", bindings}};
}

ReplayTeacher rumour_teacher() {
  return ReplayTeacher({{"", "They cheat at dice."}, {"", "They fled the ford."}, {"", "They sold the keys."}});
}

}  // namespace

TEST_SUITE("dag") {

TEST_CASE("validate_dag examples") {
  SUBCASE("guarded chain is ok") {
    auto spec = dag_spec_from_json(json{{"nodes", {{{"id", "A"}, {"options", {"x", "y"}}},
                                                  {{"id", "B"}, {"rows", {{{"when", {{"A", "x"}}}, {"options", {"1"}}}}}}}},
                                        {"edges", edge_list({{"A", "B"}})}});
    CHECK(validate_dag(spec).ok());
  }
  SUBCASE("two-node cycle") {
    auto spec = dag_spec_from_json(read_json_file(fixtures::data("dag/cyclic_dag.json")));
    const auto r = validate_dag(spec);
    CHECK(r.has("cycle: a,b"));
    CHECK_THROWS_AS(topological_order(spec), ConfigError);
  }
  SUBCASE("guard on a non-ancestor") {
    auto spec = dag_spec_from_json(json{{"nodes", {{{"id", "A"}, {"options", {"x"}}},
                                                  {{"id", "B"}, {"rows", {{{"when", {{"A", "x"}}}, {"options", {"1"}}}}}}}}});
    CHECK(validate_dag(spec).has("guard references non-ancestor: B -> A"));
  }
  SUBCASE("unknown binding path") {
    auto spec = dag_spec_from_json(json{{"nodes", {{{"id", "A"}, {"options", {"x"}}}}}, {"bindings", {{"sender.age", "A"}}}});
    CHECK_FALSE(validate_dag(spec).ok());
  }
  SUBCASE("sample spec is valid") {
    CHECK(validate_dag(load_dag_spec(fixtures::data("dag/sample_dag.json"))).ok());
  }
}

TEST_CASE("topological order breaks ties by declaration order") {
  auto spec = dag_spec_from_json(json{{"nodes", {{{"id", "c"}, {"options", {"1"}}},
                                                {{"id", "a"}, {"options", {"1"}}},
                                                {{"id", "b"}, {"options", {"1"}}}}},
                                      {"edges", edge_list({{"b", "c"}})}});
  CHECK(topological_order(spec) == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("singleton choice ignores the seed") {
  json j = country_class_spec();
  j["nodes"][4]["options"] = {"Kharun"};
  auto spec = dag_spec_from_json(j);
  auto teacher = rumour_teacher();
  for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
    const auto in = execute_dag(spec, seed, teacher);
    CHECK(*in.find("country") == "Kharun");
    CHECK(*in.find("class") == "khan");
  }
}

TEST_CASE("execution is repeatable and respects the guard table") {
  auto spec = dag_spec_from_json(country_class_spec());
  REQUIRE(validate_dag(spec).ok());
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto t1 = rumour_teacher();
    auto t2 = rumour_teacher();
    const auto a = execute_dag(spec, seed, t1);
    const auto b = execute_dag(spec, seed, t2);
    CHECK(a == b);
    const auto& allowed = kClassTable.at(*a.find("country"));
    CHECK(std::find(allowed.begin(), allowed.end(), *a.find("class")) != allowed.end());
    CHECK(validate_brief(a.brief).ok());
    CHECK(a.brief.audience == *a.find("class"));
  }
}

TEST_CASE("no matching guard row is an execution error") {
  auto spec = dag_spec_from_json(json{{"nodes", {{{"id", "A"}, {"options", {"x"}}},
                                                {{"id", "B"}, {"rows", {{{"when", {{"A", "y"}}}, {"options", {"1"}}}}}}}},
                                      {"edges", edge_list({{"A", "B"}})}});
  ReplayTeacher t({});
  try {
    execute_dag(spec, 1, t);
    FAIL("expected an execution error");
  } catch (const DagExecutionError& e) {
    CHECK(e.node() == "B");
    CHECK(std::string(e.what()).find("exhausted guards") != std::string::npos);
  }
}

TEST_CASE("teacher failure names the generation node") {
  auto spec = dag_spec_from_json(country_class_spec());
  ReplayTeacher empty({});
  TeacherRetry retry;
  retry.sleep = [](double) {};
  try {
    execute_dag(spec, 1, empty, retry);
    FAIL("expected an execution error");
  } catch (const DagExecutionError& e) {
    CHECK(e.node() == "body");
  }
}

TEST_CASE("render_template examples") {
  AssembledInput in;
  in.components = {{"name", "X"}};
  in.provenance = {{Provenance::choice, 0}};
  CHECK(render_template(TemplateText::parse("Hello {name}"), in) == "Hello X");
  CHECK(render_template(TemplateText::parse("No placeholders {{here}}"), in) == "No placeholders {here}");
  try {
    render_template(TemplateText::parse("Hi {who}"), in);
    FAIL("expected a render error");
  } catch (const RenderError& e) {
    CHECK(e.placeholder() == "who");
  }
  CHECK_THROWS_AS(TemplateText::parse("broken {name"), ParseError);
}

TEST_CASE("build_dataset distinctness and counts") {
  auto spec = dag_spec_from_json(country_class_spec());
  const auto tmpl = TemplateText::parse("Write a poster for {brief}");
  SUBCASE("count 0") {
    auto t = rumour_teacher();
    CHECK(build_dataset(spec, tmpl, 0, 1, t).empty());
  }
  SUBCASE("small count is distinct and repeatable") {
    auto t1 = rumour_teacher();
    auto t2 = rumour_teacher();
    const auto a = build_dataset(spec, tmpl, 5, 3, t1);
    const auto b = build_dataset(spec, tmpl, 5, 3, t2);
    REQUIRE(a.size() == 5);
    std::set<std::vector<std::string>> seen;
    for (std::size_t i = 0; i < a.size(); ++i) {
      seen.insert(a[i].input.component_values());
      CHECK(a[i].input == b[i].input);
      CHECK(a[i].prompt.starts_with("Write a poster for {"));
    }
    CHECK(seen.size() == 5);
  }
  SUBCASE("space too small") {
    // Constant teacher answer: the space is (country, class) pairs times kinds.
    std::size_t space = 0;
    for (const auto& [c, classes] : kClassTable) space += classes.size() * 2;
    ReplayTeacher t(std::vector<TranscriptEntry>{{"", "Same rumour."}});
    try {
      BuildOptions opts;
      opts.max_resamples = 2000;
      build_dataset(spec, tmpl, space + 3, 5, t, opts);
      FAIL("expected a distinctness error");
    } catch (const DistinctnessError& e) {
      CHECK(e.achieved() == space);
    }
  }
}

TEST_CASE("split_dataset sizes and determinism") {
  auto ids = [](std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
  };
  const auto big = ids(1800);
  const auto s = split_dataset(big, 0.8, 11);
  CHECK(s.train_ids.size() == 1440);
  CHECK(s.eval_ids.size() == 360);
  std::set<std::size_t> all(s.train_ids.begin(), s.train_ids.end());
  all.insert(s.eval_ids.begin(), s.eval_ids.end());
  CHECK(all.size() == 1800);
  CHECK(std::is_sorted(s.train_ids.begin(), s.train_ids.end()));
  const auto again = split_dataset(big, 0.8, 11);
  CHECK(again.train_ids == s.train_ids);
  CHECK(split_dataset(big, 0.8, 12).train_ids != s.train_ids);

  const auto one = split_dataset(ids(1), 0.8, 1);
  CHECK(one.train_ids.size() == 1);
  CHECK(one.eval_ids.empty());
}

TEST_CASE("dataset pair json round trip") {
  auto spec = dag_spec_from_json(country_class_spec());
  auto t = rumour_teacher();
  const auto pairs = build_dataset(spec, TemplateText::parse("{brief}"), 2, 9, t);
  for (const auto& p : pairs) {
    const auto back = dataset_pair_from_json(dataset_pair_to_json(p));
    CHECK(back.input == p.input);
    CHECK(back.prompt == p.prompt);
    CHECK(back.output == p.output);
    CHECK(back.seed == p.seed);
  }
}

}  // TEST_SUITE
