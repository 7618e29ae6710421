#include "defamekit/dag.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "defamekit/errors.hpp"
#include "defamekit/rng.hpp"
#include "defamekit/text.hpp"

namespace defamekit {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Templates

TemplateText TemplateText::parse(std::string_view source) {
  TemplateText t;
  t.source_ = std::string(source);
  std::string literal;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const char c = source[i];
    if (c == '{' && i + 1 < source.size() && source[i + 1] == '{') {
      literal.push_back('{');
      ++i;
    } else if (c == '}' && i + 1 < source.size() && source[i + 1] == '}') {
      literal.push_back('}');
      ++i;
    } else if (c == '{') {
      const auto close = source.find('}', i + 1);
      if (close == std::string_view::npos) throw ParseError("unterminated placeholder at offset " + std::to_string(i));
      if (!literal.empty()) t.segments_.push_back({false, std::exchange(literal, {})});
      t.segments_.push_back({true, text::trim(source.substr(i + 1, close - i - 1))});
      i = close;
    } else {
      literal.push_back(c);
    }
  }
  if (!literal.empty()) t.segments_.push_back({false, literal});
  return t;
}

std::vector<std::string> TemplateText::placeholders() const {
  std::vector<std::string> out;
  for (const auto& s : segments_)
    if (s.placeholder) out.push_back(s.text);
  return out;
}

// ---------------------------------------------------------------------------
// Spec structure

const DagNode* DagSpec::find(std::string_view id) const {
  for (const auto& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

namespace {

const std::set<std::string, std::less<>>& profile_fields() {
  static const std::set<std::string, std::less<>> f = {
      "name", "profession", "personality_traits", "faction", "description", "catchphrases.public", "catchphrases.private"};
  return f;
}

}  // namespace

bool is_brief_field_path(std::string_view path) {
  if (path == "target_audience" || path == "audience" || path == "angle") return true;
  for (std::string_view side : {"sender.", "target."}) {
    if (path.starts_with(side)) return profile_fields().count(path.substr(side.size())) > 0;
  }
  for (std::string_view idx : {"intelligence[0].", "intelligence[1]."}) {
    if (path.starts_with(idx)) {
      auto rest = path.substr(idx.size());
      return rest == "kind" || rest == "body";
    }
  }
  return false;
}

DagSpec dag_spec_from_json(const json& j) {
  if (!j.is_object()) throw FieldError("", "DAG spec must be an object");
  if (!j.contains("nodes") || !j["nodes"].is_array()) throw FieldError("nodes", "missing node list");
  DagSpec spec;
  for (std::size_t i = 0; i < j["nodes"].size(); ++i) {
    const json& n = j["nodes"][i];
    const std::string path = "nodes[" + std::to_string(i) + "]";
    if (!n.contains("id") || !n["id"].is_string()) throw FieldError(path + ".id", "missing node id");
    DagNode node;
    node.id = n["id"].get<std::string>();
    const std::string type = n.value("type", "choice");
    if (type == "choice") {
      ChoiceNode choice;
      if (n.contains("options")) {
        choice.rows.push_back({{}, n["options"].get<std::vector<std::string>>()});
      }
      if (n.contains("rows")) {
        for (const auto& row : n["rows"]) {
          GuardRow r;
          if (row.contains("when"))
            for (const auto& [k, v] : row["when"].items()) r.when.emplace_back(k, v.get<std::string>());
          r.options = row.at("options").get<std::vector<std::string>>();
          choice.rows.push_back(std::move(r));
        }
      }
      node.kind = std::move(choice);
    } else if (type == "generation") {
      GenerationNode gen;
      if (!n.contains("prompt")) throw FieldError(path + ".prompt", "generation node needs a prompt template");
      gen.prompt_template = TemplateText::parse(n["prompt"].get<std::string>());
      gen.max_length = n.value("max_length", 400);
      node.kind = std::move(gen);
    } else {
      throw FieldError(path + ".type", "unknown node type '" + type + "'");
    }
    spec.nodes.push_back(std::move(node));
  }
  if (j.contains("edges")) {
    for (const auto& e : j["edges"]) {
      if (e.is_array() && e.size() == 2)
        spec.edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
      else if (e.is_object())
        spec.edges.emplace_back(e.at("from").get<std::string>(), e.at("to").get<std::string>());
      else
        throw FieldError("edges", "edge must be [from, to] or {from, to}");
    }
  }
  if (j.contains("bindings"))
    for (const auto& [path, node] : j["bindings"].items()) spec.output_bindings.emplace_back(path, node.get<std::string>());
  return spec;
}

json dag_spec_to_json(const DagSpec& spec) {
  json nodes = json::array();
  for (const auto& n : spec.nodes) {
    json jn{{"id", n.id}};
    if (const auto* c = std::get_if<ChoiceNode>(&n.kind)) {
      jn["type"] = "choice";
      json rows = json::array();
      for (const auto& r : c->rows) {
        json when = json::object();
        for (const auto& [k, v] : r.when) when[k] = v;
        rows.push_back({{"when", when}, {"options", r.options}});
      }
      jn["rows"] = rows;
    } else {
      const auto& g = std::get<GenerationNode>(n.kind);
      jn["type"] = "generation";
      jn["prompt"] = g.prompt_template.source();
      jn["max_length"] = g.max_length;
    }
    nodes.push_back(jn);
  }
  json edges = json::array();
  for (const auto& [a, b] : spec.edges) edges.push_back({a, b});
  json bindings = json::object();
  for (const auto& [path, node] : spec.output_bindings) bindings[path] = node;
  return json{{"nodes", nodes}, {"edges", edges}, {"bindings", bindings}};
}

DagSpec load_dag_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open DAG spec " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  return dag_spec_from_json(j);
}

// ---------------------------------------------------------------------------
// Validation

namespace {

using Adjacency = std::unordered_map<std::string, std::vector<std::string>>;

Adjacency parents_of(const DagSpec& spec) {
  Adjacency parents;
  for (const auto& [from, to] : spec.edges) parents[to].push_back(from);
  return parents;
}

std::unordered_set<std::string> ancestors(const std::string& id, const Adjacency& parents) {
  std::unordered_set<std::string> seen;
  std::vector<std::string> stack{id};
  while (!stack.empty()) {
    auto cur = std::move(stack.back());
    stack.pop_back();
    auto it = parents.find(cur);
    if (it == parents.end()) continue;
    for (const auto& p : it->second)
      if (seen.insert(p).second) stack.push_back(p);
  }
  return seen;
}

// First cycle found by DFS in declaration order, as the list of its nodes.
std::vector<std::string> find_cycle(const DagSpec& spec) {
  Adjacency children;
  for (const auto& [from, to] : spec.edges) children[from].push_back(to);
  std::unordered_map<std::string, int> state;  // 0 new, 1 on stack, 2 done
  std::vector<std::string> path;
  std::vector<std::string> cycle;

  std::function<bool(const std::string&)> visit = [&](const std::string& id) {
    state[id] = 1;
    path.push_back(id);
    for (const auto& next : children[id]) {
      if (state[next] == 1) {
        auto start = std::find(path.begin(), path.end(), next);
        cycle.assign(start, path.end());
        return true;
      }
      if (state[next] == 0 && visit(next)) return true;
    }
    path.pop_back();
    state[id] = 2;
    return false;
  };
  for (const auto& n : spec.nodes)
    if (state[n.id] == 0 && visit(n.id)) return cycle;
  return {};
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : sep) + p;
  return out;
}

}  // namespace

ValidationReport validate_dag(const DagSpec& spec) {
  ValidationReport r;
  std::unordered_set<std::string> ids;
  for (const auto& n : spec.nodes) {
    if (n.id.empty()) r.violations.push_back("node id non-empty");
    if (!ids.insert(n.id).second) r.violations.push_back("duplicate node id: " + n.id);
  }
  for (const auto& [from, to] : spec.edges) {
    if (!ids.count(from)) r.violations.push_back("edge references unknown node: " + from);
    if (!ids.count(to)) r.violations.push_back("edge references unknown node: " + to);
  }
  if (auto cycle = find_cycle(spec); !cycle.empty()) r.violations.push_back("cycle: " + join(cycle, ","));

  const Adjacency parents = parents_of(spec);
  for (const auto& n : spec.nodes) {
    const auto anc = ancestors(n.id, parents);
    if (const auto* c = std::get_if<ChoiceNode>(&n.kind)) {
      if (c->rows.empty()) r.violations.push_back("choice node without guard rows: " + n.id);
      for (const auto& row : c->rows) {
        if (row.options.empty()) r.violations.push_back("empty options list: " + n.id);
        for (const auto& [ref, value] : row.when)
          if (!anc.count(ref)) r.violations.push_back("guard references non-ancestor: " + n.id + " -> " + ref);
      }
    } else {
      const auto& g = std::get<GenerationNode>(n.kind);
      if (g.max_length <= 0) r.violations.push_back("max_length must be positive: " + n.id);
      for (const auto& ph : g.prompt_template.placeholders())
        if (!anc.count(ph)) r.violations.push_back("placeholder references non-upstream node: " + n.id + " -> " + ph);
    }
  }
  std::unordered_set<std::string> bound;
  for (const auto& [path, node] : spec.output_bindings) {
    if (!is_brief_field_path(path)) r.violations.push_back("unknown binding field path: " + path);
    if (!ids.count(node)) r.violations.push_back("binding references unknown node: " + path + " -> " + node);
    if (!bound.insert(path).second) r.violations.push_back("field bound twice: " + path);
  }
  return r;
}

std::vector<std::string> topological_order(const DagSpec& spec) {
  std::unordered_map<std::string, std::size_t> indegree;
  Adjacency children;
  for (const auto& n : spec.nodes) indegree[n.id] = 0;
  for (const auto& [from, to] : spec.edges) {
    children[from].push_back(to);
    ++indegree[to];
  }
  std::vector<std::string> order;
  std::vector<bool> emitted(spec.nodes.size(), false);
  // Kahn's algorithm; each round takes the earliest-declared ready node.
  while (order.size() < spec.nodes.size()) {
    bool progressed = false;
    for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
      if (emitted[i] || indegree[spec.nodes[i].id] != 0) continue;
      emitted[i] = true;
      order.push_back(spec.nodes[i].id);
      for (const auto& c : children[spec.nodes[i].id]) --indegree[c];
      progressed = true;
      break;
    }
    if (!progressed) throw ConfigError("DAG contains a cycle");
  }
  return order;
}

// ---------------------------------------------------------------------------
// Execution

const std::string* AssembledInput::find(std::string_view node_id) const {
  for (const auto& [id, value] : components)
    if (id == node_id) return &value;
  return nullptr;
}

std::vector<std::string> AssembledInput::component_values() const {
  std::vector<std::string> v;
  v.reserve(components.size());
  for (const auto& c : components) v.push_back(c.second);
  return v;
}

json assembled_input_to_json(const AssembledInput& input) {
  json comps = json::array();
  for (std::size_t i = 0; i < input.components.size(); ++i) {
    json c{{"node", input.components[i].first}, {"value", input.components[i].second}};
    const auto& src = input.provenance.at(i);
    c["source"] = src.kind == Provenance::choice ? "choice" : "generated";
    if (src.option_index) c["option_index"] = *src.option_index;
    comps.push_back(c);
  }
  return json{{"components", comps}, {"brief", brief_to_json(input.brief)}};
}

AssembledInput assembled_input_from_json(const json& j) {
  AssembledInput in;
  for (const auto& c : j.at("components")) {
    in.components.emplace_back(c.at("node").get<std::string>(), c.at("value").get<std::string>());
    ComponentSource src;
    src.kind = c.value("source", "choice") == "choice" ? Provenance::choice : Provenance::generated;
    if (c.contains("option_index")) src.option_index = c["option_index"].get<std::size_t>();
    in.provenance.push_back(src);
  }
  in.brief = brief_from_json(j.at("brief"));
  return in;
}

std::uint64_t node_stream_seed(std::uint64_t seed, std::string_view node_id, std::uint64_t attempt) {
  return derive_seed({seed, fnv1a64(node_id), attempt});
}

namespace {

std::vector<std::string> split_traits(const std::string& value) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : value) {
    if (c == ',' || c == ';') {
      if (auto t = text::normalize_whitespace(cur); !t.empty()) out.push_back(t);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (auto t = text::normalize_whitespace(cur); !t.empty()) out.push_back(t);
  return out;
}

void assign_profile_field(CharacterProfile& p, std::string_view field, const std::string& value) {
  if (field == "name") p.name = value;
  else if (field == "profession") p.profession = value;
  else if (field == "personality_traits") p.personality_traits = split_traits(value);
  else if (field == "faction") p.faction = value;
  else if (field == "description") p.description = value;
  else if (field == "catchphrases.public") p.catchphrases.public_line = value;
  else if (field == "catchphrases.private") p.catchphrases.private_line = value;
}

CampaignBrief bind_brief(const DagSpec& spec, const AssembledInput& in) {
  CampaignBrief b;
  std::map<int, IntelligenceItem> intel;
  for (const auto& [path, node] : spec.output_bindings) {
    const std::string* v = in.find(node);
    if (!v) throw DagExecutionError(node, "bound node produced no value");
    const std::string value = text::normalize_whitespace(*v);
    std::string_view p = path;
    if (p.starts_with("sender.")) assign_profile_field(b.sender, p.substr(7), value);
    else if (p.starts_with("target.")) assign_profile_field(b.target, p.substr(7), value);
    else if (p == "target_audience" || p == "audience") b.audience = value;
    else if (p == "angle") b.angle = value;
    else if (p.starts_with("intelligence[")) {
      const int idx = p[13] - '0';
      if (p.ends_with(".kind")) intel[idx].kind = value;
      else intel[idx].body = value;
    }
  }
  for (auto& [idx, item] : intel) b.intelligence.push_back(std::move(item));
  return b;
}

std::string resolve_placeholder(const std::string& name, const AssembledInput& in, bool brief_ready) {
  if (const std::string* v = in.find(name)) return *v;
  if (brief_ready) {
    if (name == "brief") return serialize_brief(in.brief);
    const json b = brief_to_json(in.brief);
    std::string_view p = name;
    if (p == "audience") p = "target_audience";
    if (p.starts_with("intelligence[") && p.size() > 16) {
      const std::size_t idx = static_cast<std::size_t>(p[13] - '0');
      if (idx < in.brief.intelligence.size()) {
        if (p.ends_with(".kind")) return in.brief.intelligence[idx].kind;
        if (p.ends_with(".body")) return in.brief.intelligence[idx].body;
      }
      throw RenderError(name);
    }
    const json* cur = &b;
    std::size_t start = 0;
    while (start <= p.size()) {
      auto dot = p.find('.', start);
      auto key = std::string(p.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
      if (!cur->is_object() || !cur->contains(key)) throw RenderError(name);
      cur = &(*cur)[key];
      if (dot == std::string_view::npos) break;
      start = dot + 1;
    }
    if (cur->is_string()) return cur->get<std::string>();
    if (cur->is_array()) {
      std::string out;
      for (const auto& e : *cur) out += (out.empty() ? "" : ", ") + e.get<std::string>();
      return out;
    }
  }
  throw RenderError(name);
}

std::string render_segments(const TemplateText& tmpl, const AssembledInput& in, bool brief_ready) {
  std::string out;
  for (const auto& seg : tmpl.segments()) out += seg.placeholder ? resolve_placeholder(seg.text, in, brief_ready) : seg.text;
  return out;
}

}  // namespace

AssembledInput execute_dag(const DagSpec& spec, std::uint64_t seed, TeacherClient& teacher, const TeacherRetry& retry) {
  AssembledInput in;
  for (const auto& id : topological_order(spec)) {
    const DagNode& node = *spec.find(id);
    if (const auto* c = std::get_if<ChoiceNode>(&node.kind)) {
      const GuardRow* row = nullptr;
      for (const auto& r : c->rows) {
        const bool match = std::all_of(r.when.begin(), r.when.end(), [&](const auto& cond) {
          const std::string* v = in.find(cond.first);
          return v && *v == cond.second;
        });
        if (match) {
          row = &r;
          break;
        }
      }
      if (!row || row->options.empty()) throw DagExecutionError(id, "exhausted guards");
      SeedStream stream(node_stream_seed(seed, id));
      const std::size_t pick = stream.below(row->options.size());
      in.components.emplace_back(id, row->options[pick]);
      in.provenance.push_back({Provenance::choice, pick});
    } else {
      const auto& g = std::get<GenerationNode>(node.kind);
      std::string prompt;
      try {
        prompt = render_segments(g.prompt_template, in, false);
      } catch (const RenderError& e) {
        throw DagExecutionError(id, e.what());
      }
      std::string answer;
      try {
        answer = complete_with_retry(teacher, prompt, g.max_length, retry);
      } catch (const TeacherError& e) {
        throw DagExecutionError(id, std::string("teacher failed: ") + e.what());
      }
      in.components.emplace_back(id, text::truncate_utf8(text::trim(answer), static_cast<std::size_t>(g.max_length)));
      in.provenance.push_back({Provenance::generated, std::nullopt});
    }
  }
  in.brief = bind_brief(spec, in);
  if (auto report = validate_brief(in.brief); !report.ok())
    throw DagExecutionError("bindings", "assembled brief is invalid: " + join(report.violations, "; "));
  return in;
}

std::string render_template(const TemplateText& tmpl, const AssembledInput& input) {
  return render_segments(tmpl, input, true);
}

// ---------------------------------------------------------------------------
// Dataset

json dataset_pair_to_json(const DatasetPair& p) {
  return json{{"input", assembled_input_to_json(p.input)},
              {"prompt", p.prompt},
              {"output", p.output},
              {"teacher_model", p.teacher_model},
              {"seed", p.seed}};
}

DatasetPair dataset_pair_from_json(const json& j) {
  DatasetPair p;
  p.input = assembled_input_from_json(j.at("input"));
  p.prompt = j.at("prompt").get<std::string>();
  p.output = j.at("output").get<std::string>();
  p.teacher_model = j.value("teacher_model", "");
  p.seed = j.value("seed", std::uint64_t{0});
  return p;
}

std::vector<DatasetPair> build_dataset(const DagSpec& spec, const TemplateText& tmpl, std::size_t count,
                                       std::uint64_t seed, TeacherClient& teacher, const BuildOptions& options) {
  std::vector<DatasetPair> pairs;
  pairs.reserve(count);
  std::set<std::vector<std::string>> seen;

  for (std::size_t i = 0; i < count; ++i) {
    bool placed = false;
    for (std::size_t attempt = 0; attempt < options.max_resamples && !placed; ++attempt) {
      const std::uint64_t record_seed = derive_seed({seed, i, attempt});
      AssembledInput in;
      try {
        in = execute_dag(spec, record_seed, teacher, options.retry);
      } catch (const DagExecutionError& e) {
        throw DatasetError(i, e.what());
      }
      if (!seen.insert(in.component_values()).second) continue;
      DatasetPair pair;
      try {
        pair.prompt = render_template(tmpl, in);
      } catch (const RenderError& e) {
        throw DatasetError(i, e.what());
      }
      pair.input = std::move(in);
      pair.teacher_model = teacher.model_id();
      pair.seed = record_seed;
      pairs.push_back(std::move(pair));
      placed = true;
    }
    if (!placed) throw DistinctnessError(pairs.size(), count);
  }

  // Gold outputs; these calls are independent across records.
  const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, pairs.size()));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::size_t failed_index = 0;
  std::string failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (std::size_t i = next++; i < pairs.size() && !failed; i = next++) {
      try {
        pairs[i].output = complete_with_retry(teacher, pairs[i].prompt, options.max_output_tokens, options.retry);
      } catch (const TeacherError& e) {
        std::lock_guard lock(failure_mu);
        if (!failed.exchange(true) || i < failed_index) {
          failed_index = i;
          failure = e.what();
        }
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failed) throw DatasetError(failed_index, "teacher failed: " + failure);
  return pairs;
}

SplitIndex split_dataset(std::span<const std::size_t> ids, double ratio, std::uint64_t seed) {
  const std::size_t n = ids.size();
  const auto train_count = static_cast<std::size_t>(std::clamp<double>(std::round(ratio * static_cast<double>(n)), 0.0,
                                                                       static_cast<double>(n)));
  std::vector<std::size_t> positions(n);
  for (std::size_t i = 0; i < n; ++i) positions[i] = i;
  // Partial Fisher-Yates: the first train_count positions are a uniform sample.
  SeedStream rng(derive_seed({seed, 0x5EEDu}));
  for (std::size_t i = 0; i < train_count; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(positions[i], positions[j]);
  }
  std::vector<bool> in_train(n, false);
  for (std::size_t i = 0; i < train_count; ++i) in_train[positions[i]] = true;
  SplitIndex split;
  for (std::size_t i = 0; i < n; ++i) (in_train[i] ? split.train_ids : split.eval_ids).push_back(ids[i]);
  return split;
}

}  // namespace defamekit
