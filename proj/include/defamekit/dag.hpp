#pragma once

// DAG-driven input and dataset generation. Choice nodes draw from
// conditional option lists; generation nodes ask a teacher model for free
// text. The resolved components are bound onto a CampaignBrief, rendered
// through a prompt template and sent to the teacher for the gold output.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "defamekit/domain.hpp"
#include "defamekit/teacher.hpp"

namespace defamekit {

// Literal text interleaved with `{name}` placeholders; `{{` and `}}` escape braces.
class TemplateText {
 public:
  struct Segment {
    bool placeholder = false;
    std::string text;
    bool operator==(const Segment&) const = default;
  };

  TemplateText() = default;
  // Throws ParseError on an unterminated placeholder.
  static TemplateText parse(std::string_view source);

  const std::vector<Segment>& segments() const { return segments_; }
  std::vector<std::string> placeholders() const;
  const std::string& source() const { return source_; }

 private:
  std::vector<Segment> segments_;
  std::string source_;
};

// Conjunction of equality tests on upstream node values. Empty = always.
struct GuardRow {
  std::vector<std::pair<std::string, std::string>> when;
  std::vector<std::string> options;
};

struct ChoiceNode {
  std::vector<GuardRow> rows;  // first matching row wins
};

struct GenerationNode {
  TemplateText prompt_template;
  int max_length = 400;  // characters kept from the teacher's answer
};

struct DagNode {
  std::string id;
  std::variant<ChoiceNode, GenerationNode> kind;
  bool is_choice() const { return std::holds_alternative<ChoiceNode>(kind); }
};

struct DagSpec {
  std::vector<DagNode> nodes;
  std::vector<std::pair<std::string, std::string>> edges;            // from -> to
  std::vector<std::pair<std::string, std::string>> output_bindings;  // brief field path -> node id

  const DagNode* find(std::string_view id) const;
};

DagSpec dag_spec_from_json(const nlohmann::json& j);
nlohmann::json dag_spec_to_json(const DagSpec& spec);
DagSpec load_dag_spec(const std::string& path);

// Brief field paths accepted by output bindings, e.g. "sender.name",
// "intelligence[1].body", "target_audience".
bool is_brief_field_path(std::string_view path);

ValidationReport validate_dag(const DagSpec& spec);

// Node ids in dependency order, ties broken by declaration order. Throws
// ConfigError when the edges contain a cycle.
std::vector<std::string> topological_order(const DagSpec& spec);

enum class Provenance { choice, generated };

struct ComponentSource {
  Provenance kind = Provenance::choice;
  std::optional<std::size_t> option_index;  // set for choices
  bool operator==(const ComponentSource&) const = default;
};

struct AssembledInput {
  std::vector<std::pair<std::string, std::string>> components;  // node id -> value, resolution order
  std::vector<ComponentSource> provenance;                       // parallel to components
  CampaignBrief brief;

  const std::string* find(std::string_view node_id) const;
  std::vector<std::string> component_values() const;
  bool operator==(const AssembledInput&) const = default;
};

nlohmann::json assembled_input_to_json(const AssembledInput& input);
AssembledInput assembled_input_from_json(const nlohmann::json& j);

// Seed of a node's random stream for a given execution seed.
std::uint64_t node_stream_seed(std::uint64_t seed, std::string_view node_id, std::uint64_t attempt = 0);

// Throws DagExecutionError naming the failing node ("exhausted guards",
// teacher failure) or "bindings" when the assembled brief is invalid.
AssembledInput execute_dag(const DagSpec& spec, std::uint64_t seed, TeacherClient& teacher,
                           const TeacherRetry& retry = {});

// Placeholders resolve to component values first, then brief field paths;
// `{brief}` expands to the canonical brief document.
std::string render_template(const TemplateText& tmpl, const AssembledInput& input);

struct DatasetPair {
  AssembledInput input;
  std::string prompt;
  std::string output;
  std::string teacher_model;
  std::uint64_t seed = 0;
};

nlohmann::json dataset_pair_to_json(const DatasetPair& pair);
DatasetPair dataset_pair_from_json(const nlohmann::json& j);

struct BuildOptions {
  std::size_t max_resamples = 100;  // per record, on component-vector collision
  int max_output_tokens = 400;
  std::size_t workers = 1;          // concurrent teacher calls for the outputs
  TeacherRetry retry;
};

// Exactly `count` pairs with pairwise distinct component vectors. Throws
// DistinctnessError (with the achieved count) or DatasetError (failing index).
std::vector<DatasetPair> build_dataset(const DagSpec& spec, const TemplateText& tmpl, std::size_t count,
                                       std::uint64_t seed, TeacherClient& teacher, const BuildOptions& options = {});

struct SplitIndex {
  std::vector<std::size_t> train_ids;
  std::vector<std::size_t> eval_ids;
};

// |train| = round(ratio * N); the sample is seed-deterministic and the
// returned id lists keep the input order.
SplitIndex split_dataset(std::span<const std::size_t> ids, double ratio, std::uint64_t seed);

}  // namespace defamekit
