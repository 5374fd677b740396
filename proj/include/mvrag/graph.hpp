// Copyright 2026 The mvrag Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvrag/corpus.hpp"
#include "mvrag/gateway.hpp"

namespace mvrag {

using NodeId = std::size_t;
using EdgeId = std::size_t;

/// Trim, collapse whitespace, case-fold. Two surface forms name the same
/// entity iff their keys are equal.
std::string canonical_entity_key(std::string_view name);

struct EntityNode {
  std::string name;  // first surface form seen
  std::string entity_type;
  std::set<std::string> attributes;  // "key: value"
  std::vector<EdgeId> neighbor_edges;  // incoming and outgoing, ascending
  std::set<std::string> sources;       // src(v)

  friend bool operator==(const EntityNode&, const EntityNode&) = default;
};

struct RelationEdge {
  NodeId source;
  std::string relation;
  NodeId target;
  std::set<std::string> sources;  // src(e)

  friend bool operator==(const RelationEdge&, const RelationEdge&) = default;
};

/// Raw per-passage extraction output after repair.
struct ExtractionResult {
  std::map<std::string, std::vector<std::string>> attributes;
  std::vector<std::array<std::string, 3>> triples;
  std::map<std::string, std::string> entities;

  bool empty() const { return attributes.empty() && triples.empty() && entities.empty(); }
};

inline constexpr std::string_view kUnknownEntityType = "Unknown";

/// Decodes the extraction payload and adds entities that triples or
/// attributes mention but `entities` omits, typed "Unknown". Malformed
/// triples are dropped. Throws UnparseableOutput when the payload is not an
/// object.
ExtractionResult parse_extraction(const nlohmann::json& payload);

/// Default label-set hint passed as {schema} to the extraction prompt.
std::string default_extraction_schema();

/// Runs the extraction prompt for one unit. Throws UnparseableOutput when the
/// output is unusable after one repair re-prompt.
ExtractionResult extract_graph_facts(const EvidenceUnit& unit, std::string_view schema,
                                     ChatModel& model, UsageRecorder* usage = nullptr);

/// Directed entity-relation graph whose every node and edge links back to the
/// evidence units it was extracted from.
class EvidenceGroundedGraph {
 public:
  static constexpr int kSchemaVersion = 1;

  const std::vector<EntityNode>& nodes() const noexcept { return nodes_; }
  const std::vector<RelationEdge>& edges() const noexcept { return edges_; }
  const std::set<std::string>& failed_units() const noexcept { return failed_units_; }

  std::optional<NodeId> find_node(std::string_view name) const;
  std::optional<EdgeId> find_edge(std::string_view source, std::string_view relation,
                                  std::string_view target) const;

  /// Adds or reuses nodes and edges by canonical name and extends src(o)
  /// with `unit_id` for every object in `result`. Idempotent.
  void merge(const std::string& unit_id, const ExtractionResult& result);

  /// Records a unit whose extraction failed. It contributes no objects.
  void mark_failed(const std::string& unit_id);

  std::size_t degree(NodeId v) const { return nodes_.at(v).neighbor_edges.size(); }
  /// Throws UnknownEntity.
  std::size_t entity_degree(std::string_view name) const;

  /// Number of distinct entity nodes grounded in the unit (0 if none).
  std::size_t entity_count_for_unit(std::string_view unit_id) const;
  /// Entity nodes grounded in the unit, ascending.
  std::vector<NodeId> entities_for_unit(std::string_view unit_id) const;

  friend bool operator==(const EvidenceGroundedGraph& a, const EvidenceGroundedGraph& b) {
    return a.nodes_ == b.nodes_ && a.edges_ == b.edges_ && a.failed_units_ == b.failed_units_;
  }

  nlohmann::json to_json() const;
  /// Throws SchemaVersionMismatch or ParseError.
  static EvidenceGroundedGraph from_json(const nlohmann::json& doc);

 private:
  NodeId intern_node(const std::string& name, const std::string& type, const std::string& unit_id);

  std::vector<EntityNode> nodes_;
  std::vector<RelationEdge> edges_;
  std::set<std::string> failed_units_;
  std::unordered_map<std::string, NodeId> node_by_key_;
  std::map<std::tuple<NodeId, std::string, NodeId>, EdgeId> edge_by_triple_;
  std::unordered_map<std::string, std::set<NodeId>> nodes_by_unit_;
};

/// Throws UnknownUnit when `unit_id` is not in `corpus`.
std::size_t evidence_degree(const EvidenceGroundedGraph& graph, const Corpus& corpus,
                            std::string_view unit_id);

void persist_graph(const EvidenceGroundedGraph& graph, const std::filesystem::path& path);
EvidenceGroundedGraph load_graph(const std::filesystem::path& path);

}  // namespace mvrag
