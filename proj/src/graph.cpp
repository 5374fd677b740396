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

#include "mvrag/graph.hpp"

#include <fstream>

#include "mvrag/error.hpp"
#include "mvrag/prompts.hpp"
#include "mvrag/text.hpp"

namespace mvrag {

using nlohmann::json;

std::string canonical_entity_key(std::string_view name) {
  return to_lower(normalize_whitespace(name));
}

namespace {

std::string attribute_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

std::vector<std::string> attribute_values(const json& v) {
  std::vector<std::string> out;
  if (v.is_array()) {
    for (const auto& item : v) out.push_back(attribute_string(item));
  } else if (v.is_object()) {
    for (const auto& [key, value] : v.items()) out.push_back(key + ": " + attribute_string(value));
  } else if (!v.is_null()) {
    out.push_back(attribute_string(v));
  }
  return out;
}

}  // namespace

ExtractionResult parse_extraction(const json& payload) {
  if (!payload.is_object()) throw Error(Errc::UnparseableOutput, "extraction payload is not an object");
  ExtractionResult r;

  if (auto it = payload.find("entities"); it != payload.end()) {
    if (it->is_object()) {
      for (const auto& [name, type] : it->items()) {
        auto clean = normalize_whitespace(name);
        if (clean.empty()) continue;
        auto t = type.is_string() ? normalize_whitespace(type.get<std::string>()) : std::string{};
        r.entities[clean] = t.empty() ? std::string(kUnknownEntityType) : t;
      }
    } else if (it->is_array()) {
      for (const auto& name : *it) {
        if (!name.is_string()) continue;
        auto clean = normalize_whitespace(name.get<std::string>());
        if (!clean.empty()) r.entities[clean] = std::string(kUnknownEntityType);
      }
    }
  }

  if (auto it = payload.find("triples"); it != payload.end() && it->is_array()) {
    for (const auto& t : *it) {
      if (!t.is_array() || t.size() != 3) continue;
      if (!t[0].is_string() || !t[1].is_string() || !t[2].is_string()) continue;
      std::array<std::string, 3> triple{normalize_whitespace(t[0].get<std::string>()),
                                        normalize_whitespace(t[1].get<std::string>()),
                                        normalize_whitespace(t[2].get<std::string>())};
      if (triple[0].empty() || triple[1].empty() || triple[2].empty()) continue;
      r.triples.push_back(std::move(triple));
    }
  }

  if (auto it = payload.find("attributes"); it != payload.end() && it->is_object()) {
    for (const auto& [name, values] : it->items()) {
      auto clean = normalize_whitespace(name);
      if (clean.empty()) continue;
      for (auto& v : attribute_values(values)) {
        auto value = normalize_whitespace(v);
        if (!value.empty()) r.attributes[clean].push_back(std::move(value));
      }
    }
  }

  // Repair: every referenced entity must be declared.
  std::set<std::string> declared;
  for (const auto& [name, _] : r.entities) declared.insert(canonical_entity_key(name));
  auto ensure = [&](const std::string& name) {
    if (declared.insert(canonical_entity_key(name)).second) {
      r.entities[name] = std::string(kUnknownEntityType);
    }
  };
  for (const auto& t : r.triples) {
    ensure(t[0]);
    ensure(t[2]);
  }
  for (const auto& [name, _] : r.attributes) ensure(name);
  return r;
}

std::string default_extraction_schema() {
  return "entity types: Person, Organization, Location, Creative Work, Event, Product, "
         "Date, Concept, Other\n"
         "relations: born in, died in, located in, part of, member of, employed by, "
         "educated at, founded by, directed by, written by, performed by, produced by, "
         "spouse of, child of, parent of, capital of, citizen of, award received";
}

ExtractionResult extract_graph_facts(const EvidenceUnit& unit, std::string_view schema,
                                     ChatModel& model, UsageRecorder* usage) {
  ChatRequest request;
  request.user = prompts::render(prompts::graph_extraction(),
                                 {{"schema", std::string(schema)}, {"passage", evidence_text(unit)}});
  request.max_output_tokens = 2048;
  auto completion = complete_json(model, request, usage, [](const json& j) -> std::optional<std::string> {
    if (!j.is_object()) return "expected a JSON object with attributes, triples and entities";
    return std::nullopt;
  });
  if (!completion.value) {
    throw Error(Errc::UnparseableOutput, "extraction for unit " + unit.id + ": " + completion.error);
  }
  return parse_extraction(*completion.value);
}

// ---------------------------------------------------------------------------

std::optional<NodeId> EvidenceGroundedGraph::find_node(std::string_view name) const {
  auto it = node_by_key_.find(canonical_entity_key(name));
  if (it == node_by_key_.end()) return std::nullopt;
  return it->second;
}

std::optional<EdgeId> EvidenceGroundedGraph::find_edge(std::string_view source,
                                                       std::string_view relation,
                                                       std::string_view target) const {
  auto s = find_node(source);
  auto t = find_node(target);
  if (!s || !t) return std::nullopt;
  auto it = edge_by_triple_.find({*s, normalize_whitespace(relation), *t});
  if (it == edge_by_triple_.end()) return std::nullopt;
  return it->second;
}

NodeId EvidenceGroundedGraph::intern_node(const std::string& name, const std::string& type,
                                          const std::string& unit_id) {
  auto key = canonical_entity_key(name);
  auto [it, inserted] = node_by_key_.try_emplace(key, nodes_.size());
  if (inserted) {
    EntityNode node;
    node.name = normalize_whitespace(name);
    node.entity_type = type.empty() ? std::string(kUnknownEntityType) : type;
    nodes_.push_back(std::move(node));
  }
  auto& node = nodes_[it->second];
  if (node.entity_type == kUnknownEntityType && !type.empty() && type != kUnknownEntityType) {
    node.entity_type = type;
  }
  node.sources.insert(unit_id);
  nodes_by_unit_[unit_id].insert(it->second);
  return it->second;
}

void EvidenceGroundedGraph::merge(const std::string& unit_id, const ExtractionResult& result) {
  for (const auto& [name, type] : result.entities) intern_node(name, type, unit_id);

  for (const auto& [name, values] : result.attributes) {
    NodeId v = intern_node(name, {}, unit_id);
    nodes_[v].attributes.insert(values.begin(), values.end());
  }

  for (const auto& [subject, relation, object] : result.triples) {
    NodeId s = intern_node(subject, {}, unit_id);
    NodeId t = intern_node(object, {}, unit_id);
    auto label = normalize_whitespace(relation);
    auto [it, inserted] = edge_by_triple_.try_emplace({s, label, t}, edges_.size());
    if (inserted) {
      edges_.push_back({s, label, t, {}});
      nodes_[s].neighbor_edges.push_back(it->second);
      nodes_[t].neighbor_edges.push_back(it->second);  // self-loops count twice
    }
    edges_[it->second].sources.insert(unit_id);
  }
}

void EvidenceGroundedGraph::mark_failed(const std::string& unit_id) { failed_units_.insert(unit_id); }

std::size_t EvidenceGroundedGraph::entity_degree(std::string_view name) const {
  auto v = find_node(name);
  if (!v) throw Error(Errc::UnknownEntity, "no entity named '" + std::string(name) + "'");
  return degree(*v);
}

std::size_t EvidenceGroundedGraph::entity_count_for_unit(std::string_view unit_id) const {
  auto it = nodes_by_unit_.find(std::string(unit_id));
  return it == nodes_by_unit_.end() ? 0 : it->second.size();
}

std::vector<NodeId> EvidenceGroundedGraph::entities_for_unit(std::string_view unit_id) const {
  auto it = nodes_by_unit_.find(std::string(unit_id));
  if (it == nodes_by_unit_.end()) return {};
  return {it->second.begin(), it->second.end()};
}

json EvidenceGroundedGraph::to_json() const {
  json entities = json::array();
  json attributes = json::array();
  json node_sources = json::array();
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    entities.push_back({{"id", i}, {"name", n.name}, {"type", n.entity_type}});
    if (!n.attributes.empty()) attributes.push_back({{"entity", i}, {"values", n.attributes}});
    node_sources.push_back(n.sources);
  }
  json edges = json::array();
  json edge_sources = json::array();
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const auto& e = edges_[i];
    edges.push_back({{"id", i}, {"source", e.source}, {"relation", e.relation}, {"target", e.target}});
    edge_sources.push_back(e.sources);
  }
  return {{"version", kSchemaVersion},
          {"entities", entities},
          {"edges", edges},
          {"attributes", attributes},
          {"source_map", {{"entities", node_sources}, {"edges", edge_sources}}},
          {"failed_units", failed_units_}};
}

EvidenceGroundedGraph EvidenceGroundedGraph::from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("version") || !doc["version"].is_number_integer() ||
      doc["version"].get<int>() != kSchemaVersion) {
    throw Error(Errc::SchemaVersionMismatch,
                "graph file is not schema version " + std::to_string(kSchemaVersion));
  }
  EvidenceGroundedGraph g;
  try {
    const auto& entities = doc.at("entities");
    const auto& node_sources = doc.at("source_map").at("entities");
    const auto& edge_sources = doc.at("source_map").at("edges");
    if (node_sources.size() != entities.size()) throw Error(Errc::ParseError, "entity source map size");
    for (std::size_t i = 0; i < entities.size(); ++i) {
      const auto& e = entities[i];
      if (e.at("id").get<std::size_t>() != i) throw Error(Errc::ParseError, "entity ids not contiguous");
      EntityNode node;
      node.name = e.at("name").get<std::string>();
      node.entity_type = e.at("type").get<std::string>();
      node.sources = node_sources[i].get<std::set<std::string>>();
      if (!g.node_by_key_.emplace(canonical_entity_key(node.name), i).second) {
        throw Error(Errc::ParseError, "duplicate entity '" + node.name + "'");
      }
      for (const auto& u : node.sources) g.nodes_by_unit_[u].insert(i);
      g.nodes_.push_back(std::move(node));
    }
    for (const auto& a : doc.at("attributes")) {
      auto v = a.at("entity").get<std::size_t>();
      if (v >= g.nodes_.size()) throw Error(Errc::ParseError, "attribute for unknown entity");
      g.nodes_[v].attributes = a.at("values").get<std::set<std::string>>();
    }
    const auto& edges = doc.at("edges");
    if (edge_sources.size() != edges.size()) throw Error(Errc::ParseError, "edge source map size");
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const auto& e = edges[i];
      if (e.at("id").get<std::size_t>() != i) throw Error(Errc::ParseError, "edge ids not contiguous");
      RelationEdge edge{e.at("source").get<NodeId>(), e.at("relation").get<std::string>(),
                        e.at("target").get<NodeId>(), edge_sources[i].get<std::set<std::string>>()};
      if (edge.source >= g.nodes_.size() || edge.target >= g.nodes_.size()) {
        throw Error(Errc::ParseError, "edge endpoint out of range");
      }
      g.edge_by_triple_[{edge.source, edge.relation, edge.target}] = i;
      g.nodes_[edge.source].neighbor_edges.push_back(i);
      g.nodes_[edge.target].neighbor_edges.push_back(i);
      g.edges_.push_back(std::move(edge));
    }
    g.failed_units_ = doc.at("failed_units").get<std::set<std::string>>();
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("graph file: ") + e.what());
  }
  return g;
}

std::size_t evidence_degree(const EvidenceGroundedGraph& graph, const Corpus& corpus,
                            std::string_view unit_id) {
  if (!corpus.contains(unit_id)) {
    throw Error(Errc::UnknownUnit, "no evidence unit '" + std::string(unit_id) + "'");
  }
  return graph.entity_count_for_unit(unit_id);
}

void persist_graph(const EvidenceGroundedGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << graph.to_json().dump(1) << '\n';
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

EvidenceGroundedGraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  auto doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw Error(Errc::SchemaVersionMismatch, path.string() + " is not a graph file");
  return EvidenceGroundedGraph::from_json(doc);
}

}  // namespace mvrag
