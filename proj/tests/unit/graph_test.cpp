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

#include <fstream>
#include <map>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "mvrag/error.hpp"
#include "mvrag/graph.hpp"

namespace mvrag {
namespace {

using nlohmann::json;

ExtractionResult triples_only(std::vector<std::array<std::string, 3>> triples) {
  ExtractionResult r;
  r.triples = std::move(triples);
  for (const auto& t : r.triples) {
    r.entities[t[0]] = "Thing";
    r.entities[t[2]] = "Thing";
  }
  return r;
}

TEST(ParseExtraction, RepairsMissingEntities) {
  const auto r = parse_extraction(json::parse(
      R"({"attributes":{"Ghost":["age: 3"]},"triples":[["Paris","capital of","France"]],"entities":{"Paris":"City"}})"));
  EXPECT_EQ(r.entities.at("Paris"), "City");
  EXPECT_EQ(r.entities.at("France"), kUnknownEntityType);
  EXPECT_EQ(r.entities.at("Ghost"), kUnknownEntityType);
}

TEST(ParseExtraction, DropsMalformedTriples) {
  const auto r = parse_extraction(json::parse(R"({"triples":[["a","b"],["x","",""],["s","r","t"],"junk"]})"));
  ASSERT_EQ(r.triples.size(), 1u);
  EXPECT_EQ(r.triples[0][1], "r");
}

TEST(ParseExtraction, RejectsNonObject) {
  EXPECT_THROW(parse_extraction(json::parse("[1,2]")), Error);
}

TEST(ExtractGraphFacts, ScriptedPayload) {
  ScriptedChatModel model;
  model.add({{"Paris is the capital of France."},
             {},
             R"({"attributes":{},"triples":[["Paris","capital of","France"]],"entities":{"Paris":"City","France":"Country"}})"});
  const auto r = extract_graph_facts({"c1", "", "Paris is the capital of France."}, default_extraction_schema(), model);
  ASSERT_EQ(r.triples.size(), 1u);
  EXPECT_EQ(r.triples[0], (std::array<std::string, 3>{"Paris", "capital of", "France"}));
  EXPECT_EQ(r.entities, (std::map<std::string, std::string>{{"France", "Country"}, {"Paris", "City"}}));
}

TEST(ExtractGraphFacts, EmptyShape) {
  ScriptedChatModel model;
  model.set_default(R"({"attributes": {}, "triples": [], "entities": {}})");
  const auto r = extract_graph_facts({"c1", "", "Nothing here."}, "", model);
  EXPECT_TRUE(r.empty());
}

TEST(ExtractGraphFacts, RepairPromptThenFailure) {
  ScriptedChatModel model;
  model.set_default("not json at all");
  UsageRecorder usage;
  EXPECT_THROW(extract_graph_facts({"c1", "", "x"}, "", model, &usage), Error);
  EXPECT_EQ(model.call_count(), 2u);
  EXPECT_NE(model.requests()[1].user.find("<previous_output>"), std::string::npos);
}

TEST(Merge, SharedTripleAccumulatesSources) {
  EvidenceGroundedGraph g;
  g.merge("c1", triples_only({{"Paris", "capital of", "France"}}));
  g.merge("c2", triples_only({{"paris", "capital of", " France "}}));
  ASSERT_EQ(g.edges().size(), 1u);
  EXPECT_EQ(g.edges()[0].sources, (std::set<std::string>{"c1", "c2"}));
  EXPECT_EQ(g.nodes().size(), 2u);
  EXPECT_EQ(g.nodes()[*g.find_node("PARIS")].name, "Paris");
}

TEST(Merge, EmptyResultLeavesGraphUnchanged) {
  EvidenceGroundedGraph g;
  g.merge("c1", triples_only({{"A", "r", "B"}}));
  const auto before = g;
  g.merge("c2", ExtractionResult{});
  EXPECT_EQ(g, before);
}

TEST(Merge, IsIdempotent) {
  EvidenceGroundedGraph g;
  auto r = triples_only({{"A", "r", "B"}, {"B", "s", "C"}});
  r.attributes["A"] = {"k: v"};
  g.merge("c1", r);
  const auto once = g;
  g.merge("c1", r);
  EXPECT_EQ(g, once);
}

TEST(Merge, UnknownTypeUpgrades) {
  EvidenceGroundedGraph g;
  ExtractionResult first;
  first.triples = {{"Lake", "in", "Eastmark"}};
  first.entities = {{"Lake", "Location"}, {"Eastmark", std::string(kUnknownEntityType)}};
  g.merge("c1", first);
  ExtractionResult second;
  second.entities = {{"Eastmark", "Region"}};
  g.merge("c2", second);
  EXPECT_EQ(g.nodes()[*g.find_node("eastmark")].entity_type, "Region");
}

TEST(Degree, CountsIncomingAndOutgoing) {
  EvidenceGroundedGraph g;
  ExtractionResult iso;
  iso.entities = {{"Loner", "Thing"}};
  g.merge("c0", iso);
  g.merge("c1", triples_only({{"Hub", "out1", "X1"}, {"Hub", "out2", "X2"}, {"Hub", "out3", "X3"},
                              {"Y1", "in1", "Hub"}, {"Y2", "in2", "Hub"}}));
  EXPECT_EQ(g.entity_degree("Loner"), 0u);
  EXPECT_EQ(g.entity_degree("X1"), 1u);
  EXPECT_EQ(g.entity_degree("Hub"), 5u);
  EXPECT_THROW(g.entity_degree("Nobody"), Error);
}

TEST(Degree, SumIsTwiceEdgeCount) {
  EvidenceGroundedGraph g;
  g.merge("c1", triples_only({{"A", "married", "A"}, {"A", "r", "B"}, {"B", "r", "C"}, {"C", "r", "A"}}));
  std::size_t total = 0;
  for (NodeId v = 0; v < g.nodes().size(); ++v) total += g.degree(v);
  EXPECT_EQ(total, 2 * g.edges().size());
}

TEST(EvidenceDegree, MatchesBruteForceAndHandlesFailures) {
  const auto corpus = ingest_passages(std::vector<PassageRecord>{
      {"c1", "", "a"}, {"c2", "", "b"}, {"c3", "", "c"}, {"c4", "", "d"}, {"c5", "", "e"}});
  EvidenceGroundedGraph g;
  ExtractionResult abc;
  abc.entities = {{"A", "T"}, {"B", "T"}, {"C", "T"}};
  g.merge("c1", abc);
  g.merge("c2", triples_only({{"A", "r", "D"}}));
  g.merge("c3", triples_only({{"E", "r", "F"}, {"F", "s", "G"}}));
  g.mark_failed("c4");
  EXPECT_EQ(evidence_degree(g, corpus, "c1"), 3u);
  EXPECT_EQ(evidence_degree(g, corpus, "c4"), 0u);
  for (const auto& unit : corpus.units()) {
    std::size_t brute = 0;
    for (const auto& node : g.nodes()) brute += node.sources.contains(unit.id);
    EXPECT_EQ(evidence_degree(g, corpus, unit.id), brute) << unit.id;
  }
  EXPECT_THROW(evidence_degree(g, corpus, "c9"), Error);
}

TEST(Persist, RoundTripIsExact) {
  const auto dir = testing::scratch_dir("graph");
  EvidenceGroundedGraph g;
  auto r = triples_only({{"A", "r", "B"}, {"B", "s", "C"}});
  r.attributes["A"] = {"population: 2M"};
  g.merge("c1", r);
  g.merge("c2", triples_only({{"A", "r", "B"}}));
  g.mark_failed("c3");
  persist_graph(g, dir / "g.json");
  const auto loaded = load_graph(dir / "g.json");
  EXPECT_EQ(loaded, g);
  EXPECT_EQ(loaded.entity_count_for_unit("c1"), 3u);

  persist_graph(EvidenceGroundedGraph{}, dir / "empty.json");
  EXPECT_EQ(load_graph(dir / "empty.json"), EvidenceGroundedGraph{});
}

TEST(Persist, UnknownVersionRejected) {
  const auto dir = testing::scratch_dir("graph-version");
  EvidenceGroundedGraph g;
  auto doc = g.to_json();
  doc["version"] = 99;
  std::ofstream(dir / "g.json") << doc.dump();
  try {
    load_graph(dir / "g.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SchemaVersionMismatch);
  }
}

TEST(SyntheticGraph, CountsAndGrounding) {
  auto p = testing::load_synthetic();
  EXPECT_EQ(p->graph.nodes().size(), 18u);
  EXPECT_EQ(p->graph.edges().size(), 12u);
  std::size_t total = 0;
  for (NodeId v = 0; v < p->graph.nodes().size(); ++v) {
    total += p->graph.degree(v);
    EXPECT_FALSE(p->graph.nodes()[v].sources.empty());
    for (const auto& s : p->graph.nodes()[v].sources) EXPECT_TRUE(p->bench.corpus.contains(s));
  }
  for (const auto& e : p->graph.edges()) EXPECT_FALSE(e.sources.empty());
  EXPECT_EQ(total, 2 * p->graph.edges().size());
  // Eastmark first appears untyped, then typed by its own passage.
  EXPECT_EQ(p->graph.nodes()[*p->graph.find_node("Eastmark")].entity_type, "Region");
}

}  // namespace
}  // namespace mvrag
