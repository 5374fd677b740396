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

#include <cmath>

#include <gtest/gtest.h>

#include "fusion_oracle.hpp"
#include "mvrag/error.hpp"
#include "mvrag/ranker.hpp"

namespace mvrag {
namespace {

// 1 / (1 + ln 3) and 1 / (1 + ln 7), evaluated to 30 digits offline.
constexpr double kPenalty3 = 0.476505358040504407973512142788;
constexpr double kPenalty7 = 0.339453666066725545538599074414;
constexpr double kAnchorExample = 1.08590321482430264478410728567;

CandidateSupport with_relation_hits(std::vector<double> scores) {
  CandidateSupport c{"c", {}, {}, std::nullopt};
  for (std::size_t i = 0; i < scores.size(); ++i) c.relation_hits.push_back({i, scores[i]});
  return c;
}

TEST(RelationScore, ClosedForm) {
  EXPECT_EQ(relation_score(with_relation_hits({}), 0.02), 0.0);
  EXPECT_NEAR(relation_score(with_relation_hits({0.9, 0.5, 0.3}), 0.02), 0.916, 1e-9);
  EXPECT_NEAR(relation_score(with_relation_hits({0.3, 0.9, 0.5}), 0.02), 0.916, 1e-9);
  EXPECT_NEAR(relation_score(with_relation_hits({0.7}), 0.02), 0.7, 1e-12);
  EXPECT_NEAR(relation_score(with_relation_hits({0.7}), 5.0), 0.7, 1e-12);
}

TEST(DegreePenalty, ClosedForm) {
  EXPECT_EQ(degree_penalty(0), 1.0);
  EXPECT_EQ(degree_penalty(1), 1.0);
  EXPECT_NEAR(degree_penalty(3), kPenalty3, 1e-9);
}

TEST(StructuralControl, ClosedForm) {
  EXPECT_EQ(structural_control(0), 1.0);
  EXPECT_EQ(structural_control(1), 1.0);
  EXPECT_NEAR(structural_control(7), kPenalty7, 1e-9);
}

TEST(AnchorScore, ClosedForm) {
  EvidenceGroundedGraph g;
  ExtractionResult r;
  // Solo has degree 1, Hub degree 3.
  r.triples = {{"Solo", "r0", "Hub"}, {"Hub", "r1", "X"}, {"Y", "r2", "Hub"}};
  r.entities = {{"Solo", "T"}, {"Hub", "T"}, {"X", "T"}, {"Y", "T"}};
  g.merge("c", r);
  const auto solo = *g.find_node("Solo");
  const auto hub = *g.find_node("Hub");
  ASSERT_EQ(g.degree(solo), 1u);
  ASSERT_EQ(g.degree(hub), 3u);

  CandidateSupport none{"c", {}, {}, std::nullopt};
  EXPECT_EQ(anchor_score(none, g), 0.0);
  CandidateSupport one{"c", {}, {{solo, 0.8}}, std::nullopt};
  EXPECT_NEAR(anchor_score(one, g), 0.8, 1e-12);
  CandidateSupport two{"c", {}, {{solo, 0.8}, {hub, 0.6}}, std::nullopt};
  EXPECT_NEAR(anchor_score(two, g), kAnchorExample, 1e-9);
}

TEST(ConsensusBonus, ClosedForm) {
  EXPECT_EQ(consensus_bonus(0, 0.05), 1.0);
  EXPECT_EQ(consensus_bonus(1, 0.05), 1.0);
  EXPECT_NEAR(consensus_bonus(2, 0.05), 1.025, 1e-12);
  EXPECT_NEAR(consensus_bonus(3, 0.05), 1.05, 1e-12);
}

FusedCandidate make(const std::string& id, Eigen::Vector3d normalized, double control, int views) {
  FusedCandidate c;
  c.unit_id = id;
  c.raw = normalized;
  c.normalized = normalized;
  c.structural_control = control;
  c.view_count = views;
  return c;
}

TEST(FuseAndRank, DefaultWeightsExample) {
  FusionConfig config;  // (0.25, 0.10, 0.65), lambda 0.05
  const auto ranked = fuse_and_rank({make("c1", {1.0, 0.5, 1.0}, 1.0, 3)}, config);
  ASSERT_EQ(ranked.size(), 1u);
  EXPECT_NEAR(ranked[0].final_score, 0.9975, 1e-9);
  EXPECT_NEAR(ranked[0].bonus, 1.05, 1e-12);
}

TEST(FuseAndRank, TextOnlyCandidate) {
  const auto ranked = fuse_and_rank({make("c1", {0.0, 0.0, 1.0}, 1.0, 1)}, FusionConfig{});
  EXPECT_NEAR(ranked[0].final_score, 0.65, 1e-12);
  EXPECT_TRUE(fuse_and_rank({}, FusionConfig{}).empty());
}

TEST(FuseAndRank, TiesGoToLowerUnitIdAndTruncate) {
  FusionConfig config;
  config.k_final = 2;
  const auto ranked = fuse_and_rank({make("c3", {0, 0, 0.5}, 1, 1), make("c1", {0, 0, 0.5}, 1, 1),
                                     make("c2", {0, 0, 0.5}, 1, 1)},
                                    config);
  ASSERT_EQ(ranked.size(), 2u);
  EXPECT_EQ(ranked[0].unit_id, "c1");
  EXPECT_EQ(ranked[1].unit_id, "c2");
}

TEST(FuseAndRank, ConsensusRatioIsExact) {
  for (double lambda : {0.0, 0.05, 0.5}) {
    FusionConfig config;
    config.lambda = lambda;
    const auto ranked = fuse_and_rank({make("a", {0.7, 0.4, 0.9}, 0.6, 1), make("b", {0.7, 0.4, 0.9}, 0.6, 3)}, config);
    const auto& one = ranked[0].unit_id == "a" ? ranked[0] : ranked[1];
    const auto& three = ranked[0].unit_id == "b" ? ranked[0] : ranked[1];
    EXPECT_NEAR(three.final_score / one.final_score, 1.0 + lambda, 1e-12);
  }
}

TEST(NormalizeViews, MaxNormalization) {
  std::vector<FusedCandidate> cs(3);
  cs[0].raw = {0.0, 0.3, 0.2};
  cs[1].raw = {0.0, 0.0, 0.4};
  cs[2].raw = {0.0, 0.0, 0.8};
  normalize_views(cs);
  EXPECT_NEAR(cs[0].normalized[2], 0.25, 1e-12);
  EXPECT_NEAR(cs[1].normalized[2], 0.5, 1e-12);
  EXPECT_NEAR(cs[2].normalized[2], 1.0, 1e-12);
  for (const auto& c : cs) EXPECT_EQ(c.normalized[0], 0.0);
  EXPECT_NEAR(cs[0].normalized[1], 1.0, 1e-12);
}

TEST(ProjectCandidates, SourceProjectionAndUnion) {
  const auto corpus = ingest_passages(std::vector<PassageRecord>{{"c1", "", "a"}, {"c2", "", "b"}, {"c3", "", "c"}});
  EvidenceGroundedGraph g;
  ExtractionResult r;
  r.triples = {{"A", "r", "B"}};
  r.entities = {{"A", "T"}, {"B", "T"}};
  g.merge("c1", r);
  g.merge("c2", r);
  ExtractionResult lone;
  lone.entities = {{"Z", "T"}};
  g.merge("c3", lone);

  EXPECT_TRUE(project_candidates({}, g, corpus).empty());

  ViewHits only_edge;
  only_edge.relation = {{0, 0.9}};
  const auto projected = project_candidates(only_edge, g, corpus);
  ASSERT_EQ(projected.size(), 2u);
  EXPECT_EQ(projected[0].unit_id, "c1");
  EXPECT_EQ(projected[1].unit_id, "c2");
  EXPECT_EQ(projected[0].relation_hits.size(), 1u);

  ViewHits overlap;
  overlap.text = {{2, 0.4}};
  overlap.anchor = {{*g.find_node("Z"), 0.5}};
  const auto merged = project_candidates(overlap, g, corpus);
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_EQ(merged[0].unit_id, "c3");
  EXPECT_TRUE(merged[0].text_score.has_value());
  EXPECT_EQ(merged[0].anchor_hits.size(), 1u);

  ViewHits dangling;
  dangling.relation = {{42, 0.1}};
  EXPECT_THROW(project_candidates(dangling, g, corpus), Error);
}

TEST(FusionConfig, ValidationAndPresets) {
  FusionConfig c;
  EXPECT_NO_THROW(c.validate());
  c.alpha = {0.5, 0.5, 0.5};
  EXPECT_THROW(c.validate(), Error);
  c = FusionConfig{};
  c.beta = -1;
  EXPECT_THROW(c.validate(), Error);
  c = FusionConfig{};
  c.k_final = 0;
  EXPECT_THROW(c.validate(), Error);

  EXPECT_EQ(FusionConfig::preset("hotpotqa").alpha, Eigen::Vector3d(0.15, 0.20, 0.65));
  EXPECT_EQ(FusionConfig::preset("2wikimultihopqa").alpha, Eigen::Vector3d(0.25, 0.20, 0.55));
  EXPECT_EQ(FusionConfig::preset("musique").alpha, Eigen::Vector3d(0.25, 0.10, 0.65));
  EXPECT_EQ(FusionConfig::preset("anything").alpha, Eigen::Vector3d(0.25, 0.10, 0.65));
  EXPECT_EQ(FusionConfig::preset("hotpotqa").k_final, 3u);

  const auto round = FusionConfig::from_json(FusionConfig::preset("hotpotqa").to_json());
  EXPECT_EQ(round.alpha, FusionConfig::preset("hotpotqa").alpha);
}

TEST(ViewMask, Parse) {
  EXPECT_EQ(ViewMask::parse("t").to_string(), "t");
  EXPECT_EQ(ViewMask::parse("relation,text").to_string(), "r,t");
  EXPECT_EQ(ViewMask::parse("r,a,t").to_string(), "r,a,t");
  EXPECT_THROW(ViewMask::parse("x"), Error);
  EXPECT_THROW(ViewMask::parse(""), Error);
}

TEST(RankEvidence, MatchesReferenceOnRandomInstances) {
  for (std::uint32_t seed = 0; seed < 30; ++seed) {
    const auto raw = testing::random_instance(seed);
    const auto built = testing::build_instance(raw);
    FusionConfig config;
    config.k_final = 5;
    const auto ranked = rank_evidence(built.hits, built.graph, built.corpus, config);
    testing::OracleParams params;
    params.top_k = 5;
    const auto expected = testing::reference_rank(raw, params);
    ASSERT_EQ(ranked.size(), expected.size()) << "seed " << seed;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      EXPECT_EQ(ranked[i].unit_id, expected[i].unit_id) << "seed " << seed << " rank " << i;
      EXPECT_NEAR(ranked[i].final_score, expected[i].score, 1e-9);
    }
  }
}

TEST(RankEvidence, ZeroLambdaEqualsPureWeightedFusion) {
  for (std::uint32_t seed = 100; seed < 110; ++seed) {
    const auto raw = testing::random_instance(seed);
    const auto built = testing::build_instance(raw);
    FusionConfig config;
    config.lambda = 0.0;
    config.k_final = 50;
    std::vector<FusedCandidate> all;
    const auto ranked = rank_evidence(built.hits, built.graph, built.corpus, config, &all);
    for (const auto& c : ranked) {
      const double pure = config.alpha[0] * c.normalized[0] +
                          config.alpha[1] * c.normalized[1] * c.structural_control +
                          config.alpha[2] * c.normalized[2];
      EXPECT_DOUBLE_EQ(c.final_score, pure);
    }
  }
}

}  // namespace
}  // namespace mvrag
