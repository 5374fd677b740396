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

#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "mvrag/embedding.hpp"
#include "mvrag/error.hpp"
#include "mvrag/view_index.hpp"

namespace mvrag {
namespace {

ExtractionResult triple(const std::string& s, const std::string& r, const std::string& t) {
  ExtractionResult out;
  out.triples = {{s, r, t}};
  out.entities = {{s, "Thing"}, {t, "Thing"}};
  return out;
}

TEST(HashEmbedder, DeterministicAndSized) {
  HashEmbedder embedder;
  const std::vector<std::string> texts = {"Paris is in France", "Paris is in France", "unrelated words"};
  const auto vectors = embed(texts, embedder);
  ASSERT_EQ(vectors.size(), 3u);
  EXPECT_EQ(vectors[0].size(), 64);
  EXPECT_EQ(vectors[0], vectors[1]);
  EXPECT_EQ(vectors[2].size(), vectors[0].size());
  EXPECT_TRUE(embed(std::span<const std::string>{}, embedder).empty());
  EXPECT_EQ(embedder.id(), "hash-64-0");
}

TEST(HashEmbedder, SeedChangesVectors) {
  EXPECT_NE(HashEmbedder(64, 0).embed_one("paris france"), HashEmbedder(64, 1).embed_one("paris france"));
}

class ConstantProvider : public EmbeddingProvider {
 public:
  explicit ConstantProvider(std::vector<EmbeddingVector> out) : out_(std::move(out)) {}
  std::vector<EmbeddingVector> embed(std::span<const std::string>) override { return out_; }
  std::string id() const override { return "constant"; }

 private:
  std::vector<EmbeddingVector> out_;
};

TEST(Embed, ValidatesProviderOutput) {
  const std::vector<std::string> two = {"a", "b"};
  ConstantProvider short_batch({EmbeddingVector::Ones(3)});
  EXPECT_THROW(embed(two, short_batch), Error);
  ConstantProvider ragged({EmbeddingVector::Ones(3), EmbeddingVector::Ones(4)});
  EXPECT_THROW(embed(two, ragged), Error);
  EmbeddingVector bad = EmbeddingVector::Ones(3);
  bad[1] = std::numeric_limits<double>::quiet_NaN();
  ConstantProvider nan({bad, bad});
  EXPECT_THROW(embed(two, nan), Error);
}

ViewIndex random_index(std::mt19937& rng, std::size_t items, Eigen::Index dim) {
  std::normal_distribution<double> gauss;
  ViewIndex::Matrix m(static_cast<Eigen::Index>(items), dim);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) m(r, c) = gauss(rng);
  }
  std::vector<std::size_t> ids(items);
  for (std::size_t i = 0; i < items; ++i) ids[i] = i;
  return ViewIndex(View::TextEvidence, ids, m);
}

TEST(TopK, SelfQueryScoresOne) {
  std::mt19937 rng(1);
  const auto index = random_index(rng, 10, 8);
  const EmbeddingVector q = index.vectors().row(4).transpose();
  const auto hits = topk_search(index, q, 3);
  ASSERT_EQ(hits.size(), 3u);
  EXPECT_EQ(hits[0].item_id, 4u);
  EXPECT_NEAR(hits[0].score, 1.0, 1e-9);
}

TEST(TopK, OrthogonalQueryScoresZero) {
  ViewIndex::Matrix m(3, 4);
  m << 1, 0, 0, 0, 0, 1, 0, 0, 1, 1, 0, 0;
  const ViewIndex index(View::Relation, {7, 8, 9}, m);
  EmbeddingVector q(4);
  q << 0, 0, 0, 2;
  for (const auto& h : topk_search(index, q, 5)) EXPECT_NEAR(h.score, 0.0, 1e-9);
  // All tied at zero: ascending id.
  const auto hits = topk_search(index, q, 5);
  EXPECT_EQ(hits[0].item_id, 7u);
  EXPECT_EQ(hits[2].item_id, 9u);
}

TEST(TopK, MatchesBruteForceSortAndScaleInvariance) {
  std::mt19937 rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const auto index = random_index(rng, 30, 16);
    EmbeddingVector q = EmbeddingVector::Zero(16);
    std::normal_distribution<double> gauss;
    for (Eigen::Index i = 0; i < 16; ++i) q[i] = gauss(rng);

    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i = 0; i < 30; ++i) {
      const EmbeddingVector row = index.vectors().row(static_cast<Eigen::Index>(i)).transpose();
      all.emplace_back(row.dot(q) / (row.norm() * q.norm()), i);
    }
    std::sort(all.begin(), all.end(), [](auto& a, auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (std::size_t k : {1u, 5u, 30u, 40u}) {
      const auto hits = topk_search(index, q, k);
      ASSERT_EQ(hits.size(), std::min<std::size_t>(k, 30));
      for (std::size_t i = 0; i < hits.size(); ++i) {
        EXPECT_EQ(hits[i].item_id, all[i].second);
        EXPECT_NEAR(hits[i].score, all[i].first, 1e-9);
      }
      const EmbeddingVector scaled = 3.5 * q;
      const auto scaled_hits = topk_search(index, scaled, k);
      for (std::size_t i = 0; i < hits.size(); ++i) EXPECT_EQ(scaled_hits[i].item_id, hits[i].item_id);
    }
  }
}

TEST(TopK, FloatIndexAndErrors) {
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m(2, 2);
  m << 1, 0, 0, 1;
  const BasicViewIndex<float> index(View::EntityAnchor, {0, 1}, m);
  Eigen::VectorXf q(2);
  q << 0, 3;
  EXPECT_EQ(topk_search(index, q, 1)[0].item_id, 1u);
  EXPECT_THROW(topk_search(index, q, 0), Error);
  Eigen::VectorXf wrong(3);
  wrong.setOnes();
  EXPECT_THROW(topk_search(index, wrong, 1), Error);
  EXPECT_THROW(BasicViewIndex<float>(View::EntityAnchor, {0, 0}, m), Error);
}

TEST(Textualize, Relation) {
  EvidenceGroundedGraph g;
  g.merge("c1", triple("Paris", "capital of ", "France"));
  g.merge("c1", triple("A", "married", "A"));
  EXPECT_EQ(textualize_relation(g, 0), "Paris capital of France");
  EXPECT_EQ(textualize_relation(g, 1), "A married A");
}

TEST(Textualize, Entity) {
  EvidenceGroundedGraph g;
  ExtractionResult lone;
  lone.entities = {{"Paris", "City"}};
  g.merge("c1", lone);
  EXPECT_EQ(textualize_entity(g, 0), "Paris (City).");

  auto r = triple("Paris", "capital of", "France");
  r.entities["Paris"] = "City";
  r.attributes["Paris"] = {"population: 2M"};
  g.merge("c2", r);
  EXPECT_EQ(textualize_entity(g, 0), "Paris (City). population: 2M. Paris capital of France");
}

TEST(Textualize, EntitySummaryLimit) {
  EvidenceGroundedGraph g;
  for (int i = 0; i < 15; ++i) g.merge("c1", triple("Hub", "links", "Leaf" + std::to_string(i)));
  const auto text = textualize_entity(g, *g.find_node("Hub"), 10);
  std::size_t summaries = 0;
  for (std::size_t pos = 0; (pos = text.find("Hub links", pos)) != std::string::npos; ++pos) ++summaries;
  EXPECT_EQ(summaries, 10u);
}

TEST(BuildIndexes, CompletenessAndPersistence) {
  auto p = testing::load_synthetic();
  EXPECT_EQ(p->indexes.relation.size(), p->graph.edges().size());
  EXPECT_EQ(p->indexes.entity.size(), p->graph.nodes().size());
  EXPECT_EQ(p->indexes.text.size(), p->bench.corpus.size());
  EXPECT_NO_THROW(check_index_completeness(p->indexes, p->bench.corpus, p->graph));

  const auto a = testing::scratch_dir("index-a");
  const auto b = testing::scratch_dir("index-b");
  persist_indexes(p->indexes, p->embedder->id(), a);
  const auto rebuilt = build_view_indexes(p->bench.corpus, p->graph, *p->embedder);
  persist_indexes(rebuilt, p->embedder->id(), b);
  for (const char* f : {"relation.bin", "entity.bin", "text.bin", "manifest.json"}) {
    EXPECT_EQ(testing::read_file(a / f), testing::read_file(b / f)) << f;
  }
  IndexManifest manifest;
  const auto loaded = load_indexes(a, &manifest);
  EXPECT_EQ(manifest.provider_id, "hash-64-0");
  EXPECT_EQ(manifest.dimension, 64u);
  EXPECT_EQ(loaded.text.vectors(), p->indexes.text.vectors());
  EXPECT_EQ(loaded.relation.ids(), p->indexes.relation.ids());
}

TEST(BuildIndexes, SizesFollowGraph) {
  // 10 edges over 8 nodes, 12 units.
  std::vector<PassageRecord> records;
  for (int i = 0; i < 12; ++i) records.push_back({"c" + std::to_string(i), "", "passage " + std::to_string(i)});
  const auto corpus = ingest_passages(records);
  EvidenceGroundedGraph g;
  for (int e = 0; e < 10; ++e) {
    g.merge("c" + std::to_string(e), triple("N" + std::to_string(e % 8), "r" + std::to_string(e),
                                            "N" + std::to_string((e + 1) % 8)));
  }
  ASSERT_EQ(g.nodes().size(), 8u);
  HashEmbedder embedder;
  const auto indexes = build_view_indexes(corpus, g, embedder);
  EXPECT_EQ(indexes.relation.size(), 10u);
  EXPECT_EQ(indexes.entity.size(), 8u);
  EXPECT_EQ(indexes.text.size(), 12u);

  ViewIndexes truncated = indexes;
  truncated.entity = ViewIndex(View::EntityAnchor, {0}, indexes.entity.vectors().topRows(1));
  EXPECT_THROW(check_index_completeness(truncated, corpus, g), Error);
}

}  // namespace
}  // namespace mvrag
