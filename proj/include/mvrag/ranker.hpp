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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "mvrag/corpus.hpp"
#include "mvrag/graph.hpp"
#include "mvrag/view_index.hpp"

namespace mvrag {

/// Hits from the three views for one query. Relation hits carry edge ids,
/// anchor hits node ids, text hits corpus ordinals.
struct ViewHits {
  std::vector<RetrievalHit> relation;
  std::vector<RetrievalHit> anchor;
  std::vector<RetrievalHit> text;
};

struct FusionConfig {
  Eigen::Vector3d alpha{0.25, 0.10, 0.65};  // relation, entity anchor, text
  double beta = 0.02;
  double lambda = 0.05;
  std::size_t k_final = 3;
  std::size_t k_view = 20;

  /// Throws InvalidConfig: alpha must be nonnegative and sum to 1 (1e-9),
  /// beta and lambda nonnegative, both breadths positive.
  void validate() const;

  /// Tuned weights for "hotpotqa", "2wikimultihopqa" and "musique"; any other
  /// name gets the musique weights.
  static FusionConfig preset(std::string_view dataset);

  nlohmann::json to_json() const;
  /// Fields absent from `j` keep their value in `base`.
  static FusionConfig from_json(const nlohmann::json& j, FusionConfig base);
  static FusionConfig from_json(const nlohmann::json& j);
};

/// One evidence unit in the projected candidate set, with the hits that
/// reach it from each view.
struct CandidateSupport {
  std::string unit_id;
  std::vector<RetrievalHit> relation_hits;  // edges e with unit in src(e)
  std::vector<RetrievalHit> anchor_hits;    // nodes v with unit in src(v)
  std::optional<double> text_score;
};

struct FusedCandidate {
  std::string unit_id;
  Eigen::Vector3d raw = Eigen::Vector3d::Zero();
  Eigen::Vector3d normalized = Eigen::Vector3d::Zero();
  double structural_control = 1.0;
  int view_count = 0;
  double bonus = 1.0;
  double final_score = 0.0;

  nlohmann::json to_json() const;
};

/// Union of text hits and the source units of relation and anchor hits,
/// ascending by unit id. Throws DanglingSourceReference for hit ids or
/// source units that do not resolve.
std::vector<CandidateSupport> project_candidates(const ViewHits& hits, const EvidenceGroundedGraph& graph,
                                                 const Corpus& corpus);

/// Strongest relation hit plus beta times the rest; 0 without relation hits.
/// The strongest hit is the maximum score, ties to the lowest edge id.
double relation_score(const CandidateSupport& candidate, double beta);

/// 1 for degree <= 1, else 1 / (1 + ln degree).
double degree_penalty(std::size_t degree);

/// Sum over anchor hits of similarity times degree_penalty(deg(v)).
double anchor_score(const CandidateSupport& candidate, const EvidenceGroundedGraph& graph);

/// Same piecewise form as degree_penalty, applied to an evidence unit's
/// entity count.
double structural_control(std::size_t evidence_degree);

/// 1 + lambda * max(0, m - 1) / 2.
double consensus_bonus(int view_count, double lambda);

/// Raw view scores, structural control and view count for each candidate.
std::vector<FusedCandidate> score_candidates(const std::vector<CandidateSupport>& candidates,
                                             const EvidenceGroundedGraph& graph, double beta);

/// Per-view max normalization over the candidate set; a view whose maximum
/// is not positive normalizes to all zeros.
void normalize_views(std::vector<FusedCandidate>& candidates);

/// Fills bonus and final score, sorts by descending score (ties by unit id)
/// and keeps the first k_final.
std::vector<FusedCandidate> fuse_and_rank(std::vector<FusedCandidate> candidates, const FusionConfig& config);

/// project -> score -> normalize -> fuse. When `all` is given it receives
/// every scored candidate (ascending unit id) for debugging dumps.
std::vector<FusedCandidate> rank_evidence(const ViewHits& hits, const EvidenceGroundedGraph& graph,
                                          const Corpus& corpus, const FusionConfig& config,
                                          std::vector<FusedCandidate>* all = nullptr);

/// Which of the three views take part in retrieval.
struct ViewMask {
  std::array<bool, kViewCount> enabled{true, true, true};

  bool operator[](View v) const { return enabled[static_cast<std::size_t>(v)]; }
  bool any() const { return enabled[0] || enabled[1] || enabled[2]; }
  /// Parses a comma list of r/a/t (or relation/entity/text). Throws InvalidConfig.
  static ViewMask parse(std::string_view letters);
  std::string to_string() const;
};

struct RetrievalOptions {
  FusionConfig fusion;
  ViewMask views;
  bool parallel_views = true;
};

struct RetrievalResult {
  std::vector<FusedCandidate> ranked;
  std::vector<FusedCandidate> candidates;
  ViewHits hits;
};

/// Embeds a query, searches the enabled views and ranks evidence units.
/// Holds references; the corpus, graph, indexes and embedder must outlive it.
class MultiViewRetriever {
 public:
  MultiViewRetriever(const Corpus& corpus, const EvidenceGroundedGraph& graph, const ViewIndexes& indexes,
                     EmbeddingProvider& embedder, RetrievalOptions options);

  RetrievalResult retrieve(std::string_view query) const;

  /// Hits for an already embedded query.
  ViewHits search(const EmbeddingVector& query) const;

  const Corpus& corpus() const noexcept { return corpus_; }
  const RetrievalOptions& options() const noexcept { return options_; }

 private:
  const Corpus& corpus_;
  const EvidenceGroundedGraph& graph_;
  const ViewIndexes& indexes_;
  EmbeddingProvider& embedder_;
  RetrievalOptions options_;
};

}  // namespace mvrag
