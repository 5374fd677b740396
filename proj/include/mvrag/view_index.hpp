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

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "mvrag/corpus.hpp"
#include "mvrag/embedding.hpp"
#include "mvrag/error.hpp"
#include "mvrag/graph.hpp"

namespace mvrag {

enum class View { Relation = 0, EntityAnchor = 1, TextEvidence = 2 };
inline constexpr std::size_t kViewCount = 3;

std::string_view view_name(View view);

struct RetrievalHit {
  std::size_t item_id;
  double score;

  friend bool operator==(const RetrievalHit&, const RetrievalHit&) = default;
};

/// Nonincreasing score, ties by ascending item id.
inline bool hit_order(const RetrievalHit& a, const RetrievalHit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.item_id < b.item_id;
}

/// Cosine similarity; 0 when either operand is the zero vector.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_similarity(const Eigen::MatrixBase<DerivedA>& a,
                                            const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0)) return Scalar(0);
  return a.dot(b) / (na * nb);
}

/// Dense exhaustive-search index over one view's textualized items.
template <typename Scalar>
class BasicViewIndex {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  BasicViewIndex() = default;

  /// Row i of `vectors` embeds item `ids[i]`. Ids must be unique.
  BasicViewIndex(View view, std::vector<std::size_t> ids, Matrix vectors)
      : view_(view), ids_(std::move(ids)), vectors_(std::move(vectors)) {
    if (static_cast<std::size_t>(vectors_.rows()) != ids_.size()) {
      throw Error(Errc::DimensionMismatch, "index ids and vectors disagree in count");
    }
    std::vector<std::size_t> sorted = ids_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw Error(Errc::DuplicateId, "duplicate item id in view index");
    }
    unit_rows_ = vectors_;
    for (Eigen::Index r = 0; r < unit_rows_.rows(); ++r) {
      const Scalar n = unit_rows_.row(r).norm();
      if (n > Scalar(0)) unit_rows_.row(r) /= n;
    }
  }

  View view() const noexcept { return view_; }
  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dimension() const noexcept { return static_cast<std::size_t>(vectors_.cols()); }
  const std::vector<std::size_t>& ids() const noexcept { return ids_; }
  const Matrix& vectors() const noexcept { return vectors_; }

  /// Cosine similarity of every item against `query`, in row order.
  Vector similarities(const Eigen::Ref<const Vector>& query) const {
    if (static_cast<std::size_t>(query.size()) != dimension() && size() > 0) {
      throw Error(Errc::DimensionMismatch, "query dimension " + std::to_string(query.size()) +
                                               " != index dimension " + std::to_string(dimension()));
    }
    const Scalar n = query.norm();
    if (n == Scalar(0) || size() == 0) return Vector::Zero(static_cast<Eigen::Index>(size()));
    return unit_rows_ * (query / n);
  }

 private:
  View view_ = View::TextEvidence;
  std::vector<std::size_t> ids_;
  Matrix vectors_;
  Matrix unit_rows_;
};

using ViewIndex = BasicViewIndex<double>;

/// Exact top-k by exhaustive scan, ordered by `hit_order`.
template <typename Scalar>
std::vector<RetrievalHit> topk_search(const BasicViewIndex<Scalar>& index,
                                      const Eigen::Ref<const typename BasicViewIndex<Scalar>::Vector>& query,
                                      std::size_t k) {
  if (k == 0) throw Error(Errc::InvalidConfig, "top-k breadth must be positive");
  const auto sims = index.similarities(query);
  std::vector<RetrievalHit> hits(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    hits[i] = {index.ids()[i], static_cast<double>(sims[static_cast<Eigen::Index>(i)])};
  }
  const auto take = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(take), hits.end(), hit_order);
  hits.resize(take);
  return hits;
}

// ---------------------------------------------------------------------------
// Textualization

/// "source relation target", single-spaced.
std::string textualize_relation(const EvidenceGroundedGraph& graph, EdgeId edge);

/// "name (type). attr; attr. summary; summary" where the summaries are the
/// relation textualizations of up to `summary_limit` incident edges taken in
/// ascending edge id. Empty sections are omitted.
std::string textualize_entity(const EvidenceGroundedGraph& graph, NodeId node,
                              std::size_t summary_limit = 10);

struct ViewIndexes {
  ViewIndex relation;
  ViewIndex entity;
  ViewIndex text;

  const ViewIndex& operator[](View v) const {
    switch (v) {
      case View::Relation: return relation;
      case View::EntityAnchor: return entity;
      case View::TextEvidence: break;
    }
    return text;
  }
};

struct IndexOptions {
  std::size_t entity_summary_limit = 10;
  std::size_t batch_size = 256;
};

/// Relation items are edge ids, entity items node ids, text items corpus
/// ordinals.
ViewIndexes build_view_indexes(const Corpus& corpus, const EvidenceGroundedGraph& graph,
                               EmbeddingProvider& provider, const IndexOptions& options = {});

/// Writes manifest.json plus relation.bin, entity.bin and text.bin into
/// `directory`. Binary layout: "MVIX", u32 version, u64 dimension, u64 count,
/// then per item a u64 id followed by `dimension` little-endian doubles.
void persist_indexes(const ViewIndexes& indexes, const std::string& provider_id,
                     const std::filesystem::path& directory);

struct IndexManifest {
  std::size_t dimension = 0;
  std::string provider_id;
  std::size_t relation_size = 0;
  std::size_t entity_size = 0;
  std::size_t text_size = 0;
};

ViewIndexes load_indexes(const std::filesystem::path& directory, IndexManifest* manifest = nullptr);

/// Throws DimensionMismatch unless the index sizes equal |E|, |V| and |C|.
void check_index_completeness(const ViewIndexes& indexes, const Corpus& corpus,
                              const EvidenceGroundedGraph& graph);

}  // namespace mvrag
