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

#include "mvrag/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <map>

#include "mvrag/error.hpp"
#include "mvrag/text.hpp"

namespace mvrag {

using nlohmann::json;

void FusionConfig::validate() const {
  if ((alpha.array() < 0.0).any()) throw Error(Errc::InvalidConfig, "fusion weights must be nonnegative");
  if (std::abs(alpha.sum() - 1.0) > 1e-9) {
    throw Error(Errc::InvalidConfig, "fusion weights must sum to 1 (got " + std::to_string(alpha.sum()) + ")");
  }
  if (!(beta >= 0.0)) throw Error(Errc::InvalidConfig, "beta must be nonnegative");
  if (!(lambda >= 0.0)) throw Error(Errc::InvalidConfig, "lambda must be nonnegative");
  if (k_final == 0) throw Error(Errc::InvalidConfig, "final top-k must be at least 1");
  if (k_view == 0) throw Error(Errc::InvalidConfig, "per-view breadth must be at least 1");
}

FusionConfig FusionConfig::preset(std::string_view dataset) {
  FusionConfig c;
  const auto name = to_lower(dataset);
  if (name == "hotpotqa") c.alpha = {0.15, 0.20, 0.65};
  else if (name == "2wikimultihopqa" || name == "2wiki") c.alpha = {0.25, 0.20, 0.55};
  else c.alpha = {0.25, 0.10, 0.65};
  return c;
}

json FusionConfig::to_json() const {
  return {{"alpha", {alpha[0], alpha[1], alpha[2]}},
          {"beta", beta},
          {"lambda", lambda},
          {"top_k", k_final},
          {"k_view", k_view}};
}

FusionConfig FusionConfig::from_json(const json& j) { return from_json(j, FusionConfig{}); }

FusionConfig FusionConfig::from_json(const json& j, FusionConfig c) {
  try {
    if (auto it = j.find("alpha"); it != j.end()) {
      auto a = it->get<std::vector<double>>();
      if (a.size() != 3) throw Error(Errc::InvalidConfig, "alpha needs three weights");
      c.alpha = {a[0], a[1], a[2]};
    }
    c.beta = j.value("beta", c.beta);
    c.lambda = j.value("lambda", c.lambda);
    c.k_final = j.value("top_k", c.k_final);
    c.k_view = j.value("k_view", c.k_view);
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("fusion config: ") + e.what());
  }
  return c;
}

json FusedCandidate::to_json() const {
  return {{"unit_id", unit_id},
          {"raw", {raw[0], raw[1], raw[2]}},
          {"normalized", {normalized[0], normalized[1], normalized[2]}},
          {"structural_control", structural_control},
          {"view_count", view_count},
          {"bonus", bonus},
          {"final", final_score}};
}

std::vector<CandidateSupport> project_candidates(const ViewHits& hits, const EvidenceGroundedGraph& graph,
                                                 const Corpus& corpus) {
  std::map<std::string, CandidateSupport> by_unit;
  auto slot = [&](const std::string& unit_id) -> CandidateSupport& {
    if (!corpus.contains(unit_id)) {
      throw Error(Errc::DanglingSourceReference, "graph source '" + unit_id + "' is not in the corpus");
    }
    auto [it, inserted] = by_unit.try_emplace(unit_id);
    if (inserted) it->second.unit_id = unit_id;
    return it->second;
  };

  for (const auto& h : hits.text) {
    if (h.item_id >= corpus.size()) {
      throw Error(Errc::DanglingSourceReference, "text hit " + std::to_string(h.item_id) + " out of range");
    }
    slot(corpus[h.item_id].id).text_score = h.score;
  }
  for (const auto& h : hits.relation) {
    if (h.item_id >= graph.edges().size()) {
      throw Error(Errc::DanglingSourceReference, "relation hit " + std::to_string(h.item_id) + " out of range");
    }
    for (const auto& u : graph.edges()[h.item_id].sources) slot(u).relation_hits.push_back(h);
  }
  for (const auto& h : hits.anchor) {
    if (h.item_id >= graph.nodes().size()) {
      throw Error(Errc::DanglingSourceReference, "anchor hit " + std::to_string(h.item_id) + " out of range");
    }
    for (const auto& u : graph.nodes()[h.item_id].sources) slot(u).anchor_hits.push_back(h);
  }

  std::vector<CandidateSupport> out;
  out.reserve(by_unit.size());
  for (auto& [_, c] : by_unit) out.push_back(std::move(c));
  return out;
}

double relation_score(const CandidateSupport& candidate, double beta) {
  const auto& hits = candidate.relation_hits;
  if (hits.empty()) return 0.0;
  const auto strongest = std::min_element(hits.begin(), hits.end(), hit_order);
  double residual = 0.0;
  for (auto it = hits.begin(); it != hits.end(); ++it) {
    if (it != strongest) residual += it->score;
  }
  return strongest->score + beta * residual;
}

double degree_penalty(std::size_t degree) {
  if (degree <= 1) return 1.0;
  return 1.0 / (1.0 + std::log(static_cast<double>(degree)));
}

double anchor_score(const CandidateSupport& candidate, const EvidenceGroundedGraph& graph) {
  double s = 0.0;
  for (const auto& h : candidate.anchor_hits) s += h.score * degree_penalty(graph.degree(h.item_id));
  return s;
}

double structural_control(std::size_t evidence_degree) { return degree_penalty(evidence_degree); }

double consensus_bonus(int view_count, double lambda) {
  return 1.0 + lambda * static_cast<double>(std::max(0, view_count - 1)) / 2.0;
}

std::vector<FusedCandidate> score_candidates(const std::vector<CandidateSupport>& candidates,
                                             const EvidenceGroundedGraph& graph, double beta) {
  std::vector<FusedCandidate> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    FusedCandidate f;
    f.unit_id = c.unit_id;
    f.raw = {relation_score(c, beta), anchor_score(c, graph), c.text_score.value_or(0.0)};
    f.view_count = static_cast<int>((f.raw.array() > 0.0).count());
    f.structural_control = structural_control(graph.entity_count_for_unit(c.unit_id));
    out.push_back(std::move(f));
  }
  return out;
}

void normalize_views(std::vector<FusedCandidate>& candidates) {
  if (candidates.empty()) return;
  Eigen::Vector3d max = candidates.front().raw;
  for (const auto& c : candidates) max = max.cwiseMax(c.raw);
  for (auto& c : candidates) {
    for (int v = 0; v < 3; ++v) c.normalized[v] = max[v] > 0.0 ? c.raw[v] / max[v] : 0.0;
  }
}

namespace {

void fill_scores(std::vector<FusedCandidate>& candidates, const FusionConfig& config) {
  for (auto& c : candidates) {
    const Eigen::Vector3d s(c.normalized[0], c.normalized[1] * c.structural_control, c.normalized[2]);
    c.bonus = consensus_bonus(c.view_count, config.lambda);
    c.final_score = config.alpha.dot(s) * c.bonus;
  }
}

}  // namespace

std::vector<FusedCandidate> fuse_and_rank(std::vector<FusedCandidate> candidates, const FusionConfig& config) {
  fill_scores(candidates, config);
  std::sort(candidates.begin(), candidates.end(), [](const FusedCandidate& a, const FusedCandidate& b) {
    if (a.final_score != b.final_score) return a.final_score > b.final_score;
    return a.unit_id < b.unit_id;
  });
  if (candidates.size() > config.k_final) candidates.resize(config.k_final);
  return candidates;
}

std::vector<FusedCandidate> rank_evidence(const ViewHits& hits, const EvidenceGroundedGraph& graph,
                                          const Corpus& corpus, const FusionConfig& config,
                                          std::vector<FusedCandidate>* all) {
  auto scored = score_candidates(project_candidates(hits, graph, corpus), graph, config.beta);
  normalize_views(scored);
  if (all) {
    fill_scores(scored, config);
    *all = scored;
  }
  return fuse_and_rank(std::move(scored), config);
}

ViewMask ViewMask::parse(std::string_view letters) {
  ViewMask mask{{false, false, false}};
  std::string token;
  auto flush = [&] {
    auto t = to_lower(trim(token));
    token.clear();
    if (t.empty()) return;
    if (t == "r" || t == "relation") mask.enabled[0] = true;
    else if (t == "a" || t == "e" || t == "entity" || t == "anchor") mask.enabled[1] = true;
    else if (t == "t" || t == "text") mask.enabled[2] = true;
    else throw Error(Errc::InvalidConfig, "unknown view '" + t + "' (expected r, a, t)");
  };
  for (char c : letters) {
    if (c == ',') flush();
    else token += c;
  }
  flush();
  if (!mask.any()) throw Error(Errc::InvalidConfig, "at least one retrieval view must be enabled");
  return mask;
}

std::string ViewMask::to_string() const {
  std::string out;
  const char* names[] = {"r", "a", "t"};
  for (std::size_t i = 0; i < kViewCount; ++i) {
    if (!enabled[i]) continue;
    if (!out.empty()) out += ',';
    out += names[i];
  }
  return out;
}

MultiViewRetriever::MultiViewRetriever(const Corpus& corpus, const EvidenceGroundedGraph& graph,
                                       const ViewIndexes& indexes, EmbeddingProvider& embedder,
                                       RetrievalOptions options)
    : corpus_(corpus), graph_(graph), indexes_(indexes), embedder_(embedder), options_(std::move(options)) {
  options_.fusion.validate();
  if (!options_.views.any()) throw Error(Errc::InvalidConfig, "at least one retrieval view must be enabled");
  check_index_completeness(indexes_, corpus_, graph_);
}

ViewHits MultiViewRetriever::search(const EmbeddingVector& query) const {
  const auto k = options_.fusion.k_view;
  auto run = [&](View v) -> std::vector<RetrievalHit> {
    if (!options_.views[v] || indexes_[v].size() == 0) return {};
    return topk_search(indexes_[v], query, k);
  };
  ViewHits hits;
  if (options_.parallel_views) {
    auto relation = std::async(std::launch::async, run, View::Relation);
    auto anchor = std::async(std::launch::async, run, View::EntityAnchor);
    hits.text = run(View::TextEvidence);
    hits.relation = relation.get();
    hits.anchor = anchor.get();
  } else {
    hits.relation = run(View::Relation);
    hits.anchor = run(View::EntityAnchor);
    hits.text = run(View::TextEvidence);
  }
  return hits;
}

RetrievalResult MultiViewRetriever::retrieve(std::string_view query) const {
  const std::string text(query);
  auto vectors = embed(std::span<const std::string>(&text, 1), embedder_);
  RetrievalResult result;
  result.hits = search(vectors.front());
  result.ranked = rank_evidence(result.hits, graph_, corpus_, options_.fusion, &result.candidates);
  return result;
}

}  // namespace mvrag
