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

#include "mvrag/view_index.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mvrag/text.hpp"

namespace mvrag {

using nlohmann::json;

std::string_view view_name(View view) {
  switch (view) {
    case View::Relation: return "relation";
    case View::EntityAnchor: return "entity";
    case View::TextEvidence: return "text";
  }
  return "text";
}

std::string textualize_relation(const EvidenceGroundedGraph& graph, EdgeId edge) {
  const auto& e = graph.edges().at(edge);
  return normalize_whitespace(graph.nodes().at(e.source).name + " " + e.relation + " " +
                              graph.nodes().at(e.target).name);
}

std::string textualize_entity(const EvidenceGroundedGraph& graph, NodeId node, std::size_t summary_limit) {
  const auto& v = graph.nodes().at(node);
  std::string out = v.name + " (" + v.entity_type + ").";

  if (!v.attributes.empty()) {
    out += ' ';
    bool first = true;
    for (const auto& a : v.attributes) {
      if (!first) out += "; ";
      out += a;
      first = false;
    }
    out += '.';
  }

  std::vector<EdgeId> incident = v.neighbor_edges;  // ascending; self-loops appear twice
  incident.erase(std::unique(incident.begin(), incident.end()), incident.end());
  if (incident.size() > summary_limit) incident.resize(summary_limit);
  if (!incident.empty()) {
    out += ' ';
    for (std::size_t i = 0; i < incident.size(); ++i) {
      if (i) out += "; ";
      out += textualize_relation(graph, incident[i]);
    }
  }
  return out;
}

namespace {

ViewIndex build_one(View view, std::vector<std::size_t> ids, const std::vector<std::string>& texts,
                    EmbeddingProvider& provider, std::size_t batch_size, std::size_t& dimension) {
  ViewIndex::Matrix matrix;
  for (std::size_t begin = 0; begin < texts.size(); begin += batch_size) {
    const auto count = std::min(batch_size, texts.size() - begin);
    auto vectors = embed(std::span<const std::string>(texts).subspan(begin, count), provider);
    const auto dim = static_cast<std::size_t>(vectors.front().size());
    if (dimension == 0) dimension = dim;
    if (dim != dimension) throw Error(Errc::DimensionMismatch, "embedding dimension changed between batches");
    if (matrix.size() == 0) matrix.resize(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < count; ++i) {
      matrix.row(static_cast<Eigen::Index>(begin + i)) = vectors[i].transpose();
    }
  }
  if (texts.empty()) matrix.resize(0, static_cast<Eigen::Index>(dimension));
  return ViewIndex(view, std::move(ids), std::move(matrix));
}

}  // namespace

ViewIndexes build_view_indexes(const Corpus& corpus, const EvidenceGroundedGraph& graph,
                               EmbeddingProvider& provider, const IndexOptions& options) {
  const auto batch = std::max<std::size_t>(options.batch_size, 1);
  std::size_t dimension = 0;

  std::vector<std::size_t> text_ids(corpus.size());
  std::iota(text_ids.begin(), text_ids.end(), 0);
  std::vector<std::string> text_items;
  text_items.reserve(corpus.size());
  for (const auto& u : corpus.units()) text_items.push_back(evidence_text(u));

  std::vector<std::size_t> edge_ids(graph.edges().size());
  std::iota(edge_ids.begin(), edge_ids.end(), 0);
  std::vector<std::string> edge_items;
  for (auto e : edge_ids) edge_items.push_back(textualize_relation(graph, e));

  std::vector<std::size_t> node_ids(graph.nodes().size());
  std::iota(node_ids.begin(), node_ids.end(), 0);
  std::vector<std::string> node_items;
  for (auto v : node_ids) node_items.push_back(textualize_entity(graph, v, options.entity_summary_limit));

  // Text first so the dimension is known before any empty graph view.
  ViewIndexes out;
  out.text = build_one(View::TextEvidence, std::move(text_ids), text_items, provider, batch, dimension);
  out.relation = build_one(View::Relation, std::move(edge_ids), edge_items, provider, batch, dimension);
  out.entity = build_one(View::EntityAnchor, std::move(node_ids), node_items, provider, batch, dimension);
  return out;
}

namespace {

constexpr char kMagic[4] = {'M', 'V', 'I', 'X'};
constexpr std::uint32_t kBinaryVersion = 1;

template <typename T>
void write_raw(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error(Errc::IoError, "truncated index file");
  return value;
}

void write_view(const ViewIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  write_raw(out, kBinaryVersion);
  write_raw(out, static_cast<std::uint64_t>(index.dimension()));
  write_raw(out, static_cast<std::uint64_t>(index.size()));
  const auto& m = index.vectors();
  for (std::size_t i = 0; i < index.size(); ++i) {
    write_raw(out, static_cast<std::uint64_t>(index.ids()[i]));
    out.write(reinterpret_cast<const char*>(m.row(static_cast<Eigen::Index>(i)).data()),
              static_cast<std::streamsize>(sizeof(double) * index.dimension()));
  }
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

ViewIndex read_view(View view, const std::filesystem::path& path, std::size_t expected_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  char magic[4];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw Error(Errc::SchemaVersionMismatch, path.string() + " is not an index file");
  }
  if (read_raw<std::uint32_t>(in) != kBinaryVersion) {
    throw Error(Errc::SchemaVersionMismatch, path.string() + " has an unsupported version");
  }
  const auto dim = read_raw<std::uint64_t>(in);
  const auto count = read_raw<std::uint64_t>(in);
  if (dim != expected_dim) throw Error(Errc::DimensionMismatch, path.string() + " dimension differs from manifest");
  std::vector<std::size_t> ids(count);
  ViewIndex::Matrix m(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
  for (std::uint64_t i = 0; i < count; ++i) {
    ids[i] = read_raw<std::uint64_t>(in);
    in.read(reinterpret_cast<char*>(m.row(static_cast<Eigen::Index>(i)).data()),
            static_cast<std::streamsize>(sizeof(double) * dim));
    if (!in) throw Error(Errc::IoError, "truncated index file " + path.string());
  }
  return ViewIndex(view, std::move(ids), std::move(m));
}

}  // namespace

void persist_indexes(const ViewIndexes& indexes, const std::string& provider_id,
                     const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  write_view(indexes.relation, directory / "relation.bin");
  write_view(indexes.entity, directory / "entity.bin");
  write_view(indexes.text, directory / "text.bin");
  json manifest = {{"version", kBinaryVersion},
                   {"dimension", indexes.text.dimension()},
                   {"provider", provider_id},
                   {"views",
                    {{"relation", {{"file", "relation.bin"}, {"size", indexes.relation.size()}}},
                     {"entity", {{"file", "entity.bin"}, {"size", indexes.entity.size()}}},
                     {"text", {{"file", "text.bin"}, {"size", indexes.text.size()}}}}}};
  std::ofstream out(directory / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write manifest in " + directory.string());
  out << manifest.dump(1) << '\n';
}

ViewIndexes load_indexes(const std::filesystem::path& directory, IndexManifest* manifest) {
  std::ifstream in(directory / "manifest.json", std::ios::binary);
  if (!in) throw Error(Errc::IoError, "no index manifest in " + directory.string());
  auto doc = json::parse(in, nullptr, false);
  if (doc.is_discarded() || doc.value("version", 0U) != kBinaryVersion) {
    throw Error(Errc::SchemaVersionMismatch, "unsupported index manifest in " + directory.string());
  }
  IndexManifest m;
  try {
    m.dimension = doc.at("dimension").get<std::size_t>();
    m.provider_id = doc.at("provider").get<std::string>();
    m.relation_size = doc.at("views").at("relation").at("size").get<std::size_t>();
    m.entity_size = doc.at("views").at("entity").at("size").get<std::size_t>();
    m.text_size = doc.at("views").at("text").at("size").get<std::size_t>();
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("index manifest: ") + e.what());
  }
  ViewIndexes out;
  out.relation = read_view(View::Relation, directory / "relation.bin", m.dimension);
  out.entity = read_view(View::EntityAnchor, directory / "entity.bin", m.dimension);
  out.text = read_view(View::TextEvidence, directory / "text.bin", m.dimension);
  if (out.relation.size() != m.relation_size || out.entity.size() != m.entity_size ||
      out.text.size() != m.text_size) {
    throw Error(Errc::DimensionMismatch, "index files disagree with manifest sizes");
  }
  if (manifest) *manifest = m;
  return out;
}

void check_index_completeness(const ViewIndexes& indexes, const Corpus& corpus,
                              const EvidenceGroundedGraph& graph) {
  if (indexes.relation.size() != graph.edges().size() || indexes.entity.size() != graph.nodes().size() ||
      indexes.text.size() != corpus.size()) {
    throw Error(Errc::DimensionMismatch, "view indexes do not cover the graph and corpus");
  }
}

}  // namespace mvrag
