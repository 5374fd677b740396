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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "mvrag/embedding.hpp"
#include "mvrag/executor.hpp"
#include "mvrag/gateway.hpp"
#include "mvrag/ranker.hpp"

namespace mvrag {

/// Chat provider selection. Endpoint URL and model may come from here or the
/// environment (<PREFIX>_URL, <PREFIX>_MODEL); the API key only from
/// <PREFIX>_API_KEY.
struct ProviderConfig {
  std::string kind = "scripted";  // scripted | http
  std::filesystem::path script;
  std::string url;
  std::string model;

  friend bool operator==(const ProviderConfig&, const ProviderConfig&) = default;
};

struct EmbedderConfig {
  std::string kind = "hash";  // hash | http
  std::size_t dimension = 64;
  std::uint64_t seed = 0;
  std::string url;
  std::string model;
  std::size_t batch_size = 64;

  friend bool operator==(const EmbedderConfig&, const EmbedderConfig&) = default;
};

struct RunConfig {
  std::filesystem::path dataset_path;
  std::string dataset_format = "generic";
  std::string dataset_name;  // selects the fusion preset; defaults to the format tag
  std::optional<std::size_t> expected_passages;

  ProviderConfig llm;
  std::optional<ProviderConfig> judge;  // defaults to llm
  EmbedderConfig embedder;

  FusionConfig fusion;
  std::size_t max_steps = 8;
  ViewMask views;
  bool consensus = true;
  bool slot_binding = true;
  bool parallel_views = true;

  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;
  std::size_t max_in_flight = 4;
  std::size_t entity_summary_limit = 10;
  std::string extraction_schema;  // empty -> built-in label set

  /// Fusion config with ablations applied (lambda forced to 0 without consensus).
  FusionConfig effective_fusion() const;
  RetrievalOptions retrieval_options() const;
  ExecutorOptions executor_options(bool explain = false) const;

  /// Throws InvalidConfig.
  void validate() const;

  nlohmann::json to_json() const;
  /// Missing fields keep their defaults; a missing fusion.alpha takes the
  /// preset for the dataset name.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
  /// The config document with relative paths resolved against its directory.
  static nlohmann::json load_json(const std::filesystem::path& path);

  std::filesystem::path corpus_file() const { return output_dir / "corpus.json"; }
  std::filesystem::path graph_file() const { return output_dir / "graph.json"; }
  std::filesystem::path index_dir() const { return output_dir / "index"; }
  std::filesystem::path trace_dir() const { return output_dir / "traces"; }
};

std::unique_ptr<ChatModel> make_chat_model(const ProviderConfig& config, std::string_view env_prefix);
std::unique_ptr<EmbeddingProvider> make_embedder(const EmbedderConfig& config);

}  // namespace mvrag
