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

#include <filesystem>
#include <memory>
#include <string>

#include "mvrag/config.hpp"
#include "mvrag/corpus.hpp"
#include "mvrag/embedding.hpp"
#include "mvrag/executor.hpp"
#include "mvrag/gateway.hpp"
#include "mvrag/graph.hpp"
#include "mvrag/ranker.hpp"
#include "mvrag/view_index.hpp"

namespace mvrag::testing {

std::filesystem::path data_dir();
std::filesystem::path synthetic_dir();

/// A fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

/// The synthetic benchmark with its graph built from the scripted extractor
/// and indexes built with the hash embedder, all in memory.
struct SyntheticPipeline {
  Benchmark bench;
  EvidenceGroundedGraph graph;
  ViewIndexes indexes;
  std::unique_ptr<HashEmbedder> embedder;
  std::unique_ptr<ScriptedChatModel> llm;
  std::unique_ptr<ScriptedChatModel> judge;
  std::unique_ptr<MultiViewRetriever> retriever;
  std::unique_ptr<MultiViewEvidenceRetriever> evidence;
};

std::unique_ptr<SyntheticPipeline> load_synthetic(const RetrievalOptions& options = {});

std::string read_file(const std::filesystem::path& path);

}  // namespace mvrag::testing
