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

#include "fixtures.hpp"

#include <fstream>
#include <sstream>

#include <unistd.h>

namespace mvrag::testing {

std::filesystem::path data_dir() { return MVRAG_TEST_DATA_DIR; }
std::filesystem::path synthetic_dir() { return data_dir() / "synthetic"; }

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("mvrag-test-" + std::to_string(::getpid())) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::unique_ptr<SyntheticPipeline> load_synthetic(const RetrievalOptions& options) {
  auto p = std::make_unique<SyntheticPipeline>();
  p->bench = load_benchmark(synthetic_dir() / "benchmark.json", BenchmarkFormat::Generic);
  p->llm = std::make_unique<ScriptedChatModel>(ScriptedChatModel::from_file(synthetic_dir() / "llm_script.json"));
  p->judge = std::make_unique<ScriptedChatModel>(ScriptedChatModel::from_file(synthetic_dir() / "judge_script.json"));
  const auto schema = default_extraction_schema();
  for (const auto& unit : p->bench.corpus.units()) {
    p->graph.merge(unit.id, extract_graph_facts(unit, schema, *p->llm));
  }
  p->embedder = std::make_unique<HashEmbedder>(64, 0);
  p->indexes = build_view_indexes(p->bench.corpus, p->graph, *p->embedder);
  p->retriever = std::make_unique<MultiViewRetriever>(p->bench.corpus, p->graph, p->indexes, *p->embedder, options);
  p->evidence = std::make_unique<MultiViewEvidenceRetriever>(*p->retriever);
  return p;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace mvrag::testing
