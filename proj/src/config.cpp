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

#include "mvrag/config.hpp"

#include <fstream>

#include "mvrag/corpus.hpp"
#include "mvrag/error.hpp"

namespace mvrag {

using nlohmann::json;

FusionConfig RunConfig::effective_fusion() const {
  FusionConfig f = fusion;
  if (!consensus) f.lambda = 0.0;
  return f;
}

RetrievalOptions RunConfig::retrieval_options() const {
  return {effective_fusion(), views, parallel_views};
}

ExecutorOptions RunConfig::executor_options(bool explain) const {
  return {max_steps, slot_binding, explain};
}

void RunConfig::validate() const {
  fusion.validate();
  if (!views.any()) throw Error(Errc::InvalidConfig, "at least one retrieval view must be enabled");
  if (max_steps == 0) throw Error(Errc::InvalidConfig, "max_steps must be at least 1");
  if (max_in_flight == 0) throw Error(Errc::InvalidConfig, "max_in_flight must be at least 1");
  parse_benchmark_format(dataset_format);
}

namespace {

json provider_json(const ProviderConfig& p) {
  return {{"kind", p.kind}, {"script", p.script.string()}, {"url", p.url}, {"model", p.model}};
}

ProviderConfig provider_from(const json& j) {
  ProviderConfig p;
  p.kind = j.value("kind", p.kind);
  p.script = j.value("script", std::string{});
  p.url = j.value("url", std::string{});
  p.model = j.value("model", std::string{});
  if (j.contains("api_key")) throw Error(Errc::InvalidConfig, "API keys belong in the environment, not the config");
  return p;
}

}  // namespace

json RunConfig::to_json() const {
  json j = {{"dataset",
             {{"path", dataset_path.string()},
              {"format", dataset_format},
              {"name", dataset_name},
              {"expected_passages", expected_passages ? json(*expected_passages) : json(nullptr)}}},
            {"llm", provider_json(llm)},
            {"judge", judge ? provider_json(*judge) : json(nullptr)},
            {"embedder",
             {{"kind", embedder.kind},
              {"dimension", embedder.dimension},
              {"seed", embedder.seed},
              {"url", embedder.url},
              {"model", embedder.model},
              {"batch_size", embedder.batch_size}}},
            {"fusion", fusion.to_json()},
            {"max_steps", max_steps},
            {"views", views.to_string()},
            {"consensus", consensus},
            {"slot_binding", slot_binding},
            {"parallel_views", parallel_views},
            {"output_dir", output_dir.string()},
            {"seed", seed},
            {"max_in_flight", max_in_flight},
            {"entity_summary_limit", entity_summary_limit},
            {"extraction_schema", extraction_schema}};
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  try {
    if (auto d = j.find("dataset"); d != j.end() && d->is_object()) {
      c.dataset_path = d->value("path", std::string{});
      c.dataset_format = d->value("format", c.dataset_format);
      c.dataset_name = d->value("name", std::string{});
      if (auto e = d->find("expected_passages"); e != d->end() && !e->is_null()) {
        c.expected_passages = e->get<std::size_t>();
      }
    }
    if (auto p = j.find("llm"); p != j.end() && p->is_object()) c.llm = provider_from(*p);
    if (auto p = j.find("judge"); p != j.end() && p->is_object()) c.judge = provider_from(*p);
    if (auto e = j.find("embedder"); e != j.end() && e->is_object()) {
      c.embedder.kind = e->value("kind", c.embedder.kind);
      c.embedder.dimension = e->value("dimension", c.embedder.dimension);
      c.embedder.seed = e->value("seed", c.embedder.seed);
      c.embedder.url = e->value("url", std::string{});
      c.embedder.model = e->value("model", std::string{});
      c.embedder.batch_size = e->value("batch_size", c.embedder.batch_size);
    }
    const std::string preset = c.dataset_name.empty() ? c.dataset_format : c.dataset_name;
    c.fusion = FusionConfig::preset(preset);
    if (auto f = j.find("fusion"); f != j.end() && f->is_object()) c.fusion = FusionConfig::from_json(*f, c.fusion);
    c.max_steps = j.value("max_steps", c.max_steps);
    if (auto v = j.find("views"); v != j.end() && v->is_string()) c.views = ViewMask::parse(v->get<std::string>());
    c.consensus = j.value("consensus", c.consensus);
    c.slot_binding = j.value("slot_binding", c.slot_binding);
    c.parallel_views = j.value("parallel_views", c.parallel_views);
    c.output_dir = j.value("output_dir", c.output_dir.string());
    c.seed = j.value("seed", c.seed);
    c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
    c.entity_summary_limit = j.value("entity_summary_limit", c.entity_summary_limit);
    c.extraction_schema = j.value("extraction_schema", std::string{});
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("config: ") + e.what());
  }
  return c;
}

json RunConfig::load_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::InvalidConfig, "cannot open config " + path.string());
  auto doc = json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw Error(Errc::InvalidConfig, path.string() + " is not a JSON object");
  const auto base = path.parent_path();
  auto resolve = [&](json& parent, const char* key) {
    if (!parent.is_object()) return;
    auto it = parent.find(key);
    if (it == parent.end() || !it->is_string()) return;
    std::filesystem::path p = it->get<std::string>();
    if (!p.empty() && p.is_relative()) *it = (base / p).string();
  };
  if (doc.contains("dataset")) resolve(doc["dataset"], "path");
  if (doc.contains("llm")) resolve(doc["llm"], "script");
  if (doc.contains("judge")) resolve(doc["judge"], "script");
  resolve(doc, "output_dir");
  return doc;
}

RunConfig RunConfig::load(const std::filesystem::path& path) { return from_json(load_json(path)); }

std::unique_ptr<ChatModel> make_chat_model(const ProviderConfig& config, std::string_view env_prefix) {
  if (config.kind == "scripted") {
    if (config.script.empty()) throw Error(Errc::InvalidConfig, "scripted provider needs a script file");
    return std::make_unique<ScriptedChatModel>(ScriptedChatModel::from_file(config.script));
  }
  if (config.kind == "http") {
    HttpEndpoint defaults;
    defaults.url = config.url;
    defaults.model = config.model;
    return std::make_unique<HttpChatModel>(endpoint_from_env(env_prefix, defaults));
  }
  throw Error(Errc::InvalidConfig, "unknown chat provider kind '" + config.kind + "'");
}

std::unique_ptr<EmbeddingProvider> make_embedder(const EmbedderConfig& config) {
  if (config.kind == "hash") return std::make_unique<HashEmbedder>(config.dimension, config.seed);
  if (config.kind == "http") {
    HttpEndpoint defaults;
    defaults.url = config.url;
    defaults.model = config.model;
    return std::make_unique<HttpEmbedder>(endpoint_from_env("MVRAG_EMBED", defaults), config.batch_size);
  }
  throw Error(Errc::InvalidConfig, "unknown embedder kind '" + config.kind + "'");
}

}  // namespace mvrag
