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

#include "mvrag/app.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "mvrag/config.hpp"
#include "mvrag/corpus.hpp"
#include "mvrag/error.hpp"
#include "mvrag/evaluation.hpp"
#include "mvrag/executor.hpp"
#include "mvrag/graph.hpp"
#include "mvrag/ranker.hpp"
#include "mvrag/view_index.hpp"

namespace mvrag {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct CliOptions {
  std::string config_path;
  std::vector<std::string> overrides;  // key.path=value
  std::optional<std::string> dataset, format, dataset_name, out_dir, llm_script, judge_script, views;
  std::optional<std::string> llm_provider, embedder;
  std::optional<std::size_t> expected_passages, max_in_flight, top_k, k_view, max_steps, entity_summary_limit,
      embed_dim;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha_r, alpha_a, alpha_t, beta, lambda;
  bool no_consensus = false;
  bool no_slot_binding = false;
  std::vector<std::string> ablations;
};

// Sets a dotted path in a JSON document; the value is parsed as JSON when
// possible and kept as a string otherwise.
void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(Errc::InvalidConfig, "--set expects key.path=value, got '" + assignment + "'");
  }
  json* node = &doc;
  std::string_view path(assignment.data(), eq);
  while (true) {
    const auto dot = path.find('.');
    const std::string key(path.substr(0, dot));
    if (!node->is_object()) *node = json::object();
    node = &(*node)[key];
    if (dot == std::string_view::npos) break;
    path.remove_prefix(dot + 1);
  }
  const std::string raw = assignment.substr(eq + 1);
  auto parsed = json::parse(raw, nullptr, false);
  *node = parsed.is_discarded() ? json(raw) : parsed;
}

RunConfig resolve_config(const CliOptions& o) {
  json doc = o.config_path.empty() ? json::object() : RunConfig::load_json(o.config_path);
  auto set = [&](const char* path, const json& value) {
    json* node = &doc;
    std::string_view rest(path);
    while (true) {
      const auto dot = rest.find('.');
      if (!node->is_object()) *node = json::object();
      node = &(*node)[std::string(rest.substr(0, dot))];
      if (dot == std::string_view::npos) break;
      rest.remove_prefix(dot + 1);
    }
    *node = value;
  };
  for (const auto& assignment : o.overrides) apply_override(doc, assignment);
  if (o.dataset) set("dataset.path", *o.dataset);
  if (o.format) set("dataset.format", *o.format);
  if (o.dataset_name) set("dataset.name", *o.dataset_name);
  if (o.expected_passages) set("dataset.expected_passages", *o.expected_passages);
  if (o.out_dir) set("output_dir", *o.out_dir);
  if (o.llm_provider) set("llm.kind", *o.llm_provider);
  if (o.llm_script) {
    set("llm.kind", "scripted");
    set("llm.script", *o.llm_script);
  }
  if (o.judge_script) {
    set("judge.kind", "scripted");
    set("judge.script", *o.judge_script);
  }
  if (o.embedder) set("embedder.kind", *o.embedder);
  if (o.embed_dim) set("embedder.dimension", *o.embed_dim);
  if (o.seed) {
    set("seed", *o.seed);
    set("embedder.seed", *o.seed);
  }
  if (o.max_in_flight) set("max_in_flight", *o.max_in_flight);
  if (o.views) set("views", *o.views);
  if (o.max_steps) set("max_steps", *o.max_steps);
  if (o.entity_summary_limit) set("entity_summary_limit", *o.entity_summary_limit);
  if (o.top_k) set("fusion.top_k", *o.top_k);
  if (o.k_view) set("fusion.k_view", *o.k_view);
  if (o.beta) set("fusion.beta", *o.beta);
  if (o.lambda) set("fusion.lambda", *o.lambda);

  bool no_consensus = o.no_consensus;
  bool no_slot_binding = o.no_slot_binding;
  for (const auto& a : o.ablations) {
    if (a == "no-consensus") {
      no_consensus = true;
    } else if (a == "no-slot-binding") {
      no_slot_binding = true;
    } else {
      throw Error(Errc::InvalidConfig, "unknown ablation '" + a + "'");
    }
  }
  if (no_consensus) set("consensus", false);
  if (no_slot_binding) set("slot_binding", false);

  RunConfig config = RunConfig::from_json(doc);
  if (o.alpha_r) config.fusion.alpha[0] = *o.alpha_r;
  if (o.alpha_a) config.fusion.alpha[1] = *o.alpha_a;
  if (o.alpha_t) config.fusion.alpha[2] = *o.alpha_t;
  // Ablations are recorded in the fusion block so the echoed config is
  // self-describing.
  config.fusion = config.effective_fusion();
  config.validate();
  return config;
}

std::string file_stem_for(const std::string& id) {
  std::string out;
  for (char c : id) {
    const bool safe = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out += safe ? c : '_';
  }
  return out.empty() ? "_" : out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(Errc::IoError, "cannot write " + path.string());
    f << text;
    if (!f) throw Error(Errc::IoError, "write failed for " + path.string());
  }
  fs::rename(tmp, path);
}

json read_json_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::IoError, "cannot open " + path.string());
  auto doc = json::parse(f, nullptr, false);
  if (doc.is_discarded()) throw Error(Errc::ParseError, path.string() + " is not valid JSON");
  return doc;
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
// is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (!stop) {
      const std::size_t i = next++;
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        stop = true;
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < workers; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

Benchmark load_dataset(const RunConfig& config) {
  if (config.dataset_path.empty()) {
    throw Error(Errc::InvalidConfig, "no dataset path configured (set dataset.path or pass --dataset)");
  }
  if (!fs::exists(config.dataset_path)) {
    throw Error(Errc::InvalidConfig, "dataset not found: " + config.dataset_path.string());
  }
  auto bench = load_benchmark(config.dataset_path, parse_benchmark_format(config.dataset_format));
  if (config.expected_passages) check_passage_count(bench.corpus, *config.expected_passages);
  return bench;
}

void require_artifact(const fs::path& path, std::string_view producer) {
  if (!fs::exists(path)) {
    throw Error(Errc::InvalidConfig, path.string() + " is missing; run `mvrag " + std::string(producer) + "` first");
  }
}

// Loaded offline artifacts plus the retriever wired over them.
struct Artifacts {
  Corpus corpus;
  EvidenceGroundedGraph graph;
  ViewIndexes indexes;
  std::unique_ptr<EmbeddingProvider> embedder;
  std::unique_ptr<MultiViewRetriever> retriever;
  std::unique_ptr<MultiViewEvidenceRetriever> evidence;
};

std::unique_ptr<Artifacts> load_artifacts(const RunConfig& config) {
  require_artifact(config.corpus_file(), "build-graph");
  require_artifact(config.graph_file(), "build-graph");
  require_artifact(config.index_dir() / "manifest.json", "index");
  auto a = std::make_unique<Artifacts>();
  a->corpus = load_corpus(config.corpus_file());
  a->graph = load_graph(config.graph_file());
  IndexManifest manifest;
  a->indexes = load_indexes(config.index_dir(), &manifest);
  a->embedder = make_embedder(config.embedder);
  if (manifest.provider_id != a->embedder->id()) {
    throw Error(Errc::InvalidConfig, "index was built with embedder '" + manifest.provider_id +
                                         "' but the config selects '" + a->embedder->id() + "'");
  }
  a->retriever = std::make_unique<MultiViewRetriever>(a->corpus, a->graph, a->indexes, *a->embedder,
                                                      config.retrieval_options());
  a->evidence = std::make_unique<MultiViewEvidenceRetriever>(*a->retriever);
  return a;
}

int cmd_build_graph(const RunConfig& config, bool force, std::ostream& out) {
  const auto bench = load_dataset(config);
  if (fs::exists(config.graph_file()) && !force) {
    throw Error(Errc::InvalidConfig, config.graph_file().string() + " already exists; pass --force to rebuild");
  }
  auto model = make_chat_model(config.llm, "MVRAG_LLM");
  const std::string schema = config.extraction_schema.empty() ? default_extraction_schema() : config.extraction_schema;

  const auto& units = bench.corpus.units();
  std::vector<std::optional<ExtractionResult>> results(units.size());
  UsageRecorder usage;
  std::mutex log_mutex;
  parallel_for(units.size(), config.max_in_flight, [&](std::size_t i) {
    try {
      results[i] = extract_graph_facts(units[i], schema, *model, &usage);
    } catch (const Error& e) {
      if (e.code() != Errc::UnparseableOutput) throw;
      std::lock_guard lock(log_mutex);
      spdlog::warn("extraction failed for {}: {}", units[i].id, e.what());
    }
  });

  // Merging in corpus order keeps node and edge ids independent of
  // completion order.
  EvidenceGroundedGraph graph;
  std::vector<std::string> failed;
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (results[i]) {
      graph.merge(units[i].id, *results[i]);
    } else {
      graph.mark_failed(units[i].id);
      failed.push_back(units[i].id);
    }
  }

  fs::create_directories(config.output_dir);
  persist_corpus(bench.corpus, config.corpus_file());
  persist_graph(graph, config.graph_file());
  const auto summary = usage.summary();
  const json log = {{"units", units.size()},
                    {"processed", units.size() - failed.size()},
                    {"failed", failed.size()},
                    {"failed_units", failed},
                    {"nodes", graph.nodes().size()},
                    {"edges", graph.edges().size()},
                    {"calls", summary.calls},
                    {"prompt_tokens", summary.prompt_tokens},
                    {"completion_tokens", summary.completion_tokens}};
  write_text(config.output_dir / "build_graph.log.json", log.dump(2) + "\n");
  out << "graph: " << graph.nodes().size() << " nodes, " << graph.edges().size() << " edges from "
      << units.size() - failed.size() << "/" << units.size() << " units -> " << config.graph_file().string() << '\n';
  return kExitOk;
}

int cmd_index(const RunConfig& config, std::ostream& out) {
  require_artifact(config.corpus_file(), "build-graph");
  require_artifact(config.graph_file(), "build-graph");
  const Corpus corpus = load_corpus(config.corpus_file());
  const EvidenceGroundedGraph graph = load_graph(config.graph_file());
  auto embedder = make_embedder(config.embedder);
  IndexOptions options;
  options.entity_summary_limit = config.entity_summary_limit;
  const auto indexes = build_view_indexes(corpus, graph, *embedder, options);
  check_index_completeness(indexes, corpus, graph);
  persist_indexes(indexes, embedder->id(), config.index_dir());
  out << "index: relation " << indexes.relation.size() << ", entity " << indexes.entity.size() << ", text "
      << indexes.text.size() << " -> " << config.index_dir().string() << '\n';
  return kExitOk;
}

void print_fusion(const std::vector<FusedCandidate>& candidates, std::ostream& out) {
  out << std::left << std::setw(10) << "unit" << std::right << std::setw(9) << "s_rel" << std::setw(9) << "s_anc"
      << std::setw(9) << "s_txt" << std::setw(9) << "n_rel" << std::setw(9) << "n_anc" << std::setw(9) << "n_txt"
      << std::setw(8) << "ctrl" << std::setw(4) << "m" << std::setw(8) << "bonus" << std::setw(9) << "final" << '\n';
  out << std::fixed << std::setprecision(4);
  for (const auto& c : candidates) {
    out << std::left << std::setw(10) << c.unit_id << std::right;
    for (int v = 0; v < 3; ++v) out << std::setw(9) << c.raw[v];
    for (int v = 0; v < 3; ++v) out << std::setw(9) << c.normalized[v];
    out << std::setw(8) << c.structural_control << std::setw(4) << c.view_count << std::setw(8) << c.bonus
        << std::setw(9) << c.final_score << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

int cmd_query(const RunConfig& config, const std::string& question, bool explain, const std::string& trace_path,
              std::ostream& out) {
  auto artifacts = load_artifacts(config);
  auto model = make_chat_model(config.llm, "MVRAG_LLM");
  SlotExecutor executor(*artifacts->evidence, *model, config.executor_options(explain));
  const auto trace = executor.run("query", question);
  const fs::path path = trace_path.empty() ? config.trace_dir() / "query.json" : fs::path(trace_path);
  write_text(path, trace.to_json().dump(2) + "\n");
  if (explain) {
    out << "initial retrieval:\n";
    print_fusion(trace.initial_fusion, out);
    for (const auto& step : trace.steps) {
      out << "step " << step.step_id << ": " << step.bound_query << '\n';
      print_fusion(step.fusion, out);
    }
    out << "answer: ";
  }
  out << trace.final_answer << '\n';
  return kExitOk;
}

QuestionVerdict run_one_question(const RunConfig& config, const Artifacts& artifacts, ChatModel& model,
                                 ChatModel& judge, const QARecord& record, UsageRecorder& judge_usage) {
  QuestionVerdict v;
  v.question_id = record.id;
  v.gold = record.gold_answer;
  SlotExecutor executor(*artifacts.evidence, model, config.executor_options());
  UsageRecorder usage;
  const auto started = std::chrono::steady_clock::now();
  try {
    const auto trace = executor.run(record.id, record.question, &usage);
    v.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    v.prediction = trace.final_answer;
    v.tokens = trace.usage.prompt_tokens + trace.usage.completion_tokens;
    v.str_correct = str_acc(v.prediction, v.gold);
    v.llm_correct = llm_acc(v.prediction, v.gold, judge, &judge_usage);
    v.slots_correct = judge_slot_fillings(trace, record.gold_slot_answers.empty() ? nullptr : &record.gold_slot_answers,
                                          judge, &judge_usage, &v.slots_heuristic);
    write_text(config.trace_dir() / (file_stem_for(record.id) + ".json"), trace.to_json().dump(2) + "\n");
  } catch (const Error& e) {
    v.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    v.failed = true;
    v.prediction.clear();
    const auto spent = usage.summary();
    v.tokens = spent.prompt_tokens + spent.completion_tokens;
    spdlog::warn("question {} failed: {}", record.id, e.what());
  }
  return v;
}

int cmd_run_benchmark(const RunConfig& config, std::optional<std::size_t> limit, std::ostream& out) {
  auto bench = load_dataset(config);
  auto artifacts = load_artifacts(config);
  auto model = make_chat_model(config.llm, "MVRAG_LLM");
  auto judge = make_chat_model(config.judge.value_or(config.llm), "MVRAG_JUDGE");

  std::vector<QARecord> questions = bench.questions;
  if (limit && *limit < questions.size()) questions.resize(*limit);
  if (questions.empty()) throw Error(Errc::EmptyInput, "the dataset has no questions");

  const fs::path verdict_dir = config.output_dir / "verdicts";
  fs::create_directories(verdict_dir);
  auto verdict_file = [&](const QARecord& r) { return verdict_dir / (file_stem_for(r.id) + ".json"); };

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    if (!fs::exists(verdict_file(questions[i]))) pending.push_back(i);
  }
  out << "questions: " << questions.size() << ", already done: " << questions.size() - pending.size()
      << ", to run: " << pending.size() << '\n';

  UsageRecorder judge_usage;
  parallel_for(pending.size(), config.max_in_flight, [&](std::size_t k) {
    const auto& record = questions[pending[k]];
    const auto verdict = run_one_question(config, *artifacts, *model, *judge, record, judge_usage);
    // The verdict file doubles as the completion marker for resumed runs.
    write_text(verdict_file(record), verdict.to_json().dump(2) + "\n");
  });

  std::vector<QuestionVerdict> verdicts;
  verdicts.reserve(questions.size());
  for (const auto& record : questions) verdicts.push_back(QuestionVerdict::from_json(read_json_file(verdict_file(record))));

  const std::string dataset = config.dataset_name.empty() ? config.dataset_format : config.dataset_name;
  const auto report = aggregate_report(verdicts, dataset);
  const auto slots = summarize_slot_groups(verdicts);
  json effective = config.to_json();
  const auto judged = judge_usage.summary();
  effective["judge_usage"] = json{{"calls", judged.calls},
                                  {"prompt_tokens", judged.prompt_tokens},
                                  {"completion_tokens", judged.completion_tokens}};
  write_reports(config.output_dir, report, verdicts,
                slots.questions_with_slots ? std::optional<SlotDiagnostics>(slots) : std::nullopt, effective);
  out << format_report_table(report, slots.questions_with_slots ? std::optional<SlotDiagnostics>(slots) : std::nullopt);
  return kExitOk;
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::ModelError:
    case Errc::AuthError:
    case Errc::ProviderError:
    case Errc::UnparseableOutput:
    case Errc::UnmatchedScript:
    case Errc::IoError:
      return kExitRuntime;
    default:
      return kExitUsage;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-view retrieval with slot-based multi-hop execution", "mvrag"};
  app.require_subcommand(1);
  app.fallthrough();

  CliOptions o;
  app.add_option("--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--set", o.overrides, "Override a config field: key.path=value (repeatable)");
  app.add_option("--dataset", o.dataset, "Benchmark file (JSON array or JSON Lines)");
  app.add_option("--format", o.format, "hotpotqa | 2wikimultihopqa | musique | generic");
  app.add_option("--dataset-name", o.dataset_name, "Dataset label; selects the fusion weight preset");
  app.add_option("--expected-passages", o.expected_passages, "Fail unless the corpus has this many passages");
  app.add_option("--out", o.out_dir, "Output directory for artifacts, traces and reports");
  app.add_option("--llm-provider", o.llm_provider, "scripted | http");
  app.add_option("--llm-script", o.llm_script, "Scripted chat responses (JSON)");
  app.add_option("--judge-script", o.judge_script, "Scripted judge responses (JSON)");
  app.add_option("--embedder", o.embedder, "hash | http");
  app.add_option("--embed-dim", o.embed_dim, "Hash embedder dimension");
  app.add_option("--seed", o.seed, "Seed for deterministic components");
  app.add_option("--max-in-flight", o.max_in_flight, "Concurrent model calls / questions");
  app.add_option("--views", o.views, "Enabled views, e.g. r,a,t or t");
  app.add_option("--alpha-r", o.alpha_r, "Relation view weight");
  app.add_option("--alpha-a", o.alpha_a, "Entity anchor view weight");
  app.add_option("--alpha-t", o.alpha_t, "Text view weight");
  app.add_option("--beta", o.beta, "Relation aggregation coefficient");
  app.add_option("--lambda", o.lambda, "Consensus bonus coefficient");
  app.add_option("--top-k", o.top_k, "Evidence units kept after fusion");
  app.add_option("--k-view", o.k_view, "Hits retrieved per view");
  app.add_option("--max-steps", o.max_steps, "Maximum plan steps");
  app.add_option("--entity-summary-limit", o.entity_summary_limit, "Relations listed per entity summary");
  app.add_flag("--no-consensus", o.no_consensus, "Disable the cross-view consensus bonus");
  app.add_flag("--no-slot-binding", o.no_slot_binding, "Disable answer substitution into placeholders");

  bool force = false;
  auto* build = app.add_subcommand("build-graph", "Extract the evidence-grounded graph from the corpus");
  build->add_flag("--force", force, "Overwrite an existing graph");

  auto* index = app.add_subcommand("index", "Embed the relation, entity and text views");

  std::string question;
  bool explain = false;
  std::string trace_path;
  auto* query = app.add_subcommand("query", "Answer one question");
  query->add_option("question", question, "Question text")->required();
  query->add_flag("--explain", explain, "Print the per-candidate fusion breakdown");
  query->add_option("--trace", trace_path, "Trace output path (default <out>/traces/query.json)");

  std::optional<std::size_t> limit;
  auto* bench = app.add_subcommand("run-benchmark", "Answer every question and write reports");
  bench->add_option("--limit", limit, "Only the first N questions");
  bench->add_option("--ablate", o.ablations, "no-consensus | no-slot-binding (repeatable)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const RunConfig config = resolve_config(o);
    if (*build) return cmd_build_graph(config, force, out);
    if (*index) return cmd_index(config, out);
    if (*query) return cmd_query(config, question, explain, trace_path, out);
    if (*bench) return cmd_run_benchmark(config, limit, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    const int code = exit_code_for(e.code());
    if (code == kExitUsage) err << "Run with --help for more information.\n";
    return code;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace mvrag
