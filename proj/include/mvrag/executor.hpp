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
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvrag/corpus.hpp"
#include "mvrag/gateway.hpp"
#include "mvrag/ranker.hpp"

namespace mvrag {

struct PlanStep {
  int id = 0;
  std::string sub_question;  // may hold "<dep:j>" placeholders
  std::vector<int> dependencies;

  friend bool operator==(const PlanStep&, const PlanStep&) = default;
};

using Plan = std::vector<PlanStep>;

/// Step ids referenced by well-formed "<dep:j>" tokens, ascending and unique.
/// Throws InvalidPlan on a malformed "<dep:" token.
std::vector<int> placeholder_ids(std::string_view sub_question);

/// Decodes the "plan" list of a decomposition payload. Throws InvalidPlan.
Plan parse_plan(const nlohmann::json& plan);

/// Throws InvalidPlan unless the plan is non-empty, ids run 0..M-1 in
/// order, every dependency is an earlier id listed once, sub-questions are
/// non-empty, and the placeholders of each sub-question are exactly its
/// dependencies.
void validate_plan(const Plan& plan);

/// The plan used when decomposition fails: the question as a single step.
Plan fallback_plan(std::string_view question);

/// Replaces every "<dep:j>" with answers[j]. Throws MissingBinding when a
/// required answer is absent or empty.
std::string bind_slots(const PlanStep& step, const std::map<int, std::string>& answers);

/// Newline-joined facts, deduplicated by exact (trimmed) line.
class AcquiredInformation {
 public:
  void add(std::string_view text);
  std::string str() const;
  bool empty() const noexcept { return lines_.empty(); }

 private:
  std::vector<std::string> lines_;
  std::set<std::string> seen_;
};

/// Something that returns fused top-k evidence for a query.
class EvidenceRetriever {
 public:
  virtual ~EvidenceRetriever() = default;
  virtual RetrievalResult retrieve(std::string_view query) const = 0;
  virtual const Corpus& corpus() const = 0;
};

class MultiViewEvidenceRetriever : public EvidenceRetriever {
 public:
  explicit MultiViewEvidenceRetriever(const MultiViewRetriever& retriever) : retriever_(retriever) {}
  RetrievalResult retrieve(std::string_view query) const override { return retriever_.retrieve(query); }
  const Corpus& corpus() const override { return retriever_.corpus(); }

 private:
  const MultiViewRetriever& retriever_;
};

struct StepResult {
  int step_id = 0;
  std::string sub_question;
  std::vector<int> dependencies;
  std::string bound_query;
  std::map<int, std::string> slot_fillings;  // dependency id -> substituted text
  std::vector<std::string> retrieved_unit_ids;
  std::string answer;
  std::string acquired_information;
  bool missing_binding = false;
  bool unparseable = false;
  std::vector<FusedCandidate> fusion;  // filled when explaining
};

struct ExecutionTrace {
  std::string question_id;
  std::string question;
  std::vector<std::string> initial_unit_ids;
  std::vector<FusedCandidate> initial_fusion;
  std::string decomposition_information;
  Plan plan;
  bool plan_fallback = false;
  std::vector<std::string> warnings;
  std::vector<StepResult> steps;
  std::string acquired_information;
  std::string final_answer;
  std::vector<TokenUsage> calls;
  UsageSummary usage;

  /// True when some step substitutes an earlier answer into a placeholder.
  bool has_dependency_slots() const;
  nlohmann::json to_json() const;
};

struct ExecutorOptions {
  std::size_t max_steps = 8;
  bool slot_binding = true;
  bool explain = false;
};

struct Decomposition {
  std::string acquired_information;
  Plan plan;
  bool fallback = false;
  std::vector<std::string> warnings;
};

/// Runs one question: initial retrieval, decomposition, slot-bound step
/// execution in id order, and final answer generation.
class SlotExecutor {
 public:
  SlotExecutor(const EvidenceRetriever& retriever, ChatModel& model, ExecutorOptions options = {});

  /// Throws InvalidQuery for a blank question.
  RetrievalResult initial_retrieve(std::string_view question) const;

  Decomposition decompose(std::string_view question, const std::vector<std::string>& evidence_ids,
                          UsageRecorder* usage = nullptr) const;

  /// Binds, retrieves and answers one step, appending to `acquired`.
  StepResult execute_step(std::string_view question, const PlanStep& step,
                          const std::vector<StepResult>& completed, AcquiredInformation& acquired,
                          UsageRecorder* usage = nullptr) const;

  /// Throws PreconditionViolation for a trace without steps.
  std::string finalize(ExecutionTrace& trace, UsageRecorder* usage = nullptr) const;

  /// Calls are recorded into `usage` when given, so a caller can account for
  /// a run that throws part way.
  ExecutionTrace run(const std::string& question_id, std::string_view question,
                     UsageRecorder* usage = nullptr) const;

  /// The evidence block handed to prompts for a list of unit ids.
  std::string format_evidence(const std::vector<std::string>& unit_ids) const;

 private:
  const EvidenceRetriever& retriever_;
  ChatModel& model_;
  ExecutorOptions options_;
};

}  // namespace mvrag
