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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvrag/executor.hpp"
#include "mvrag/gateway.hpp"

namespace mvrag {

/// True iff the normalized gold answer occurs in the normalized prediction.
bool str_acc(std::string_view prediction, std::string_view gold);

/// Reads a judge reply: the leading word, case-folded and stripped of
/// punctuation, must be "correct". Anything else is incorrect.
bool parse_judge_verdict(std::string_view reply);

/// Asks the judge model whether `prediction` matches `gold`. A blank
/// prediction is incorrect without a call.
bool llm_acc(std::string_view prediction, std::string_view gold, ChatModel& judge,
             UsageRecorder* usage = nullptr);

struct QuestionVerdict {
  std::string question_id;
  std::string prediction;
  std::string gold;
  bool str_correct = false;
  bool llm_correct = false;
  std::int64_t tokens = 0;
  double ms = 0.0;
  bool failed = false;
  // Unset when the plan had no dependency slots.
  std::optional<bool> slots_correct;
  bool slots_heuristic = false;

  nlohmann::json to_json() const;
  static QuestionVerdict from_json(const nlohmann::json& j);
};

struct EvalReport {
  std::string dataset;
  std::size_t questions = 0;
  std::size_t failed = 0;
  double str_acc = 0.0;  // percent
  double llm_acc = 0.0;  // percent
  double avg_time_s = 0.0;
  double avg_tokens = 0.0;

  nlohmann::json to_json() const;
};

/// Accuracy = 100 * correct / total; time and tokens are arithmetic means.
/// Throws EmptyInput.
EvalReport aggregate_report(std::span<const QuestionVerdict> verdicts, std::string dataset = {});

struct SlotGroup {
  std::size_t count = 0;
  double str_acc = 0.0;
  double llm_acc = 0.0;
};

struct SlotDiagnostics {
  std::size_t questions_with_slots = 0;
  std::size_t slot_wrong = 0;
  double wrong_rate = 0.0;  // percent
  SlotGroup slot_correct_group;
  SlotGroup slot_wrong_group;
  // Some slot fillings were judged against the trace's own evidence because
  // no gold intermediate answer was available.
  bool heuristic = false;

  nlohmann::json to_json() const;
};

/// Judges every slot filling of one trace: against the gold intermediate
/// answer when `gold_slots` has one for that step, otherwise against the
/// evidence that the producing step acquired (setting `*heuristic`). A
/// missing binding counts as wrong. Unset when the plan had no slots.
std::optional<bool> judge_slot_fillings(const ExecutionTrace& trace, const std::map<int, std::string>* gold_slots,
                                        ChatModel& judge, UsageRecorder* usage = nullptr,
                                        bool* heuristic = nullptr);

/// Groups verdicts by their stored slot outcome.
SlotDiagnostics summarize_slot_groups(std::span<const QuestionVerdict> verdicts);

/// Splits questions whose plan introduces dependency slots into slot-correct
/// (every filling judged correct) and slot-wrong groups, and reports final
/// answer accuracy per group. `gold_slots` maps question id to gold answers
/// per step id; when a question has none, each filling is judged against the
/// evidence that the producing step acquired.
SlotDiagnostics slot_diagnostics(std::span<const ExecutionTrace> traces, std::span<const QuestionVerdict> verdicts,
                                 const std::map<std::string, std::map<int, std::string>>& gold_slots,
                                 ChatModel& judge, UsageRecorder* usage = nullptr);

/// Writes report.txt, report.json and verdicts.csv into `directory`.
void write_reports(const std::filesystem::path& directory, const EvalReport& report,
                   std::span<const QuestionVerdict> verdicts, const std::optional<SlotDiagnostics>& slots,
                   const nlohmann::json& effective_config);

std::string format_report_table(const EvalReport& report, const std::optional<SlotDiagnostics>& slots);

}  // namespace mvrag
