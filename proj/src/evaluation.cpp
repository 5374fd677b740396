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

#include "mvrag/evaluation.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "mvrag/error.hpp"
#include "mvrag/prompts.hpp"
#include "mvrag/text.hpp"

namespace mvrag {

using nlohmann::json;

bool str_acc(std::string_view prediction, std::string_view gold) {
  const auto g = normalize_answer_text(gold);
  if (g.empty()) return false;
  return normalize_answer_text(prediction).find(g) != std::string::npos;
}

bool parse_judge_verdict(std::string_view reply) {
  const auto words = normalize_answer_text(reply);
  const auto first = words.substr(0, words.find(' '));
  if (first == "correct") return true;
  if (first != "incorrect") spdlog::warn("judge reply '{}' is neither correct nor incorrect", trim(reply));
  return false;
}

bool llm_acc(std::string_view prediction, std::string_view gold, ChatModel& judge, UsageRecorder* usage) {
  if (trim(prediction).empty()) return false;
  ChatRequest request;
  request.user = prompts::render(prompts::judge(),
                                 {{"pred_answer", std::string(prediction)}, {"gold_answer", std::string(gold)}});
  request.max_output_tokens = 8;
  return parse_judge_verdict(complete_text(judge, request, usage));
}

json QuestionVerdict::to_json() const {
  return {{"question_id", question_id}, {"prediction", prediction}, {"gold", gold},
          {"str_acc", str_correct},     {"llm_acc", llm_correct},   {"tokens", tokens},
          {"ms", ms},                   {"failed", failed},
          {"slots", slots_correct ? json(*slots_correct ? "correct" : "wrong") : json("none")},
          {"slots_heuristic", slots_heuristic}};
}

QuestionVerdict QuestionVerdict::from_json(const json& j) {
  QuestionVerdict v;
  v.question_id = j.at("question_id").get<std::string>();
  v.prediction = j.value("prediction", "");
  v.gold = j.value("gold", "");
  v.str_correct = j.value("str_acc", false);
  v.llm_correct = j.value("llm_acc", false);
  v.tokens = j.value("tokens", std::int64_t{0});
  v.ms = j.value("ms", 0.0);
  v.failed = j.value("failed", false);
  const std::string slots = j.value("slots", "none");
  if (slots != "none") v.slots_correct = slots == "correct";
  v.slots_heuristic = j.value("slots_heuristic", false);
  return v;
}

json EvalReport::to_json() const {
  return {{"dataset", dataset},         {"questions", questions}, {"failed", failed},
          {"str_acc", str_acc},         {"llm_acc", llm_acc},     {"avg_time_s", avg_time_s},
          {"avg_tokens", avg_tokens}};
}

EvalReport aggregate_report(std::span<const QuestionVerdict> verdicts, std::string dataset) {
  if (verdicts.empty()) throw Error(Errc::EmptyInput, "no verdicts to aggregate");
  EvalReport r;
  r.dataset = std::move(dataset);
  r.questions = verdicts.size();
  std::size_t str_ok = 0, llm_ok = 0;
  double ms = 0.0, tokens = 0.0;
  for (const auto& v : verdicts) {
    str_ok += v.str_correct;
    llm_ok += v.llm_correct;
    r.failed += v.failed;
    ms += v.ms;
    tokens += static_cast<double>(v.tokens);
  }
  const auto n = static_cast<double>(verdicts.size());
  r.str_acc = 100.0 * static_cast<double>(str_ok) / n;
  r.llm_acc = 100.0 * static_cast<double>(llm_ok) / n;
  r.avg_time_s = ms / n / 1000.0;
  r.avg_tokens = tokens / n;
  return r;
}

json SlotDiagnostics::to_json() const {
  auto group = [](const SlotGroup& g) {
    return json{{"count", g.count}, {"str_acc", g.str_acc}, {"llm_acc", g.llm_acc}};
  };
  return {{"questions_with_slots", questions_with_slots},
          {"slot_wrong", slot_wrong},
          {"wrong_rate", wrong_rate},
          {"slot_correct_group", group(slot_correct_group)},
          {"slot_wrong_group", group(slot_wrong_group)},
          {"heuristic", heuristic}};
}

std::optional<bool> judge_slot_fillings(const ExecutionTrace& trace, const std::map<int, std::string>* gold_slots,
                                        ChatModel& judge, UsageRecorder* usage, bool* heuristic) {
  if (!trace.has_dependency_slots()) return std::nullopt;
  std::set<int> judged;
  for (const auto& step : trace.steps) {
    if (step.missing_binding) return false;
    for (const auto& [j, filling] : step.slot_fillings) {
      if (!judged.insert(j).second) continue;
      bool ok = false;
      if (gold_slots && gold_slots->contains(j)) {
        ok = llm_acc(filling, gold_slots->at(j), judge, usage);
      } else {
        if (heuristic) *heuristic = true;
        std::string grounding;
        for (const auto& s : trace.steps) {
          if (s.step_id == j) grounding = s.acquired_information;
        }
        if (grounding.empty()) grounding = trace.acquired_information;
        ok = llm_acc(grounding, filling, judge, usage);
      }
      if (!ok) return false;
    }
  }
  return true;
}

SlotDiagnostics summarize_slot_groups(std::span<const QuestionVerdict> verdicts) {
  SlotDiagnostics d;
  std::size_t correct_str = 0, correct_llm = 0, wrong_str = 0, wrong_llm = 0;
  for (const auto& v : verdicts) {
    if (!v.slots_correct) continue;
    ++d.questions_with_slots;
    d.heuristic = d.heuristic || v.slots_heuristic;
    if (*v.slots_correct) {
      ++d.slot_correct_group.count;
      correct_str += v.str_correct;
      correct_llm += v.llm_correct;
    } else {
      ++d.slot_wrong;
      ++d.slot_wrong_group.count;
      wrong_str += v.str_correct;
      wrong_llm += v.llm_correct;
    }
  }
  auto pct = [](std::size_t k, std::size_t n) { return n ? 100.0 * static_cast<double>(k) / static_cast<double>(n) : 0.0; };
  d.wrong_rate = pct(d.slot_wrong, d.questions_with_slots);
  d.slot_correct_group.str_acc = pct(correct_str, d.slot_correct_group.count);
  d.slot_correct_group.llm_acc = pct(correct_llm, d.slot_correct_group.count);
  d.slot_wrong_group.str_acc = pct(wrong_str, d.slot_wrong_group.count);
  d.slot_wrong_group.llm_acc = pct(wrong_llm, d.slot_wrong_group.count);
  return d;
}

SlotDiagnostics slot_diagnostics(std::span<const ExecutionTrace> traces, std::span<const QuestionVerdict> verdicts,
                                 const std::map<std::string, std::map<int, std::string>>& gold_slots,
                                 ChatModel& judge, UsageRecorder* usage) {
  std::map<std::string, const ExecutionTrace*> trace_by_id;
  for (const auto& t : traces) trace_by_id[t.question_id] = &t;

  std::vector<QuestionVerdict> judged;
  for (const auto& v : verdicts) {
    auto it = trace_by_id.find(v.question_id);
    if (it == trace_by_id.end()) continue;
    auto gold_it = gold_slots.find(v.question_id);
    QuestionVerdict copy = v;
    copy.slots_heuristic = false;
    copy.slots_correct = judge_slot_fillings(*it->second, gold_it == gold_slots.end() ? nullptr : &gold_it->second,
                                             judge, usage, &copy.slots_heuristic);
    judged.push_back(std::move(copy));
  }
  return summarize_slot_groups(judged);
}

std::string format_report_table(const EvalReport& r, const std::optional<SlotDiagnostics>& slots) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(1);
  out << std::left << std::setw(20) << "Dataset" << std::right << std::setw(11) << "#Questions"
      << std::setw(9) << "Str-Acc" << std::setw(9) << "LLM-Acc" << std::setw(14) << "Avg.Time(s)"
      << std::setw(13) << "Avg.#Tokens" << '\n';
  out << std::left << std::setw(20) << (r.dataset.empty() ? "-" : r.dataset) << std::right << std::setw(11)
      << r.questions << std::setw(9) << r.str_acc << std::setw(9) << r.llm_acc << std::setw(14)
      << std::setprecision(2) << r.avg_time_s << std::setw(13) << std::setprecision(1) << r.avg_tokens << '\n';
  if (r.failed) out << "failed questions: " << r.failed << '\n';
  if (slots) {
    out << '\n'
        << std::left << std::setw(20) << "Slot diagnostics" << std::right << std::setw(11) << "#Question"
        << std::setw(12) << "Wrong(%)" << std::setw(12) << "OK Str" << std::setw(12) << "OK LLM"
        << std::setw(12) << "Wrong Str" << std::setw(12) << "Wrong LLM" << '\n';
    out << std::left << std::setw(20) << (slots->heuristic ? "(heuristic)" : "") << std::right << std::setw(11)
        << slots->questions_with_slots << std::setw(12) << slots->wrong_rate << std::setw(12)
        << slots->slot_correct_group.str_acc << std::setw(12) << slots->slot_correct_group.llm_acc
        << std::setw(12) << slots->slot_wrong_group.str_acc << std::setw(12) << slots->slot_wrong_group.llm_acc
        << '\n';
  }
  return out.str();
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << content;
}

}  // namespace

void write_reports(const std::filesystem::path& directory, const EvalReport& report,
                   std::span<const QuestionVerdict> verdicts, const std::optional<SlotDiagnostics>& slots,
                   const json& effective_config) {
  std::filesystem::create_directories(directory);

  std::string text = format_report_table(report, slots);
  text += "\neffective config:\n" + effective_config.dump(2) + "\n";
  write_file(directory / "report.txt", text);

  json doc = {{"report", report.to_json()}, {"config", effective_config}};
  if (slots) doc["slot_diagnostics"] = slots->to_json();
  json per_question = json::array();
  for (const auto& v : verdicts) per_question.push_back(v.to_json());
  doc["verdicts"] = per_question;
  write_file(directory / "report.json", doc.dump(2) + "\n");

  std::ostringstream csv;
  csv << "id,str_acc,llm_acc,tokens,ms\n";
  for (const auto& v : verdicts) {
    csv << csv_field(v.question_id) << ',' << v.str_correct << ',' << v.llm_correct << ',' << v.tokens << ','
        << std::fixed << std::setprecision(1) << v.ms << '\n';
  }
  write_file(directory / "verdicts.csv", csv.str());
}

}  // namespace mvrag
