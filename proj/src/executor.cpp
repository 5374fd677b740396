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

#include "mvrag/executor.hpp"

#include <algorithm>
#include <sstream>

#include <spdlog/spdlog.h>

#include "mvrag/error.hpp"
#include "mvrag/prompts.hpp"
#include "mvrag/text.hpp"

namespace mvrag {

using nlohmann::json;

namespace {

constexpr std::string_view kPlaceholderOpen = "<dep:";

// Calls `on_token(begin, end, id)` for every well-formed placeholder.
template <typename F>
void scan_placeholders(std::string_view q, F&& on_token) {
  std::size_t pos = 0;
  while ((pos = q.find(kPlaceholderOpen, pos)) != std::string_view::npos) {
    std::size_t i = pos + kPlaceholderOpen.size();
    const std::size_t digits_begin = i;
    while (i < q.size() && q[i] >= '0' && q[i] <= '9') ++i;
    if (i == digits_begin || i >= q.size() || q[i] != '>' || i - digits_begin > 6) {
      throw Error(Errc::InvalidPlan, "malformed placeholder in '" + std::string(q) + "'");
    }
    const int id = std::stoi(std::string(q.substr(digits_begin, i - digits_begin)));
    on_token(pos, i + 1, id);
    pos = i + 1;
  }
}

std::string first_line(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (!t.empty()) return t;
  }
  return {};
}

std::vector<std::string> unit_ids(const std::vector<FusedCandidate>& ranked) {
  std::vector<std::string> ids;
  ids.reserve(ranked.size());
  for (const auto& c : ranked) ids.push_back(c.unit_id);
  return ids;
}

// Replaces placeholders using `lookup`, which returns the text for one id.
template <typename F>
std::string substitute(std::string_view q, F&& lookup) {
  std::string out;
  std::size_t copied = 0;
  scan_placeholders(q, [&](std::size_t begin, std::size_t end, int id) {
    out.append(q.substr(copied, begin - copied));
    out += lookup(id);
    copied = end;
  });
  out.append(q.substr(copied));
  return out;
}

}  // namespace

std::vector<int> placeholder_ids(std::string_view sub_question) {
  std::vector<int> ids;
  scan_placeholders(sub_question, [&](std::size_t, std::size_t, int id) { ids.push_back(id); });
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

Plan parse_plan(const json& plan) {
  if (!plan.is_array()) throw Error(Errc::InvalidPlan, "plan must be a list");
  Plan out;
  for (const auto& s : plan) {
    if (!s.is_object()) throw Error(Errc::InvalidPlan, "plan step must be an object");
    PlanStep step;
    auto id = s.find("id");
    if (id == s.end() || !id->is_number_integer()) throw Error(Errc::InvalidPlan, "step id must be an integer");
    step.id = id->get<int>();
    auto q = s.find("sub_question");
    if (q == s.end() || !q->is_string()) throw Error(Errc::InvalidPlan, "step sub_question must be a string");
    step.sub_question = normalize_whitespace(q->get<std::string>());
    if (auto deps = s.find("dependencies"); deps != s.end() && !deps->is_null()) {
      if (!deps->is_array()) throw Error(Errc::InvalidPlan, "dependencies must be a list");
      for (const auto& d : *deps) {
        if (!d.is_number_integer()) throw Error(Errc::InvalidPlan, "dependency must be an integer");
        step.dependencies.push_back(d.get<int>());
      }
    }
    out.push_back(std::move(step));
  }
  return out;
}

void validate_plan(const Plan& plan) {
  if (plan.empty()) throw Error(Errc::InvalidPlan, "plan is empty");
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& step = plan[i];
    const int expected = static_cast<int>(i);
    if (step.id != expected) {
      throw Error(Errc::InvalidPlan, "step ids must be contiguous from 0 (found " + std::to_string(step.id) +
                                         " at position " + std::to_string(i) + ")");
    }
    if (step.sub_question.empty()) throw Error(Errc::InvalidPlan, "step " + std::to_string(i) + " has no question");

    std::vector<int> deps = step.dependencies;
    std::sort(deps.begin(), deps.end());
    if (std::adjacent_find(deps.begin(), deps.end()) != deps.end()) {
      throw Error(Errc::InvalidPlan, "step " + std::to_string(i) + " lists a dependency twice");
    }
    for (int d : deps) {
      if (d < 0 || d >= step.id) {
        throw Error(Errc::InvalidPlan, "step " + std::to_string(i) + " depends on " + std::to_string(d) +
                                           ", which is not an earlier step");
      }
    }
    if (placeholder_ids(step.sub_question) != deps) {
      throw Error(Errc::InvalidPlan, "step " + std::to_string(i) +
                                         " placeholders do not match its dependencies");
    }
  }
}

Plan fallback_plan(std::string_view question) { return {PlanStep{0, std::string(question), {}}}; }

std::string bind_slots(const PlanStep& step, const std::map<int, std::string>& answers) {
  for (int d : step.dependencies) {
    auto it = answers.find(d);
    if (it == answers.end() || trim(it->second).empty()) {
      throw Error(Errc::MissingBinding, "no answer for <dep:" + std::to_string(d) + ">");
    }
  }
  auto bound = substitute(step.sub_question, [&](int id) -> const std::string& {
    if (std::find(step.dependencies.begin(), step.dependencies.end(), id) == step.dependencies.end()) {
      throw Error(Errc::MissingBinding, "<dep:" + std::to_string(id) + "> is not a declared dependency");
    }
    return answers.at(id);
  });
  if (trim(bound).empty()) throw Error(Errc::MissingBinding, "bound query is empty");
  return bound;
}

void AcquiredInformation::add(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (t.empty() || !seen_.insert(t).second) continue;
    lines_.push_back(std::move(t));
  }
}

std::string AcquiredInformation::str() const {
  std::string out;
  for (std::size_t i = 0; i < lines_.size(); ++i) {
    if (i) out += '\n';
    out += lines_[i];
  }
  return out;
}

bool ExecutionTrace::has_dependency_slots() const {
  return std::any_of(plan.begin(), plan.end(), [](const PlanStep& s) { return !s.dependencies.empty(); });
}

json ExecutionTrace::to_json() const {
  json plan_json = json::array();
  for (const auto& s : plan) {
    plan_json.push_back({{"id", s.id}, {"sub_question", s.sub_question}, {"dependencies", s.dependencies}});
  }
  json steps_json = json::array();
  for (const auto& s : steps) {
    json fillings = json::object();
    for (const auto& [j, text] : s.slot_fillings) fillings[std::to_string(j)] = text;
    json step = {{"id", s.step_id},
                 {"sub_question", s.sub_question},
                 {"dependencies", s.dependencies},
                 {"bound_query", s.bound_query},
                 {"slot_fillings", fillings},
                 {"retrieved", s.retrieved_unit_ids},
                 {"answer", s.answer},
                 {"acquired_information", s.acquired_information},
                 {"missing_binding", s.missing_binding},
                 {"unparseable", s.unparseable}};
    if (!s.fusion.empty()) {
      json dump = json::array();
      for (const auto& c : s.fusion) dump.push_back(c.to_json());
      step["fusion"] = dump;
    }
    steps_json.push_back(std::move(step));
  }
  json calls_json = json::array();
  for (const auto& c : calls) {
    calls_json.push_back({{"prompt_tokens", c.prompt_tokens},
                          {"completion_tokens", c.completion_tokens},
                          {"model_ms", c.wall_clock_ms},
                          {"approximate", c.approximate}});
  }
  json out = {{"question_id", question_id},
              {"question", question},
              {"initial_retrieved", initial_unit_ids},
              {"decomposition_information", decomposition_information},
              {"plan", plan_json},
              {"plan_fallback", plan_fallback},
              {"warnings", warnings},
              {"steps", steps_json},
              {"acquired_information", acquired_information},
              {"final_answer", final_answer},
              {"calls", calls_json},
              {"usage",
               {{"prompt_tokens", usage.prompt_tokens},
                {"completion_tokens", usage.completion_tokens},
                {"total_tokens", usage.total_tokens()},
                {"model_ms", usage.wall_clock_ms},
                {"calls", usage.calls},
                {"approximate", usage.approximate}}}};
  if (!initial_fusion.empty()) {
    json dump = json::array();
    for (const auto& c : initial_fusion) dump.push_back(c.to_json());
    out["initial_fusion"] = dump;
  }
  return out;
}

// ---------------------------------------------------------------------------

SlotExecutor::SlotExecutor(const EvidenceRetriever& retriever, ChatModel& model, ExecutorOptions options)
    : retriever_(retriever), model_(model), options_(options) {
  if (options_.max_steps == 0) throw Error(Errc::InvalidConfig, "max steps must be at least 1");
}

std::string SlotExecutor::format_evidence(const std::vector<std::string>& unit_ids) const {
  std::string out;
  for (std::size_t i = 0; i < unit_ids.size(); ++i) {
    const auto* unit = retriever_.corpus().find(unit_ids[i]);
    if (!unit) continue;
    if (!out.empty()) out += "\n\n";
    out += "[" + std::to_string(i + 1) + "] " + evidence_text(*unit);
  }
  return out;
}

RetrievalResult SlotExecutor::initial_retrieve(std::string_view question) const {
  if (trim(question).empty()) throw Error(Errc::InvalidQuery, "question is empty");
  return retriever_.retrieve(question);
}

Decomposition SlotExecutor::decompose(std::string_view question, const std::vector<std::string>& evidence_ids,
                                      UsageRecorder* usage) const {
  ChatRequest request;
  request.user = prompts::render(prompts::decomposition(),
                                 {{"question", std::string(question)}, {"evidence", format_evidence(evidence_ids)}});

  auto completion = complete_json(model_, request, usage, [](const json& j) -> std::optional<std::string> {
    if (!j.is_object()) return "expected a JSON object";
    auto plan = j.find("plan");
    if (plan == j.end()) return "missing plan";
    try {
      validate_plan(parse_plan(*plan));
    } catch (const Error& e) {
      return std::string(e.what());
    }
    return std::nullopt;
  });

  Decomposition out;
  if (!completion.value) {
    out.plan = fallback_plan(question);
    out.fallback = true;
    out.warnings.push_back("plan fallback: " + completion.error);
    spdlog::warn("decomposition rejected ({}); using single-step plan", completion.error);
    return out;
  }
  const auto& payload = *completion.value;
  if (auto info = payload.find("acquired_information"); info != payload.end() && info->is_string()) {
    out.acquired_information = trim(info->get<std::string>());
  }
  out.plan = parse_plan(payload.at("plan"));
  if (out.plan.size() > options_.max_steps) {
    out.warnings.push_back("plan truncated from " + std::to_string(out.plan.size()) + " to " +
                           std::to_string(options_.max_steps) + " steps");
    spdlog::warn("{}", out.warnings.back());
    out.plan.resize(options_.max_steps);
  }
  return out;
}

StepResult SlotExecutor::execute_step(std::string_view question, const PlanStep& step,
                                      const std::vector<StepResult>& completed, AcquiredInformation& acquired,
                                      UsageRecorder* usage) const {
  StepResult result;
  result.step_id = step.id;
  result.sub_question = step.sub_question;
  result.dependencies = step.dependencies;

  auto find_step = [&](int id) -> const StepResult* {
    for (const auto& s : completed) {
      if (s.step_id == id) return &s;
    }
    return nullptr;
  };

  if (options_.slot_binding) {
    std::map<int, std::string> answers;
    for (int d : step.dependencies) {
      if (const auto* s = find_step(d)) answers[d] = s->answer;
    }
    try {
      result.bound_query = bind_slots(step, answers);
      for (int d : step.dependencies) result.slot_fillings[d] = answers.at(d);
    } catch (const Error& e) {
      if (e.code() != Errc::MissingBinding) throw;
      result.missing_binding = true;
      result.bound_query = substitute(step.sub_question, [&](int id) {
        auto it = answers.find(id);
        std::string filling = it == answers.end() ? std::string{} : trim(it->second);
        result.slot_fillings[id] = filling;
        return filling;
      });
    }
  } else {
    // Ablation: placeholders take the earlier sub-question text, not its answer.
    result.bound_query = substitute(step.sub_question, [&](int id) {
      const auto* s = find_step(id);
      std::string filling = s ? s->bound_query : std::string{};
      result.slot_fillings[id] = filling;
      return filling;
    });
  }
  result.bound_query = normalize_whitespace(result.bound_query);

  auto retrieval = retriever_.retrieve(result.bound_query);
  result.retrieved_unit_ids = unit_ids(retrieval.ranked);
  if (options_.explain) result.fusion = std::move(retrieval.candidates);

  ChatRequest request;
  request.user = prompts::render(prompts::step_answer(),
                                 {{"original_question", std::string(question)},
                                  {"acquired_information", acquired.str()},
                                  {"sub_question", result.bound_query},
                                  {"evidence", format_evidence(result.retrieved_unit_ids)}});
  auto completion = complete_json(model_, request, usage, [](const json& j) -> std::optional<std::string> {
    if (!j.is_object() || !j.contains("answer") || !j["answer"].is_string()) {
      return "expected a JSON object with a string answer";
    }
    return std::nullopt;
  });

  if (completion.value) {
    result.answer = trim((*completion.value)["answer"].get<std::string>());
    if (auto info = completion.value->find("acquired_information");
        info != completion.value->end() && info->is_string()) {
      result.acquired_information = trim(info->get<std::string>());
      acquired.add(result.acquired_information);
    }
  } else {
    result.unparseable = true;
    result.answer = first_line(completion.raw);
  }
  return result;
}

std::string SlotExecutor::finalize(ExecutionTrace& trace, UsageRecorder* usage) const {
  if (trace.steps.empty()) throw Error(Errc::PreconditionViolation, "cannot finalize a trace without steps");

  std::string evidence = "Acquired information:\n" + trace.acquired_information + "\n\nExecution trace:";
  for (const auto& s : trace.steps) {
    evidence += "\nStep " + std::to_string(s.step_id) + ": " + s.bound_query + "\nAnswer: " + s.answer;
  }

  ChatRequest request;
  request.user = prompts::render(prompts::final_answer(),
                                 {{"question", trace.question}, {"evidence", evidence}});
  request.max_output_tokens = 256;
  trace.final_answer = trim(complete_text(model_, request, usage));
  return trace.final_answer;
}

ExecutionTrace SlotExecutor::run(const std::string& question_id, std::string_view question,
                                 UsageRecorder* external_usage) const {
  UsageRecorder local_usage;
  UsageRecorder& usage = external_usage ? *external_usage : local_usage;
  ExecutionTrace trace;
  trace.question_id = question_id;
  trace.question = normalize_whitespace(question);

  auto initial = initial_retrieve(trace.question);
  trace.initial_unit_ids = unit_ids(initial.ranked);
  if (options_.explain) trace.initial_fusion = std::move(initial.candidates);

  auto decomposition = decompose(trace.question, trace.initial_unit_ids, &usage);
  trace.plan = std::move(decomposition.plan);
  trace.plan_fallback = decomposition.fallback;
  trace.warnings = std::move(decomposition.warnings);
  trace.decomposition_information = decomposition.acquired_information;

  AcquiredInformation acquired;
  acquired.add(decomposition.acquired_information);
  for (const auto& step : trace.plan) {
    trace.steps.push_back(execute_step(trace.question, step, trace.steps, acquired, &usage));
    if (trace.steps.back().missing_binding) {
      trace.warnings.push_back("step " + std::to_string(step.id) + " ran with a missing slot binding");
    }
  }
  trace.acquired_information = acquired.str();

  finalize(trace, &usage);
  trace.calls = usage.calls();
  trace.usage = usage.summary();
  return trace;
}

}  // namespace mvrag
