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

#include "mvrag/gateway.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "mvrag/error.hpp"
#include "mvrag/text.hpp"

namespace mvrag {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Usage accounting

UsageSummary& UsageSummary::operator+=(const TokenUsage& u) {
  prompt_tokens += u.prompt_tokens;
  completion_tokens += u.completion_tokens;
  wall_clock_ms += u.wall_clock_ms;
  calls += 1;
  approximate = approximate || u.approximate;
  return *this;
}

UsageSummary& UsageSummary::operator+=(const UsageSummary& u) {
  prompt_tokens += u.prompt_tokens;
  completion_tokens += u.completion_tokens;
  wall_clock_ms += u.wall_clock_ms;
  calls += u.calls;
  approximate = approximate || u.approximate;
  return *this;
}

UsageSummary summarize(std::span<const TokenUsage> usages) {
  UsageSummary s;
  for (const auto& u : usages) s += u;
  return s;
}

void UsageRecorder::add(const TokenUsage& usage) {
  std::lock_guard lock(mutex_);
  calls_.push_back(usage);
}

std::vector<TokenUsage> UsageRecorder::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

UsageSummary UsageRecorder::summary() const {
  std::lock_guard lock(mutex_);
  return summarize(calls_);
}

UsageSummary UsageLedger::record_usage(const std::string& question_id,
                                       std::span<const TokenUsage> usages) {
  auto s = summarize(usages);
  std::lock_guard lock(mutex_);
  per_question_[question_id] = s;
  return s;
}

std::optional<UsageSummary> UsageLedger::find(const std::string& question_id) const {
  std::lock_guard lock(mutex_);
  auto it = per_question_.find(question_id);
  if (it == per_question_.end()) return std::nullopt;
  return it->second;
}

UsageSummary UsageLedger::total() const {
  std::lock_guard lock(mutex_);
  UsageSummary s;
  for (const auto& [_, q] : per_question_) s += q;
  return s;
}

std::int64_t approximate_tokens(std::string_view text) {
  return static_cast<std::int64_t>((text.size() + 3) / 4);
}

// ---------------------------------------------------------------------------
// JSON payload handling

namespace {

std::optional<json> try_parse(std::string_view text) {
  auto j = json::parse(text.begin(), text.end(), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) return std::nullopt;
  return j;
}

std::optional<std::string_view> first_balanced_object(std::string_view text) {
  const auto start = text.find('{');
  if (start == std::string_view::npos) return std::nullopt;
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return text.substr(start, i - start + 1);
  }
  return std::nullopt;
}

std::string strip_code_fences(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line, out;
  while (std::getline(in, line)) {
    if (trim(line).starts_with("```")) continue;
    out += line;
    out += '\n';
  }
  return out;
}

}  // namespace

json parse_json_payload(std::string_view text) {
  if (auto j = try_parse(trim(text))) return *j;
  if (auto block = first_balanced_object(text)) {
    if (auto j = try_parse(*block)) return *j;
  }
  if (auto j = try_parse(trim(strip_code_fences(text)))) return *j;
  std::string preview(text.substr(0, 200));
  throw Error(Errc::UnparseableOutput, "no JSON payload in model output: " + preview);
}

std::string complete_text(ChatModel& model, const ChatRequest& request, UsageRecorder* usage) {
  auto response = model.complete(request);
  if (usage) usage->add(response.usage);
  return response.text;
}

JsonCompletion complete_json(ChatModel& model, const ChatRequest& request, UsageRecorder* usage,
                             const PayloadValidator& validate) {
  JsonCompletion out;
  auto attempt = [&](const ChatRequest& req) {
    out.raw = complete_text(model, req, usage);
    try {
      json value = parse_json_payload(out.raw);
      if (validate) {
        if (auto problem = validate(value)) {
          out.error = *problem;
          return false;
        }
      }
      out.value = std::move(value);
      return true;
    } catch (const Error& e) {
      out.error = "output is not valid JSON";
      return false;
    }
  };

  if (attempt(request)) return out;

  ChatRequest repair = request;
  repair.user += "\n\n<previous_output>\n" + out.raw + "\n</previous_output>\n\n" +
                 "The previous output was rejected: " + out.error +
                 ". Return valid JSON only, in the required output format.";
  if (attempt(repair)) out.repaired = true;
  return out;
}

// ---------------------------------------------------------------------------
// Scripted provider

ScriptedChatModel::ScriptedChatModel(std::vector<Entry> entries,
                                     std::optional<std::string> default_response)
    : entries_(std::move(entries)), default_response_(std::move(default_response)) {}

ScriptedChatModel::ScriptedChatModel(ScriptedChatModel&& other) noexcept {
  std::lock_guard lock(other.mutex_);
  entries_ = std::move(other.entries_);
  default_response_ = std::move(other.default_response_);
  requests_ = std::move(other.requests_);
}

ScriptedChatModel ScriptedChatModel::from_json(const json& script) {
  const json* list = &script;
  std::optional<std::string> fallback;
  if (script.is_object()) {
    list = &script.at("entries");
    if (auto it = script.find("default"); it != script.end() && it->is_string()) {
      fallback = it->get<std::string>();
    }
  }
  if (!list->is_array()) throw Error(Errc::ParseError, "script must be a list of entries");

  std::vector<Entry> entries;
  for (const auto& e : *list) {
    Entry entry;
    if (auto m = e.find("match"); m != e.end()) {
      if (m->is_string()) entry.match.push_back(m->get<std::string>());
      else entry.match = m->get<std::vector<std::string>>();
    }
    if (auto o = e.find("ordinal"); o != e.end()) entry.ordinal = o->get<std::size_t>();
    if (entry.match.empty() && !entry.ordinal) {
      throw Error(Errc::ParseError, "script entry needs a match or an ordinal");
    }
    const auto& response = e.at("response");
    entry.response = response.is_string() ? response.get<std::string>() : response.dump();
    if (auto u = e.find("usage"); u != e.end()) {
      entry.prompt_tokens = u->value("prompt_tokens", std::int64_t{0});
      entry.completion_tokens = u->value("completion_tokens", std::int64_t{0});
    }
    entry.latency_ms = e.value("latency_ms", 0.0);
    entries.push_back(std::move(entry));
  }
  return ScriptedChatModel(std::move(entries), std::move(fallback));
}

ScriptedChatModel ScriptedChatModel::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open script " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, "script " + path.string() + ": " + e.what());
  }
}

void ScriptedChatModel::add(Entry entry) {
  std::lock_guard lock(mutex_);
  entries_.push_back(std::move(entry));
}

void ScriptedChatModel::set_default(std::string response) {
  std::lock_guard lock(mutex_);
  default_response_ = std::move(response);
}

ChatResponse ScriptedChatModel::complete(const ChatRequest& request) {
  std::lock_guard lock(mutex_);
  const std::size_t ordinal = requests_.size();
  requests_.push_back(request);
  const std::string haystack = request.system + "\n" + request.user;

  const Entry* chosen = nullptr;
  for (const auto& e : entries_) {
    if (e.ordinal && *e.ordinal == ordinal) {
      chosen = &e;
      break;
    }
  }
  if (!chosen) {
    std::size_t best = 0;
    bool tie = false;
    for (const auto& e : entries_) {
      if (e.ordinal || e.match.empty()) continue;
      const bool all = std::all_of(e.match.begin(), e.match.end(), [&](const std::string& m) {
        return haystack.find(m) != std::string::npos;
      });
      if (!all) continue;
      if (e.match.size() > best) {
        best = e.match.size();
        chosen = &e;
        tie = false;
      } else if (e.match.size() == best) {
        tie = true;
      }
    }
    if (chosen && tie) {
      throw Error(Errc::UnmatchedScript, "ambiguous script match for request:\n" + haystack);
    }
  }

  ChatResponse response;
  if (chosen) {
    response.text = chosen->response;
    response.usage.prompt_tokens = chosen->prompt_tokens;
    response.usage.completion_tokens = chosen->completion_tokens;
    response.usage.wall_clock_ms = chosen->latency_ms;
    return response;
  }
  if (default_response_) {
    response.text = *default_response_;
    return response;
  }
  // The tail of a prompt carries the request-specific inputs.
  constexpr std::size_t kExcerpt = 400;
  const std::string excerpt =
      haystack.size() > kExcerpt ? "..." + haystack.substr(haystack.size() - kExcerpt) : haystack;
  throw Error(Errc::UnmatchedScript, "no script entry matches request:\n" + excerpt);
}

std::vector<ChatRequest> ScriptedChatModel::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

std::size_t ScriptedChatModel::call_count() const {
  std::lock_guard lock(mutex_);
  return requests_.size();
}

// ---------------------------------------------------------------------------
// HTTP provider

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(Errc::InvalidConfig, "endpoint URL needs a scheme: '" + url + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

bool is_transient(int status) { return status == 429 || status >= 500; }

}  // namespace

json post_json_with_retry(const HttpEndpoint& endpoint, const json& body) {
  const auto [origin, path] = split_url(endpoint.url);
  httplib::Client client(origin);
  client.set_connection_timeout(endpoint.timeout_s);
  client.set_read_timeout(endpoint.timeout_s);
  client.set_write_timeout(endpoint.timeout_s);
  httplib::Headers headers;
  if (!endpoint.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint.api_key);

  const std::string payload = body.dump();
  auto backoff = endpoint.initial_backoff;
  std::string last_problem;
  for (int attempt = 0; attempt <= endpoint.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    auto result = client.Post(path, headers, payload, "application/json");
    if (!result) {
      last_problem = "transport error: " + httplib::to_string(result.error());
      spdlog::warn("{} (attempt {}/{})", last_problem, attempt + 1, endpoint.max_retries + 1);
      continue;
    }
    const int status = result->status;
    if (status == 401 || status == 403) {
      throw Error(Errc::AuthError, "endpoint rejected credentials (HTTP " + std::to_string(status) + ")");
    }
    if (is_transient(status)) {
      last_problem = "HTTP " + std::to_string(status);
      spdlog::warn("{} from {} (attempt {}/{})", last_problem, endpoint.url, attempt + 1,
                   endpoint.max_retries + 1);
      continue;
    }
    if (status < 200 || status >= 300) {
      throw Error(Errc::ModelError, "HTTP " + std::to_string(status) + ": " + result->body);
    }
    auto parsed = json::parse(result->body, nullptr, false);
    if (parsed.is_discarded()) throw Error(Errc::ModelError, "response body is not JSON");
    return parsed;
  }
  throw Error(Errc::ModelError, "giving up after " + std::to_string(endpoint.max_retries) +
                                    " retries: " + last_problem);
}

HttpChatModel::HttpChatModel(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {
  if (endpoint_.url.empty()) throw Error(Errc::InvalidConfig, "chat endpoint URL is not set");
}

ChatResponse HttpChatModel::complete(const ChatRequest& request) {
  json messages = json::array();
  if (!request.system.empty()) messages.push_back({{"role", "system"}, {"content", request.system}});
  messages.push_back({{"role", "user"}, {"content", request.user}});
  json body = {{"model", endpoint_.model},
               {"messages", messages},
               {"temperature", 0},
               {"max_tokens", request.max_output_tokens}};

  const auto start = std::chrono::steady_clock::now();
  json reply = post_json_with_retry(endpoint_, body);
  const auto elapsed = std::chrono::steady_clock::now() - start;

  ChatResponse response;
  try {
    const auto& content = reply.at("choices").at(0).at("message").at("content");
    response.text = content.is_string() ? content.get<std::string>() : std::string{};
  } catch (const json::exception&) {
    throw Error(Errc::ModelError, "unexpected chat response shape: " + reply.dump().substr(0, 200));
  }
  response.usage.wall_clock_ms = std::chrono::duration<double, std::milli>(elapsed).count();
  if (auto u = reply.find("usage"); u != reply.end() && u->is_object()) {
    response.usage.prompt_tokens = u->value("prompt_tokens", std::int64_t{0});
    response.usage.completion_tokens = u->value("completion_tokens", std::int64_t{0});
  } else {
    response.usage.prompt_tokens = approximate_tokens(request.system) + approximate_tokens(request.user);
    response.usage.completion_tokens = approximate_tokens(response.text);
    response.usage.approximate = true;
  }
  return response;
}

HttpEndpoint endpoint_from_env(std::string_view prefix, HttpEndpoint defaults) {
  auto read = [&](const char* suffix) -> std::optional<std::string> {
    const std::string name = std::string(prefix) + suffix;
    if (const char* v = std::getenv(name.c_str()); v && *v) return std::string(v);
    return std::nullopt;
  };
  if (auto v = read("_URL")) defaults.url = *v;
  if (auto v = read("_MODEL")) defaults.model = *v;
  if (auto v = read("_API_KEY")) defaults.api_key = *v;
  return defaults;
}

}  // namespace mvrag
