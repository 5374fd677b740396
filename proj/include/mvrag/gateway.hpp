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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace mvrag {

/// Decoding is always greedy (temperature 0); only the output budget varies.
struct ChatRequest {
  std::string system;
  std::string user;
  int max_output_tokens = 1024;
};

struct TokenUsage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  double wall_clock_ms = 0.0;
  bool approximate = false;  // counts estimated as ceil(chars / 4)

  std::int64_t total_tokens() const noexcept { return prompt_tokens + completion_tokens; }
};

struct ChatResponse {
  std::string text;
  TokenUsage usage;
};

class ChatModel {
 public:
  virtual ~ChatModel() = default;
  /// Must be safe to call concurrently.
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  virtual std::string id() const = 0;
};

// ---------------------------------------------------------------------------
// Usage accounting

struct UsageSummary {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  double wall_clock_ms = 0.0;
  std::size_t calls = 0;
  bool approximate = false;

  std::int64_t total_tokens() const noexcept { return prompt_tokens + completion_tokens; }
  UsageSummary& operator+=(const TokenUsage& u);
  UsageSummary& operator+=(const UsageSummary& u);
};

UsageSummary summarize(std::span<const TokenUsage> usages);

/// Per-call usage sink for one unit of work (a question, a build).
class UsageRecorder {
 public:
  void add(const TokenUsage& usage);
  std::vector<TokenUsage> calls() const;
  UsageSummary summary() const;

 private:
  mutable std::mutex mutex_;
  std::vector<TokenUsage> calls_;
};

/// Per-question aggregates across a run.
class UsageLedger {
 public:
  UsageSummary record_usage(const std::string& question_id, std::span<const TokenUsage> usages);
  std::optional<UsageSummary> find(const std::string& question_id) const;
  UsageSummary total() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, UsageSummary> per_question_;
};

std::int64_t approximate_tokens(std::string_view text);

// ---------------------------------------------------------------------------
// JSON payload handling

/// Parses model output as JSON: the raw text, then the first balanced {...}
/// block, then the text with code-fence markers removed. Throws
/// UnparseableOutput.
nlohmann::json parse_json_payload(std::string_view text);

struct JsonCompletion {
  std::optional<nlohmann::json> value;
  std::string raw;       // text of the last attempt
  std::string error;     // why the last attempt was rejected
  bool repaired = false; // value came from the repair re-prompt
};

/// Returns an error message for a payload that parses but is unusable.
using PayloadValidator = std::function<std::optional<std::string>(const nlohmann::json&)>;

/// One completion plus at most one repair re-prompt that echoes the rejected
/// output back with a reminder to return valid JSON.
JsonCompletion complete_json(ChatModel& model, const ChatRequest& request, UsageRecorder* usage,
                             const PayloadValidator& validate = {});

/// Calls the model and records usage.
std::string complete_text(ChatModel& model, const ChatRequest& request, UsageRecorder* usage);

// ---------------------------------------------------------------------------
// Providers

/// Canned responses for network-free, deterministic runs.
///
/// An entry matches a request when all of its substrings occur in the
/// request's system + user text, or when its ordinal equals the request's
/// zero-based call index. Ordinal entries take precedence. Among substring
/// entries the one with the most substrings wins; a tie is an error, as is a
/// request nothing matches when no default is declared.
class ScriptedChatModel : public ChatModel {
 public:
  struct Entry {
    std::vector<std::string> match;
    std::optional<std::size_t> ordinal;
    std::string response;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    double latency_ms = 0.0;
  };

  ScriptedChatModel() = default;
  explicit ScriptedChatModel(std::vector<Entry> entries, std::optional<std::string> default_response = {});
  ScriptedChatModel(ScriptedChatModel&& other) noexcept;

  /// Script file: a JSON list of {match, response} objects (match is a string
  /// or list of strings; optional ordinal, usage {prompt_tokens,
  /// completion_tokens}, latency_ms), or an object {entries: [...], default}.
  static ScriptedChatModel from_json(const nlohmann::json& script);
  static ScriptedChatModel from_file(const std::filesystem::path& path);

  void add(Entry entry);
  void set_default(std::string response);

  ChatResponse complete(const ChatRequest& request) override;
  std::string id() const override { return "scripted"; }

  /// Every request received so far, in arrival order.
  std::vector<ChatRequest> requests() const;
  std::size_t call_count() const;

 private:
  mutable std::mutex mutex_;
  std::vector<Entry> entries_;
  std::optional<std::string> default_response_;
  std::vector<ChatRequest> requests_;
};

struct HttpEndpoint {
  std::string url;      // e.g. https://host/v1/chat/completions
  std::string model;
  std::string api_key;  // from the environment only
  int timeout_s = 120;
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
};

/// Chat-completion client: POST {model, messages, temperature: 0, max_tokens}
/// and read choices[0].message.content plus usage counts. Retries transport
/// errors, 429 and 5xx with exponential backoff.
class HttpChatModel : public ChatModel {
 public:
  explicit HttpChatModel(HttpEndpoint endpoint);
  ChatResponse complete(const ChatRequest& request) override;
  std::string id() const override { return "http:" + endpoint_.model; }

 private:
  HttpEndpoint endpoint_;
};

/// POSTs a JSON body with retry. Returns the parsed response body.
nlohmann::json post_json_with_retry(const HttpEndpoint& endpoint, const nlohmann::json& body);

/// Reads <prefix>_URL, <prefix>_MODEL and <prefix>_API_KEY.
HttpEndpoint endpoint_from_env(std::string_view prefix, HttpEndpoint defaults = {});

}  // namespace mvrag
