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

#include <atomic>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <gtest/gtest.h>

#include "mvrag/error.hpp"
#include "mvrag/gateway.hpp"
#include "mvrag/prompts.hpp"

namespace mvrag {
namespace {

using nlohmann::json;

TEST(ParseJsonPayload, PlainFencedAndEmbedded) {
  EXPECT_EQ(parse_json_payload(R"({"answer":"x","acquired_information":"y"})")["answer"], "x");
  EXPECT_EQ(parse_json_payload("```json\n{\"a\": 1}\n```")["a"], 1);
  EXPECT_EQ(parse_json_payload("Sure! {\"a\": \"}{\"} trailing")["a"], "}{");
  try {
    parse_json_payload("no json here");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnparseableOutput);
  }
}

TEST(ScriptedChatModel, MatchesAndRecordsUsage) {
  ScriptedChatModel model;
  model.add({{"capital"}, {}, "Paris", 0, 0, 0.0});
  model.add({{"capital", "Italy"}, {}, "Rome", 10, 2, 0.0});
  const auto r = model.complete({"", "What is the capital of France?"});
  EXPECT_EQ(r.text, "Paris");
  EXPECT_EQ(r.usage.prompt_tokens, 0);
  EXPECT_EQ(r.usage.completion_tokens, 0);
  EXPECT_FALSE(r.usage.approximate);
  // The more specific entry wins.
  EXPECT_EQ(model.complete({"", "capital of Italy"}).text, "Rome");
  EXPECT_EQ(model.call_count(), 2u);
}

TEST(ScriptedChatModel, OrdinalEntriesTakePrecedence) {
  ScriptedChatModel model;
  model.add({{"x"}, {}, "by match"});
  model.add({{}, 1, "by ordinal"});
  EXPECT_EQ(model.complete({"", "x"}).text, "by match");
  EXPECT_EQ(model.complete({"", "x"}).text, "by ordinal");
}

TEST(ScriptedChatModel, UnmatchedAndAmbiguous) {
  ScriptedChatModel model;
  model.add({{"alpha"}, {}, "a"});
  model.add({{"beta"}, {}, "b"});
  try {
    model.complete({"", "gamma request"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnmatchedScript);
    EXPECT_NE(std::string(e.what()).find("gamma request"), std::string::npos);
  }
  EXPECT_THROW(model.complete({"", "alpha beta"}), Error);
  model.set_default("fallback");
  EXPECT_EQ(model.complete({"", "gamma"}).text, "fallback");
}

TEST(ScriptedChatModel, FromJson) {
  const auto model_json = json::parse(R"({
    "entries": [{"match": "hello", "response": {"k": 1}, "usage": {"prompt_tokens": 5, "completion_tokens": 3}}],
    "default": "none"})");
  auto model = ScriptedChatModel::from_json(model_json);
  const auto r = model.complete({"", "hello world"});
  EXPECT_EQ(json::parse(r.text)["k"], 1);
  EXPECT_EQ(r.usage.prompt_tokens, 5);
  EXPECT_EQ(model.complete({"", "bye"}).text, "none");
}

TEST(CompleteJson, RepairsOnce) {
  ScriptedChatModel model;
  model.add({{}, 0, "not json"});
  model.add({{}, 1, R"({"answer": "ok"})"});
  UsageRecorder usage;
  const auto r = complete_json(model, {"", "question"}, &usage);
  ASSERT_TRUE(r.value.has_value());
  EXPECT_TRUE(r.repaired);
  EXPECT_EQ(usage.calls().size(), 2u);
  EXPECT_NE(model.requests()[1].user.find("not json"), std::string::npos);
}

TEST(CompleteJson, ValidatorRejection) {
  ScriptedChatModel model;
  model.set_default(R"({"wrong": 1})");
  const auto r = complete_json(model, {"", "q"}, nullptr, [](const json& j) -> std::optional<std::string> {
    if (!j.contains("answer")) return "missing answer";
    return std::nullopt;
  });
  EXPECT_FALSE(r.value.has_value());
  EXPECT_EQ(r.error, "missing answer");
  EXPECT_EQ(model.call_count(), 2u);
}

TEST(Usage, LedgerAggregates) {
  UsageLedger ledger;
  const std::vector<TokenUsage> calls = {{100, 50, 1.0, false}, {200, 70, 2.0, false}};
  EXPECT_EQ(ledger.record_usage("q1", calls).total_tokens(), 420);
  EXPECT_EQ(ledger.record_usage("q2", {}).total_tokens(), 0);
  EXPECT_EQ(ledger.find("q1")->calls, 2u);
  EXPECT_FALSE(ledger.find("q3").has_value());
  EXPECT_EQ(ledger.total().total_tokens(), 420);
  EXPECT_EQ(approximate_tokens("abcde"), 2);
  EXPECT_EQ(approximate_tokens(""), 0);
}

TEST(Prompts, TemplatesAndRendering) {
  EXPECT_NE(prompts::graph_extraction().find("{passage}"), std::string_view::npos);
  EXPECT_NE(prompts::decomposition().find("<dep:ID>"), std::string_view::npos);
  EXPECT_NE(prompts::step_answer().find("{sub_question}"), std::string_view::npos);
  EXPECT_NE(prompts::final_answer().find("`Yes.` or `No.`"), std::string_view::npos);
  EXPECT_NE(prompts::judge().find("{gold_answer}"), std::string_view::npos);
  EXPECT_EQ(prompts::render("a {x} {\"json\": 1} {y} {x}", {{"x", "{y}"}, {"y", "Y"}}), "a {y} {\"json\": 1} Y {y}");
}

// Local chat-completion server that fails a configurable number of times.
class FakeServer {
 public:
  explicit FakeServer(int failures, int failure_status, bool with_usage = true) {
    server_.Post("/v1/chat/completions", [=, this](const httplib::Request& req, httplib::Response& res) {
      const int n = hits_++;
      last_auth_ = req.get_header_value("Authorization");
      if (n < failures) {
        res.status = failure_status;
        res.set_content("{}", "application/json");
        return;
      }
      const auto body = json::parse(req.body);
      json reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", "pong:" + body["model"].get<std::string>()}}}}}}};
      if (with_usage) reply["usage"] = {{"prompt_tokens", 11}, {"completion_tokens", 4}};
      res.set_content(reply.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  HttpEndpoint endpoint() const {
    HttpEndpoint e;
    e.url = "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
    e.model = "m1";
    e.api_key = "secret";
    e.timeout_s = 5;
    e.initial_backoff = std::chrono::milliseconds(1);
    return e;
  }
  int hits() const { return hits_; }
  std::string last_auth() const { return last_auth_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> hits_{0};
  std::string last_auth_;
};

TEST(HttpChatModel, RetriesRateLimits) {
  FakeServer server(2, 429);
  HttpChatModel model(server.endpoint());
  const auto r = model.complete({"sys", "ping"});
  EXPECT_EQ(r.text, "pong:m1");
  EXPECT_EQ(server.hits(), 3);
  EXPECT_EQ(r.usage.prompt_tokens, 11);
  EXPECT_EQ(r.usage.completion_tokens, 4);
  EXPECT_EQ(server.last_auth(), "Bearer secret");
}

TEST(HttpChatModel, GivesUpAfterRetries) {
  FakeServer server(10, 503);
  HttpChatModel model(server.endpoint());
  try {
    model.complete({"", "ping"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ModelError);
  }
  EXPECT_EQ(server.hits(), 4);
}

TEST(HttpChatModel, AuthFailureIsNotRetried) {
  FakeServer server(10, 401);
  HttpChatModel model(server.endpoint());
  try {
    model.complete({"", "ping"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::AuthError);
  }
  EXPECT_EQ(server.hits(), 1);
}

TEST(HttpChatModel, ApproximatesMissingUsage) {
  FakeServer server(0, 200, false);
  HttpChatModel model(server.endpoint());
  const auto r = model.complete({"", "12345678"});
  EXPECT_TRUE(r.usage.approximate);
  EXPECT_EQ(r.usage.completion_tokens, approximate_tokens("pong:m1"));
}

TEST(EndpointFromEnv, ReadsPrefixedVariables) {
  ::setenv("MVRAG_TESTPFX_URL", "http://h/v1", 1);
  ::setenv("MVRAG_TESTPFX_API_KEY", "k", 1);
  HttpEndpoint defaults;
  defaults.model = "fallback-model";
  const auto e = endpoint_from_env("MVRAG_TESTPFX", defaults);
  EXPECT_EQ(e.url, "http://h/v1");
  EXPECT_EQ(e.api_key, "k");
  EXPECT_EQ(e.model, "fallback-model");
  ::unsetenv("MVRAG_TESTPFX_URL");
  ::unsetenv("MVRAG_TESTPFX_API_KEY");
}

}  // namespace
}  // namespace mvrag
