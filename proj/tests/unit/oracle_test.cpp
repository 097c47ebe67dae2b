// Copyright 2026 The tracefix Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <httplib.h>

#include <json.hpp>
#include <thread>

#include "tracefix/error.hpp"
#include "tracefix/oracle.hpp"

namespace tracefix {
namespace {

using nlohmann::json;

std::vector<ChatTurn> history() { return {make_turn(Role::User, "hello")}; }

TEST(Budget, Defaults) {
  Budget b;
  EXPECT_EQ(b.max_iterations, 75u);
  EXPECT_DOUBLE_EQ(b.max_cost_usd, 1.00);
  EXPECT_DOUBLE_EQ(b.temperature, 0.0);
}

TEST(Budget, HasBudget) {
  Budget b;
  EXPECT_TRUE(has_budget(b));
  b.iterations_used = 75;
  EXPECT_FALSE(has_budget(b));
  b.iterations_used = 10;
  b.cost_used_usd = 1.00;
  EXPECT_FALSE(has_budget(b));
  b.cost_used_usd = 0.999;
  EXPECT_TRUE(has_budget(b));
}

TEST(ScriptedBackend, QueueSemantics) {
  std::string jsonl;
  for (int i = 0; i < 5; ++i) jsonl += json{{"content", "msg " + std::to_string(i)}}.dump() + "\n";
  auto backend = ScriptedBackend::from_jsonl(jsonl);
  Budget budget;
  for (int i = 0; i < 5; ++i) {
    auto c = query(backend, history(), budget);
    EXPECT_EQ(c.text, "msg " + std::to_string(i));
    EXPECT_DOUBLE_EQ(c.usage.cost_usd, 0.0);
  }
  EXPECT_EQ(budget.iterations_used, 5u);
  try {
    query(backend, history(), budget);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TranscriptExhausted);
  }
  // A failed query is not charged.
  EXPECT_EQ(budget.iterations_used, 5u);
}

TEST(ScriptedBackend, MalformedLineNamed) {
  try {
    ScriptedBackend::from_jsonl("{\"content\":\"a\"}\nnot json\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Query, BudgetExhaustedBeforeAnyRequest) {
  auto backend = ScriptedBackend::from_jsonl("{\"content\":\"x\"}\n");
  Budget b;
  b.iterations_used = 75;
  try {
    query(backend, history(), b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BudgetExhausted);
  }
  EXPECT_EQ(backend.remaining(), 1u);
}

TEST(Query, CostIsMonotoneAndCapped) {
  std::string jsonl;
  for (int i = 0; i < 10; ++i) jsonl += "{\"content\":\"x\",\"cost_usd\":0.3}\n";
  auto backend = ScriptedBackend::from_jsonl(jsonl);
  Budget b;
  double last = 0.0;
  int queries = 0;
  while (has_budget(b)) {
    query(backend, history(), b);
    ++queries;
    EXPECT_GE(b.cost_used_usd, last);
    EXPECT_LE(b.cost_used_usd, b.max_cost_usd);
    last = b.cost_used_usd;
  }
  EXPECT_EQ(queries, 4);
  EXPECT_DOUBLE_EQ(b.cost_used_usd, 1.0);
}

TEST(CostFor, UsesPriceTable) {
  PriceTable prices{{"m", {2.0, 8.0}}};
  Usage u{1000, 500, 0.0};
  EXPECT_DOUBLE_EQ(cost_for(prices, "m", u), 1000 * 2.0 / 1e6 + 500 * 8.0 / 1e6);
  EXPECT_DOUBLE_EQ(cost_for(prices, "unknown", u), 0.0);
}

// Local stub speaking the chat-completions shape.
class StubServer {
 public:
  explicit StubServer(int failures_before_success = 0) : failures_(failures_before_success) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                httplib::Response& res) {
      ++requests_;
      last_body_ = req.body;
      last_auth_ = req.get_header_value("Authorization");
      if (failures_ > 0) {
        --failures_;
        res.status = 503;
        res.set_content("busy", "text/plain");
        return;
      }
      json reply = {
          {"choices", {{{"message", {{"role", "assistant"}, {"content", "stub reply"}}}}}},
          {"usage", {{"prompt_tokens", 1200}, {"completion_tokens", 300}}}};
      res.set_content(reply.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  int requests() const { return requests_; }
  const std::string& last_body() const { return last_body_; }
  const std::string& last_auth() const { return last_auth_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  int failures_;
  std::atomic<int> requests_{0};
  std::string last_body_, last_auth_;
};

HttpBackendOptions options_for(const StubServer& s) {
  HttpBackendOptions o;
  o.endpoint = s.endpoint();
  o.model = "stub-model";
  o.api_key = "secret";
  o.prices = {{"stub-model", {1.0, 4.0}}};
  o.backoff = std::chrono::milliseconds(10);
  o.timeout = std::chrono::milliseconds(5000);
  return o;
}

TEST(HttpBackend, ReturnsBodyAndComputesCost) {
  StubServer stub;
  HttpBackend backend(options_for(stub));
  Budget b;
  b.temperature = 0.0;
  auto c = query(backend, {make_turn(Role::System, "sys"), make_turn(Role::User, "hi")}, b);
  EXPECT_EQ(c.text, "stub reply");
  EXPECT_EQ(c.usage.prompt_tokens, 1200u);
  EXPECT_EQ(c.usage.completion_tokens, 300u);
  EXPECT_DOUBLE_EQ(c.usage.cost_usd, 1200 * 1.0 / 1e6 + 300 * 4.0 / 1e6);
  EXPECT_DOUBLE_EQ(b.cost_used_usd, c.usage.cost_usd);
  auto sent = json::parse(stub.last_body());
  EXPECT_EQ(sent["model"], "stub-model");
  EXPECT_EQ(sent["temperature"], 0.0);
  EXPECT_EQ(sent["messages"].size(), 2u);
  EXPECT_EQ(sent["messages"][0]["role"], "system");
  EXPECT_EQ(stub.last_auth(), "Bearer secret");
}

TEST(HttpBackend, RetriesTwiceThenSucceeds) {
  StubServer stub(2);
  HttpBackend backend(options_for(stub));
  auto c = backend.complete(history(), 0.0);
  EXPECT_EQ(c.text, "stub reply");
  EXPECT_EQ(stub.requests(), 3);
}

TEST(HttpBackend, SurfacesBackendErrorAfterRetries) {
  StubServer stub(10);
  HttpBackend backend(options_for(stub));
  Budget b;
  try {
    query(backend, history(), b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BackendError);
  }
  EXPECT_EQ(stub.requests(), 3);
  EXPECT_EQ(b.iterations_used, 0u);
}

TEST(HttpBackend, ConnectionRefused) {
  HttpBackendOptions o;
  o.endpoint = "http://127.0.0.1:1/v1";
  o.backoff = std::chrono::milliseconds(1);
  o.timeout = std::chrono::milliseconds(500);
  HttpBackend backend(o);
  EXPECT_THROW(backend.complete(history(), 0.0), Error);
}

TEST(HttpBackend, RejectsNonUrlEndpoint) {
  HttpBackendOptions o;
  o.endpoint = "not a url";
  EXPECT_THROW(HttpBackend{o}, Error);
}

}  // namespace
}  // namespace tracefix
