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

#pragma once

#include <chrono>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tracefix {

enum class Role { System, User, Assistant, Tool };

std::string_view to_string(Role r);

struct ChatTurn {
  Role role = Role::User;
  std::string content;
  std::size_t token_estimate = 0;

  bool operator==(const ChatTurn&) const = default;
};

// Rough 4-bytes-per-token heuristic, used only for bookkeeping.
std::size_t estimate_tokens(std::string_view text);
ChatTurn make_turn(Role role, std::string content);

struct Budget {
  unsigned max_iterations = 75;
  unsigned iterations_used = 0;
  double max_cost_usd = 1.00;
  double cost_used_usd = 0.0;
  double temperature = 0.0;
};

bool has_budget(const Budget& b);

struct Usage {
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
  double cost_usd = 0.0;
};

struct Completion {
  std::string text;
  Usage usage;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual Completion complete(const std::vector<ChatTurn>& history,
                              double temperature) = 0;
};

// One LLM query = one iteration. Throws Error{BudgetExhausted} before any
// request when the budget is spent. Usage is charged only on success; the
// recorded cost never exceeds the cap.
Completion query(ChatBackend& backend, const std::vector<ChatTurn>& history,
                 Budget& budget);

// Pops canned assistant messages from a JSONL transcript; one record per
// line: {"content": "...", "cost_usd": 0.0 (optional)}. Throws
// Error{TranscriptExhausted} once empty.
class ScriptedBackend : public ChatBackend {
 public:
  struct Message {
    std::string content;
    double cost_usd = 0.0;
  };

  explicit ScriptedBackend(std::vector<Message> messages);
  static ScriptedBackend from_file(const std::filesystem::path& path);
  static ScriptedBackend from_jsonl(std::string_view text);

  Completion complete(const std::vector<ChatTurn>& history, double temperature) override;
  std::size_t remaining() const { return messages_.size(); }

 private:
  std::deque<Message> messages_;
};

// USD per million tokens.
struct ModelPrice {
  double input_per_mtok = 0.0;
  double output_per_mtok = 0.0;
};

using PriceTable = std::map<std::string, ModelPrice>;

double cost_for(const PriceTable& prices, const std::string& model, const Usage& usage);

struct HttpBackendOptions {
  std::string endpoint;  // base URL, e.g. https://api.example.com/v1
  std::string model;
  std::string api_key;   // sent as a bearer token when non-empty
  PriceTable prices;
  std::chrono::milliseconds timeout{120000};
  unsigned max_retries = 2;
  std::chrono::milliseconds backoff{500};  // doubled per retry
  std::optional<std::size_t> max_tokens;
};

// OpenAI-compatible chat-completions client (POST {endpoint}/chat/completions).
class HttpBackend : public ChatBackend {
 public:
  explicit HttpBackend(HttpBackendOptions options);
  Completion complete(const std::vector<ChatTurn>& history, double temperature) override;

 private:
  HttpBackendOptions options_;
};

}  // namespace tracefix
