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

#include "tracefix/oracle.hpp"

#include <algorithm>
#include <json.hpp>

#include "tracefix/error.hpp"
#include "tracefix/util.hpp"

namespace tracefix {

using nlohmann::json;

std::string_view to_string(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
    case Role::Tool: return "tool";
  }
  return "user";
}

std::size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

ChatTurn make_turn(Role role, std::string content) {
  ChatTurn t{role, std::move(content), 0};
  t.token_estimate = estimate_tokens(t.content);
  return t;
}

bool has_budget(const Budget& b) {
  return b.iterations_used < b.max_iterations && b.cost_used_usd < b.max_cost_usd;
}

Completion query(ChatBackend& backend, const std::vector<ChatTurn>& history,
                 Budget& budget) {
  if (!has_budget(budget)) {
    throw Error(ErrorCode::BudgetExhausted,
                "budget exhausted: " + std::to_string(budget.iterations_used) + "/" +
                    std::to_string(budget.max_iterations) + " iterations");
  }
  auto result = backend.complete(history, budget.temperature);
  budget.iterations_used += 1;
  double cost = std::max(0.0, result.usage.cost_usd);
  budget.cost_used_usd = std::min(budget.max_cost_usd, budget.cost_used_usd + cost);
  return result;
}

ScriptedBackend::ScriptedBackend(std::vector<Message> messages)
    : messages_(messages.begin(), messages.end()) {}

ScriptedBackend ScriptedBackend::from_jsonl(std::string_view text) {
  std::vector<Message> messages;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto j = json::parse(line);
      Message m;
      m.content = j.at("content").get<std::string>();
      m.cost_usd = j.value("cost_usd", 0.0);
      messages.push_back(std::move(m));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidConfig,
                  "scripted transcript line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return ScriptedBackend(std::move(messages));
}

ScriptedBackend ScriptedBackend::from_file(const std::filesystem::path& path) {
  return from_jsonl(read_file(path));
}

Completion ScriptedBackend::complete(const std::vector<ChatTurn>& history, double) {
  if (messages_.empty()) {
    throw Error(ErrorCode::TranscriptExhausted, "scripted transcript exhausted");
  }
  Completion c;
  c.text = std::move(messages_.front().content);
  c.usage.cost_usd = messages_.front().cost_usd;
  messages_.pop_front();
  for (const auto& t : history) c.usage.prompt_tokens += t.token_estimate;
  c.usage.completion_tokens = estimate_tokens(c.text);
  return c;
}

double cost_for(const PriceTable& prices, const std::string& model, const Usage& usage) {
  auto it = prices.find(model);
  if (it == prices.end()) return 0.0;
  return static_cast<double>(usage.prompt_tokens) * it->second.input_per_mtok / 1e6 +
         static_cast<double>(usage.completion_tokens) * it->second.output_per_mtok / 1e6;
}

}  // namespace tracefix
