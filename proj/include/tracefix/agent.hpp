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

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "tracefix/context.hpp"
#include "tracefix/debugger.hpp"
#include "tracefix/nav.hpp"
#include "tracefix/oracle.hpp"
#include "tracefix/patch.hpp"
#include "tracefix/playbook.hpp"
#include "tracefix/task.hpp"
#include "tracefix/validate.hpp"

namespace tracefix {

enum class OutcomeStatus { Resolved, BudgetExhausted, GaveUp, Irreproducible };

std::string_view to_string(OutcomeStatus s);
std::optional<OutcomeStatus> outcome_status_from_string(std::string_view s);

inline constexpr int kOutcomeSchemaVersion = 1;

struct Outcome {
  OutcomeStatus status = OutcomeStatus::GaveUp;
  std::optional<patch::UnifiedDiff> final_patch;  // present iff Resolved
  unsigned iterations = 0;
  double cost_usd = 0.0;
  // Relative to the output directory.
  std::filesystem::path transcript_path;
  std::string detail;  // why the loop ended
};

// Versioned document; no timestamps or absolute paths, so identical runs
// serialize identically.
nlohmann::json to_json(const Outcome& o);
Outcome outcome_from_json(const nlohmann::json& doc);

enum class FeedbackMode { Mechanical, Script };

struct AgentConfig {
  Budget budget;
  SessionOptions session;
  DistillOptions distill;
  patch::CorrectOptions correct;
  PromptOptions prompt;
  LspOptions lsp;
  std::optional<std::filesystem::path> playbook_dir;
  // Receives the working copy ("workdir") and "transcript.jsonl".
  std::filesystem::path output_dir = "tracefix-out";
  unsigned max_session_restarts = 3;
  FeedbackMode feedback_mode = FeedbackMode::Mechanical;
  std::string feedback_script;  // Python summary script for FeedbackMode::Script
};

using PreflightFn =
    std::function<PreflightResult(const RepairTask&, const std::filesystem::path& working_copy)>;
using SessionFactory = std::function<DebugSession(const DebugTarget&, const SessionOptions&)>;

// Collaborators of one repair run. Unset functions use the real
// implementations (preflight() and open_session()).
struct AgentDeps {
  ChatBackend* backend = nullptr;
  Validator* validator = nullptr;
  PreflightFn preflight;
  SessionFactory open_session;
};

// The repair loop: preflight, prompt assembly, then query -> parse ->
// dispatch -> distill -> append until a patch validates, the budget runs
// out, the agent concludes, or the scripted transcript ends. Tool failures
// become transcript feedback; only configuration errors throw.
Outcome run_repair(const RepairTask& task, const AgentConfig& config, AgentDeps deps);

// Fresh copy of the project tree at `dest` (anything there is removed
// first); `exclude` subtrees are skipped.
void make_working_copy(const std::filesystem::path& source, const std::filesystem::path& dest,
                       const std::vector<std::filesystem::path>& exclude = {});

inline constexpr std::string_view kNoRawOutput = "no raw output to summarize";

}  // namespace tracefix
