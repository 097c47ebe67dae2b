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
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tracefix/oracle.hpp"

namespace tracefix {

// ---- Action envelopes ------------------------------------------------------

// Fence tag of the envelope block: ```action\n{json}\n```
inline constexpr std::string_view kEnvelopeFence = "action";

struct HypothesisAction {
  std::string text;
  bool operator==(const HypothesisAction&) const = default;
};

struct ViewSourceAction {
  std::string path;              // project-relative; empty when `symbol` is used
  unsigned line = 1;
  std::optional<unsigned> radius;
  std::string symbol;            // resolve via the language server instead
  bool operator==(const ViewSourceAction&) const = default;
};

struct DebugAction {
  std::vector<std::string> commands;
  bool operator==(const DebugAction&) const = default;
};

struct ScriptAction {
  std::string code;
  std::string target = "last";  // which prior tool output to feed on stdin
  bool operator==(const ScriptAction&) const = default;
};

struct PatchAction {
  std::string diff;
  std::string root_cause;
  bool operator==(const PatchAction&) const = default;
};

struct ConcludeAction {
  std::string rationale;
  bool operator==(const ConcludeAction&) const = default;
};

enum class ActionKind { Hypothesis, ViewSource, Debug, Script, Patch, Conclude };

std::string_view to_string(ActionKind k);

struct ActionEnvelope {
  std::variant<HypothesisAction, ViewSourceAction, DebugAction, ScriptAction,
               PatchAction, ConcludeAction>
      payload;

  ActionKind kind() const { return static_cast<ActionKind>(payload.index()); }
  bool operator==(const ActionEnvelope&) const = default;
};

struct ParsedAction {
  ActionEnvelope envelope;
  // Further envelope blocks in the same message; never acted on.
  std::size_t ignored_envelopes = 0;
};

// Acts on the first well-formed envelope. Throws Error{ProtocolError} when
// there is none, with the reason for the first malformed block if any.
ParsedAction parse_action(std::string_view assistant_text);

std::string render_action(const ActionEnvelope& envelope);

// ---- Transcript ------------------------------------------------------------

class AgentContext {
 public:
  void append(ChatTurn turn);
  void add_note(std::string note);
  // Flips once; later calls are no-ops.
  void mark_hypothesis();
  void record_evidence() { ++debug_evidence_count_; }

  const std::vector<ChatTurn>& turns() const { return turns_; }
  const std::vector<std::string>& notes() const { return notes_; }
  std::size_t char_estimate() const { return char_estimate_; }
  bool hypothesis_stated() const { return hypothesis_stated_; }
  unsigned debug_evidence_count() const { return debug_evidence_count_; }

 private:
  std::vector<ChatTurn> turns_;
  std::vector<std::string> notes_;
  std::size_t char_estimate_ = 0;
  bool hypothesis_stated_ = false;
  unsigned debug_evidence_count_ = 0;
};

// ---- Sandbox ---------------------------------------------------------------

struct SandboxLimits {
  std::string interpreter = "python3";
  std::size_t max_script_bytes = 8 * 1024;
  std::uint64_t cpu_seconds = 5;
  std::uint64_t memory_bytes = 256ull * 1024 * 1024;
  std::size_t stdout_cap = 4 * 1024;
  // Wall-clock guard for scripts that block instead of burning CPU.
  std::chrono::milliseconds wall_timeout{10000};
};

// Runs a Python summary script with `stdin_data` on stdin: isolated
// interpreter, no network, no process creation, read-only view limited to a
// scratch directory (plus the interpreter's own library), CPU and memory
// rlimits, stdout capped with a marker. Throws Error{SandboxViolation},
// Error{Timeout} or Error{NonZeroExit}; the message carries the stderr tail.
std::string run_summary_script(const std::string& script_text,
                               const std::string& stdin_data,
                               const SandboxLimits& limits = {});

// ---- Distillation ----------------------------------------------------------

struct DistillOptions {
  std::size_t inline_cap = 4 * 1024;
  double head_fraction = 0.6;
  SandboxLimits sandbox;
};

// Head+tail cut to at most `cap` bytes with an elision marker naming the
// dropped and total byte counts. Text within the cap is returned unchanged.
std::string truncate_head_tail(std::string_view text, std::size_t cap,
                               double head_fraction = 0.6);

struct DistillResult {
  std::string summary;
  bool script_failed = false;
};

// Summarizes raw tool output: through `script` when given (falling back to
// truncation with a failure note if the script fails), verbatim when within
// the inline cap, head+tail truncated otherwise. Does not touch any context;
// see distill().
DistillResult distill_output(std::string_view raw_output,
                             const std::optional<std::string>& script,
                             const DistillOptions& options = {});

// distill_output() plus appending the summary to `ctx` as a tool turn.
std::string distill(AgentContext& ctx, std::string_view raw_output,
                    const std::optional<std::string>& script,
                    const DistillOptions& options = {});

}  // namespace tracefix
