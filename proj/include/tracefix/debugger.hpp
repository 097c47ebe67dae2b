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
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tracefix/task.hpp"

namespace tracefix {

enum class BackendKind { Forward, Replay, Fake };
enum class SessionState { NotStarted, AtTrap, Stopped, Running, Exited };
enum class Capability { ReverseExec, HeapIntrospection };
enum class CommandCategory { Inspect, Breakpoint, Control, Reverse, Passthrough };
enum class StopReason { Breakpoint, Watchpoint, Signal, SanitizerTrap, Exited };

std::string_view to_string(BackendKind k);
std::string_view to_string(SessionState s);
std::string_view to_string(Capability c);
std::string_view to_string(CommandCategory c);
std::string_view to_string(StopReason r);

struct DebugCommand {
  std::string verb;           // canonical (aliases expanded)
  std::string argument_text;
  CommandCategory category = CommandCategory::Inspect;

  std::string text() const;
  bool operator==(const DebugCommand&) const = default;
};

struct DebuggerOutput {
  std::string raw;             // at most the cap plus a truncation marker
  bool truncated = false;
  std::size_t byte_count = 0;  // bytes produced before capping
  std::optional<StopReason> stop_reason;
  bool timed_out = false;
};

inline constexpr std::size_t kDebuggerOutputCap = 64 * 1024;

// Caps `raw` at `cap` bytes, recording the original size.
DebuggerOutput capped_output(std::string raw, std::size_t cap,
                             std::optional<StopReason> stop = std::nullopt);

struct CommandPolicy {
  // Extra verbs forwarded verbatim (heap-inspection plugins and the like);
  // they require Capability::HeapIntrospection.
  std::set<std::string> passthrough_verbs;
};

// Whitelist check: the verb must be known (after alias expansion), reverse
// verbs need ReverseExec, and the argument text must not contain anything
// that could reach a shell or call process-spawning functions in the
// inferior. Throws Error{RejectedCommand} with the reason.
DebugCommand validate_command(const std::string& text,
                              const std::set<Capability>& capabilities,
                              const CommandPolicy& policy = {});

// ---- Backends --------------------------------------------------------------

struct DebugTarget {
  std::vector<std::string> argv;  // absolute binary path first
  std::optional<std::filesystem::path> stdin_file;
  std::filesystem::path cwd;
  std::vector<std::string> env;   // "KEY=VALUE"
};

DebugTarget debug_target_for(const RepairTask& task, const std::filesystem::path& root);

class DebugBackend {
 public:
  virtual ~DebugBackend() = default;
  virtual std::set<Capability> capabilities() const = 0;
  // Runs (or replays) to the first stop. Throws Error{SessionDead}.
  virtual DebuggerOutput run_to_trap(std::chrono::milliseconds timeout,
                                     std::size_t cap) = 0;
  // Throws Error{SessionDead} when the debugger process is gone.
  virtual DebuggerOutput execute(const DebugCommand& command,
                                 std::chrono::milliseconds timeout,
                                 std::size_t cap) = 0;
};

// GDB over the machine interface. With `replay_trace` set, the session
// attaches to an rr recording instead of launching the target.
struct GdbOptions {
  std::string gdb = "gdb";
  std::string rr = "rr";
  std::optional<std::filesystem::path> replay_trace;
  std::set<std::string> passthrough_verbs;
  std::chrono::milliseconds startup_timeout{30000};
};

std::unique_ptr<DebugBackend> make_gdb_backend(const DebugTarget& target,
                                               const GdbOptions& options);

// Records the target under rr into `cache_dir`, keyed by the binary's
// content hash (plus arguments and PoC), and returns the trace directory. A
// cached trace for the same key is reused. Throws Error{RecordFailure} when
// rr is missing or recording fails.
std::filesystem::path record_trace(const DebugTarget& target,
                                   const std::filesystem::path& cache_dir,
                                   const std::string& rr = "rr",
                                   std::chrono::milliseconds timeout = std::chrono::seconds(120));

// Deterministic backend driven by a JSONL transcript. Records:
//   {"capabilities": ["reverse_exec", ...]}           header, optional
//   {"on": "run", "output": "...", "stop": "sanitizer_trap"}
//   {"match": "<regex>", "output": "...", "stop": "breakpoint",
//    "repeat_output": {"text": "A", "count": 1048576}, "times": 1,
//    "dies": false}
// Commands are matched against the full command text, first match wins;
// records with "times" are consumed. Unmatched commands get a fixed reply.
class FakeDebugger : public DebugBackend {
 public:
  static std::unique_ptr<FakeDebugger> from_jsonl(std::string_view text);
  static std::unique_ptr<FakeDebugger> from_file(const std::filesystem::path& path);

  std::set<Capability> capabilities() const override { return capabilities_; }
  DebuggerOutput run_to_trap(std::chrono::milliseconds timeout, std::size_t cap) override;
  DebuggerOutput execute(const DebugCommand& command, std::chrono::milliseconds timeout,
                         std::size_t cap) override;

  const std::vector<std::string>& received() const { return received_; }

  struct Rule;

 private:
  FakeDebugger() = default;
  std::set<Capability> capabilities_;
  std::vector<std::shared_ptr<Rule>> rules_;
  std::shared_ptr<Rule> run_rule_;
  std::vector<std::string> received_;
  bool dead_ = false;
};

// ---- Session ---------------------------------------------------------------

struct SessionOptions {
  BackendKind backend = BackendKind::Forward;
  CommandPolicy policy;
  std::size_t output_cap = kDebuggerOutputCap;
  std::chrono::milliseconds run_timeout{120000};
  std::chrono::milliseconds command_timeout{30000};
  GdbOptions gdb;
  std::filesystem::path recording_cache;  // replay only
  std::filesystem::path fake_transcript;  // fake only
};

struct CommandLogEntry {
  std::string command;
  std::string output_digest;
  bool operator==(const CommandLogEntry&) const = default;
};

class DebugSession {
 public:
  // Launches the backend for `target`. Throws Error{LaunchFailure} (binary
  // or debugger missing) or Error{RecordFailure} (replay unavailable; the
  // caller may fall back to Forward).
  static DebugSession init(const DebugTarget& target, const SessionOptions& options);
  // Wraps an existing backend (tests, custom integrations).
  DebugSession(std::unique_ptr<DebugBackend> backend, BackendKind kind,
               SessionOptions options);

  BackendKind backend_kind() const { return kind_; }
  SessionState state() const { return state_; }
  const std::set<Capability>& capabilities() const { return capabilities_; }
  const std::vector<CommandLogEntry>& command_log() const { return log_; }
  const SessionOptions& options() const { return options_; }

  // NotStarted -> AtTrap | Exited. On timeout the session ends with
  // stop_reason Exited and timed_out set.
  DebuggerOutput run_to_trap();

  DebugCommand validate(const std::string& text) const;
  // Requires AtTrap or Stopped; throws Error{RejectedCommand} otherwise and
  // Error{SessionDead} when the backend died (state becomes Exited).
  DebuggerOutput execute(const DebugCommand& command);
  DebuggerOutput execute(const std::string& text) { return execute(validate(text)); }

 private:
  std::unique_ptr<DebugBackend> backend_;
  BackendKind kind_;
  SessionOptions options_;
  SessionState state_ = SessionState::NotStarted;
  std::set<Capability> capabilities_;
  std::vector<CommandLogEntry> log_;
};

// Tries the requested backend; a Replay request that fails with
// RecordFailure falls back to Forward. `fell_back` reports that.
DebugSession open_session(const DebugTarget& target, const SessionOptions& options,
                          bool* fell_back = nullptr);

}  // namespace tracefix
