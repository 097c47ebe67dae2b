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

#include "tracefix/debugger.hpp"

#include <signal.h>

#include <map>
#include <regex>
#include <thread>

#include <json.hpp>

#include "tracefix/environment.hpp"
#include "tracefix/error.hpp"
#include "tracefix/mi.hpp"
#include "tracefix/process.hpp"
#include "tracefix/util.hpp"

namespace tracefix {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string_view to_string(BackendKind k) {
  switch (k) {
    case BackendKind::Forward: return "forward";
    case BackendKind::Replay: return "replay";
    case BackendKind::Fake: return "fake";
  }
  return "forward";
}

std::string_view to_string(SessionState s) {
  switch (s) {
    case SessionState::NotStarted: return "NotStarted";
    case SessionState::AtTrap: return "AtTrap";
    case SessionState::Stopped: return "Stopped";
    case SessionState::Running: return "Running";
    case SessionState::Exited: return "Exited";
  }
  return "NotStarted";
}

std::string_view to_string(Capability c) {
  switch (c) {
    case Capability::ReverseExec: return "reverse_exec";
    case Capability::HeapIntrospection: return "heap_introspection";
  }
  return "reverse_exec";
}

std::string_view to_string(CommandCategory c) {
  switch (c) {
    case CommandCategory::Inspect: return "inspect";
    case CommandCategory::Breakpoint: return "breakpoint";
    case CommandCategory::Control: return "control";
    case CommandCategory::Reverse: return "reverse";
    case CommandCategory::Passthrough: return "passthrough";
  }
  return "inspect";
}

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::Breakpoint: return "breakpoint";
    case StopReason::Watchpoint: return "watchpoint";
    case StopReason::Signal: return "signal";
    case StopReason::SanitizerTrap: return "sanitizer_trap";
    case StopReason::Exited: return "exited";
  }
  return "exited";
}

namespace {

std::optional<StopReason> stop_reason_from_string(std::string_view s) {
  for (auto r : {StopReason::Breakpoint, StopReason::Watchpoint, StopReason::Signal,
                 StopReason::SanitizerTrap, StopReason::Exited}) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

std::optional<Capability> capability_from_string(std::string_view s) {
  for (auto c : {Capability::ReverseExec, Capability::HeapIntrospection}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

}  // namespace

std::string DebugCommand::text() const {
  if (argument_text.empty()) return verb;
  if (argument_text.front() == '/') return verb + argument_text;
  return verb + " " + argument_text;
}

DebuggerOutput capped_output(std::string raw, std::size_t cap,
                             std::optional<StopReason> stop) {
  DebuggerOutput out;
  out.byte_count = raw.size();
  out.stop_reason = stop;
  if (raw.size() > cap) {
    out.truncated = true;
    raw.resize(cap);
    raw += "\n[... debugger output truncated: " + std::to_string(out.byte_count) +
           " bytes total ...]\n";
  }
  out.raw = std::move(raw);
  return out;
}

// ---- Command validation ----------------------------------------------------

namespace {

struct VerbInfo {
  std::string_view canonical;
  CommandCategory category;
};

const std::map<std::string_view, VerbInfo>& verb_table() {
  using C = CommandCategory;
  static const std::map<std::string_view, VerbInfo> table = {
      {"break", {"break", C::Breakpoint}},
      {"b", {"break", C::Breakpoint}},
      {"tbreak", {"tbreak", C::Breakpoint}},
      {"watch", {"watch", C::Breakpoint}},
      {"rwatch", {"rwatch", C::Breakpoint}},
      {"awatch", {"awatch", C::Breakpoint}},
      {"delete", {"delete", C::Breakpoint}},
      {"info", {"info", C::Inspect}},
      {"print", {"print", C::Inspect}},
      {"p", {"print", C::Inspect}},
      {"x", {"x", C::Inspect}},
      {"backtrace", {"backtrace", C::Inspect}},
      {"bt", {"backtrace", C::Inspect}},
      {"frame", {"frame", C::Inspect}},
      {"up", {"up", C::Inspect}},
      {"down", {"down", C::Inspect}},
      {"list", {"list", C::Inspect}},
      {"disassemble", {"disassemble", C::Inspect}},
      {"display", {"display", C::Inspect}},
      {"continue", {"continue", C::Control}},
      {"c", {"continue", C::Control}},
      {"step", {"step", C::Control}},
      {"s", {"step", C::Control}},
      {"next", {"next", C::Control}},
      {"n", {"next", C::Control}},
      {"finish", {"finish", C::Control}},
      {"until", {"until", C::Control}},
      {"reverse-continue", {"reverse-continue", C::Reverse}},
      {"reverse-step", {"reverse-step", C::Reverse}},
      {"reverse-next", {"reverse-next", C::Reverse}},
      {"reverse-finish", {"reverse-finish", C::Reverse}},
  };
  return table;
}

// Verbs whose "/fmt" suffix is legal.
bool takes_format(std::string_view verb) {
  return verb == "print" || verb == "x" || verb == "display" || verb == "disassemble";
}

[[noreturn]] void reject(const std::string& text, const std::string& why) {
  throw Error(ErrorCode::RejectedCommand, "rejected '" + text + "': " + why);
}

// Things that would let a command reach a host shell or make the inferior
// spawn processes.
void check_arguments(const std::string& text, std::string_view args) {
  static const std::regex spawn_call(
      R"(\b(system|popen|execl|execlp|execle|execv|execvp|execvpe|execve|fexecve|fork|vfork|clone|clone3|posix_spawn|posix_spawnp|dlopen|dlmopen|__libc_system|_IO_popen|syscall)\s*\()");
  static const std::regex fnptr_call(R"(\(\s*\*\s*\)\s*\()");
  static const std::regex apply(R"(^\s*apply\b)");
  std::string a(args);
  if (contains(a, "$(")) reject(text, "shell substitution is not allowed");
  if (contains(a, "$_shell")) reject(text, "$_shell is not allowed");
  if (std::regex_search(a, spawn_call)) {
    reject(text, "calling process-spawning functions in the inferior is not allowed");
  }
  if (std::regex_search(a, fnptr_call)) {
    reject(text, "calls through function-pointer casts are not allowed");
  }
  if (std::regex_search(a, apply)) {
    reject(text, "'apply' runs arbitrary commands and is not allowed");
  }
}

}  // namespace

DebugCommand validate_command(const std::string& text,
                              const std::set<Capability>& capabilities,
                              const CommandPolicy& policy) {
  std::string_view t = trim(text);
  if (t.empty()) reject(text, "empty command");
  for (unsigned char c : t) {
    if ((c < 0x20 && c != '\t') || c == 0x7f) {
      reject(text, "control characters and newlines are not allowed");
    }
    if (c == '`') reject(text, "backticks are not allowed");
  }

  std::size_t end = 0;
  while (end < t.size() && t[end] != ' ' && t[end] != '\t') ++end;
  std::string_view word = t.substr(0, end);
  std::string_view rest = trim(t.substr(end));

  std::string_view verb = word;
  std::string format;
  if (auto slash = word.find('/'); slash != std::string_view::npos && slash > 0) {
    verb = word.substr(0, slash);
    format = std::string(word.substr(slash));
  }

  DebugCommand cmd;
  const auto& table = verb_table();
  if (auto it = table.find(verb); it != table.end()) {
    cmd.verb = std::string(it->second.canonical);
    cmd.category = it->second.category;
  } else if (format.empty() && policy.passthrough_verbs.count(std::string(verb))) {
    cmd.verb = std::string(verb);
    cmd.category = CommandCategory::Passthrough;
  } else {
    reject(text, "verb '" + std::string(verb) + "' is not whitelisted");
  }

  if (!format.empty()) {
    static const std::regex fmt(R"(/[0-9a-zA-Z]+)");
    if (!takes_format(cmd.verb) || !std::regex_match(format, fmt)) {
      reject(text, "invalid format suffix '" + format + "'");
    }
  }

  if (cmd.category == CommandCategory::Reverse &&
      !capabilities.count(Capability::ReverseExec)) {
    reject(text,
           "reverse execution requires the reverse_exec capability (replay backend)");
  }
  if (cmd.category == CommandCategory::Passthrough &&
      !capabilities.count(Capability::HeapIntrospection)) {
    reject(text, "passthrough verbs require the heap_introspection capability");
  }

  check_arguments(text, rest);
  if (!format.empty()) {
    cmd.argument_text = rest.empty() ? format : format + " " + std::string(rest);
  } else {
    cmd.argument_text = std::string(rest);
  }
  return cmd;
}

// ---- Target ----------------------------------------------------------------

DebugTarget debug_target_for(const RepairTask& task, const fs::path& root) {
  DebugTarget t;
  fs::path abs_root = fs::absolute(root).lexically_normal();
  t.argv = task.target_argv(abs_root);
  if (task.poc_delivery == PocDelivery::Stdin) {
    fs::path poc = task.poc_path.is_absolute() ? task.poc_path : abs_root / task.poc_path;
    t.stdin_file = poc;
  }
  t.cwd = abs_root;
  t.env = hermetic_environment(/*under_debugger=*/true);
  return t;
}

// ---- GDB/MI backend --------------------------------------------------------

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

// Accumulates output up to a cap while counting everything.
struct CappedText {
  std::size_t cap;
  std::string data;
  std::size_t total = 0;
  bool saw_sanitizer = false;

  void add(std::string_view s) {
    total += s.size();
    if (data.size() < cap) data.append(s.substr(0, cap - data.size()));
    if (contains(s, "Sanitizer") || contains(s, "runtime error:")) saw_sanitizer = true;
  }
};

class GdbBackend : public DebugBackend {
 public:
  GdbBackend(const DebugTarget& target, const GdbOptions& options)
      : target_(target), options_(options) {
    std::vector<std::string> argv;
    if (options.replay_trace) {
      argv = {options.rr, "replay", "--debugger", options.gdb,
              options.replay_trace->string(), "--", "--nx", "--quiet",
              "--interpreter=mi2"};
      caps_.insert(Capability::ReverseExec);
    } else {
      argv = {options.gdb, "--nx", "--quiet", "--interpreter=mi2", "--args"};
      argv.insert(argv.end(), target.argv.begin(), target.argv.end());
    }
    if (!options.passthrough_verbs.empty()) caps_.insert(Capability::HeapIntrospection);
    proc_ = Subprocess::spawn(argv, target.env, target.cwd);

    auto deadline = Clock::now() + options.startup_timeout;
    for (;;) {
      auto r = proc_.read_line(deadline);
      if (r.status == Subprocess::ReadStatus::Eof) {
        throw Error(ErrorCode::LaunchFailure, "debugger exited during startup");
      }
      if (r.status == Subprocess::ReadStatus::Timeout) {
        throw Error(ErrorCode::LaunchFailure, "debugger did not become ready");
      }
      if (mi::parse_record(r.line).type == mi::RecordType::Prompt) break;
    }
    for (const char* setup : {"-gdb-set mi-async on", "-gdb-set pagination off",
                              "-gdb-set confirm off", "-gdb-set width 0",
                              "-gdb-set height 0"}) {
      mi_command(setup, std::chrono::seconds(10));
    }
    auto bp = mi_command("-break-insert -f __sanitizer::Die", std::chrono::seconds(10));
    if (bp.klass == "done" && bp.results.contains("bkpt")) {
      trap_breakpoint_ = bp.results["bkpt"].value("number", "");
    }
  }

  ~GdbBackend() override {
    if (proc_.running()) {
      proc_.write("-gdb-exit\n");
      auto deadline = Clock::now() + std::chrono::milliseconds(1000);
      while (proc_.read_line(deadline).status == Subprocess::ReadStatus::Line) {
      }
    }
    if (inferior_pid_ > 0) ::kill(inferior_pid_, SIGKILL);
    proc_.terminate();
  }

  std::set<Capability> capabilities() const override { return caps_; }

  DebuggerOutput run_to_trap(std::chrono::milliseconds timeout, std::size_t cap) override {
    std::string cmd = "continue";
    if (!options_.replay_trace) {
      cmd = "run";
      if (target_.stdin_file) cmd += " < " + shell_quote(target_.stdin_file->string());
    }
    auto out = console(cmd, timeout, cap);
    if (out.timed_out) {
      // Nothing useful can be done with a target that never trapped.
      if (inferior_pid_ > 0) ::kill(inferior_pid_, SIGKILL);
      out.stop_reason = StopReason::Exited;
      out.raw += "\n[run timed out after " + std::to_string(timeout.count()) + " ms]\n";
    }
    return out;
  }

  DebuggerOutput execute(const DebugCommand& command, std::chrono::milliseconds timeout,
                         std::size_t cap) override {
    return console(command.text(), timeout, cap);
  }

 private:
  unsigned long send(const std::string& mi_line) {
    unsigned long token = next_token_++;
    if (!proc_.write(std::to_string(token) + mi_line + "\n")) {
      throw Error(ErrorCode::SessionDead, "debugger stdin closed");
    }
    return token;
  }

  // Handles one record; returns it for inspection.
  mi::Record pump(Clock::time_point deadline, CappedText* text, bool* timed_out) {
    auto r = proc_.read_line(deadline);
    if (r.status == Subprocess::ReadStatus::Eof) {
      throw Error(ErrorCode::SessionDead, "debugger process exited");
    }
    if (r.status == Subprocess::ReadStatus::Timeout) {
      *timed_out = true;
      return {};
    }
    auto rec = mi::parse_record(r.line);
    switch (rec.type) {
      case mi::RecordType::Console:
      case mi::RecordType::Target:
        if (text) text->add(rec.text);
        break;
      case mi::RecordType::Log:
        if (text && rec.text != last_echo_) text->add(rec.text);
        break;
      case mi::RecordType::Other:
        if (text) {
          text->add(r.line);
          text->add("\n");
        }
        break;
      case mi::RecordType::Notify:
        if (rec.klass == "thread-group-started" && rec.results.contains("pid")) {
          inferior_pid_ = std::atoi(rec.results.value("pid", "0").c_str());
        }
        if (rec.klass == "thread-group-exited") inferior_pid_ = 0;
        break;
      default:
        break;
    }
    return rec;
  }

  mi::Record mi_command(const std::string& line, std::chrono::milliseconds timeout) {
    auto token = send(line);
    auto deadline = Clock::now() + timeout;
    for (;;) {
      bool timed_out = false;
      auto rec = pump(deadline, nullptr, &timed_out);
      if (timed_out) throw Error(ErrorCode::SessionDead, "no reply to " + line);
      if (rec.type == mi::RecordType::Result && rec.token == token) return rec;
    }
  }

  std::optional<StopReason> classify_stop(const json& stopped, const CappedText& text) {
    std::string reason = stopped.value("reason", "");
    if (starts_with(reason, "exited")) return StopReason::Exited;
    if (reason == "breakpoint-hit") {
      if (!trap_breakpoint_.empty() && stopped.value("bkptno", "") == trap_breakpoint_) {
        return StopReason::SanitizerTrap;
      }
      return StopReason::Breakpoint;
    }
    if (contains(reason, "watchpoint")) return StopReason::Watchpoint;
    if (reason == "signal-received") {
      if (stopped.value("signal-name", "") == "SIGABRT" && text.saw_sanitizer) {
        return StopReason::SanitizerTrap;
      }
      return StopReason::Signal;
    }
    return std::nullopt;  // stepping, finish, interrupt, end of history
  }

  DebuggerOutput console(const std::string& command, std::chrono::milliseconds timeout,
                         std::size_t cap) {
    CappedText text;
    text.cap = cap;
    last_echo_ = command + "\n";
    auto token = send("-interpreter-exec console " + mi::quote(command));
    auto deadline = Clock::now() + timeout;
    bool timed_out = false;
    std::optional<mi::Record> result;
    std::optional<json> stopped;

    while (!result) {
      auto rec = pump(deadline, &text, &timed_out);
      if (timed_out) break;
      if (rec.type == mi::RecordType::Result && rec.token == token) result = rec;
      if (rec.type == mi::RecordType::Exec && rec.klass == "stopped") stopped = rec.results;
    }
    if (result && result->klass == "error") {
      std::string msg = result->results.value("msg", "");
      if (!contains(text.data, msg)) text.add(msg + "\n");
    }
    if (result && result->klass == "running") {
      while (!stopped && !timed_out) {
        auto rec = pump(deadline, &text, &timed_out);
        if (rec.type == mi::RecordType::Exec && rec.klass == "stopped") stopped = rec.results;
      }
      if (timed_out) {
        // -exec-interrupt signals the whole process group, which without a
        // terminal includes the debugger itself; signal the inferior only.
        if (inferior_pid_ > 0) ::kill(inferior_pid_, SIGINT);
        auto grace = Clock::now() + std::chrono::seconds(5);
        bool late = false;
        while (!stopped && !late) {
          auto rec = pump(grace, &text, &late);
          if (rec.type == mi::RecordType::Exec && rec.klass == "stopped") stopped = rec.results;
        }
      }
    }
    // Stop notifications are followed by a prompt; collect what precedes it.
    if (stopped) {
      auto settle = Clock::now() + std::chrono::milliseconds(200);
      bool quiet = false;
      while (!quiet) {
        auto rec = pump(settle, &text, &quiet);
        if (rec.type == mi::RecordType::Prompt) break;
      }
    }
    auto stop = stopped ? classify_stop(*stopped, text) : std::nullopt;
    auto out = capped_output(std::move(text.data), cap, stop);
    out.byte_count = text.total;
    out.truncated = text.total > cap;
    if (out.truncated && !contains(out.raw, "debugger output truncated")) {
      out.raw += "\n[... debugger output truncated: " + std::to_string(text.total) +
                 " bytes total ...]\n";
    }
    out.timed_out = timed_out;
    return out;
  }

  DebugTarget target_;
  GdbOptions options_;
  Subprocess proc_;
  std::set<Capability> caps_;
  unsigned long next_token_ = 1;
  std::string trap_breakpoint_;
  std::string last_echo_;
  int inferior_pid_ = 0;
};

}  // namespace

std::unique_ptr<DebugBackend> make_gdb_backend(const DebugTarget& target,
                                               const GdbOptions& options) {
  return std::make_unique<GdbBackend>(target, options);
}

// ---- rr recordings ---------------------------------------------------------

fs::path record_trace(const DebugTarget& target, const fs::path& cache_dir,
                      const std::string& rr, std::chrono::milliseconds timeout) {
  if (!find_executable(rr)) {
    throw Error(ErrorCode::RecordFailure, "rr is not installed");
  }
  if (target.argv.empty()) throw Error(ErrorCode::RecordFailure, "empty target");
  auto binary = try_read_file(target.argv.front());
  if (!binary) throw Error(ErrorCode::RecordFailure, "cannot read " + target.argv.front());

  std::string key_material = fnv1a_hex(*binary);
  for (std::size_t i = 1; i < target.argv.size(); ++i) key_material += std::string(1, '\0') + target.argv[i];
  if (target.stdin_file) key_material += try_read_file(*target.stdin_file).value_or("");
  fs::path dir = cache_dir / fnv1a_hex(key_material);
  fs::path trace = dir / "trace";
  if (fs::exists(dir / "complete")) return trace;

  std::error_code ec;
  fs::remove_all(dir, ec);
  fs::create_directories(dir, ec);
  ProcessSpec spec;
  spec.argv = {rr, "record", "-o", trace.string()};
  spec.argv.insert(spec.argv.end(), target.argv.begin(), target.argv.end());
  spec.cwd = target.cwd;
  spec.env = target.env;
  spec.stdin_file = target.stdin_file;
  spec.timeout = timeout;
  spec.stderr_cap = 64 * 1024;
  spec.stdout_cap = 64 * 1024;
  auto res = run_process(spec);
  // The recorded program is expected to crash; only a missing trace counts
  // as a recording failure.
  if (res.exec_failed || res.timed_out || !fs::is_directory(trace)) {
    std::string tail = res.err.size() > 2048 ? res.err.substr(res.err.size() - 2048) : res.err;
    throw Error(ErrorCode::RecordFailure, "rr record failed: " + tail);
  }
  write_file_atomic(dir / "complete", "");
  return trace;
}

// ---- Fake backend ----------------------------------------------------------

struct FakeDebugger::Rule {
  std::string pattern;
  std::regex match;
  std::string output;
  std::optional<StopReason> stop;
  std::optional<unsigned> times;
  bool dies = false;
};

namespace {

std::string rule_output(const json& rec, std::size_t line_no) {
  std::string out = rec.value("output", "");
  if (rec.contains("repeat_output")) {
    const auto& r = rec["repeat_output"];
    if (!r.is_object() || !r.contains("text") || !r.contains("count")) {
      throw Error(ErrorCode::InvalidConfig, "fake debugger transcript line " +
                                                std::to_string(line_no) +
                                                ": repeat_output needs text and count");
    }
    std::string unit = r["text"].get<std::string>();
    std::size_t count = r["count"].get<std::size_t>();
    out.reserve(out.size() + unit.size() * count);
    for (std::size_t i = 0; i < count; ++i) out += unit;
  }
  return out;
}

}  // namespace

std::unique_ptr<FakeDebugger> FakeDebugger::from_jsonl(std::string_view text) {
  std::unique_ptr<FakeDebugger> fake(new FakeDebugger());
  std::size_t line_no = 0;
  for (const auto& line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto bad = [&](const std::string& why) {
      return Error(ErrorCode::InvalidConfig, "fake debugger transcript line " +
                                                 std::to_string(line_no) + ": " + why);
    };
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw bad(e.what());
    }
    if (!rec.is_object()) throw bad("expected an object");
    try {
      if (rec.contains("capabilities")) {
        for (const auto& c : rec["capabilities"]) {
          auto cap = capability_from_string(c.get<std::string>());
          if (!cap) throw bad("unknown capability " + c.dump());
          fake->capabilities_.insert(*cap);
        }
        continue;
      }
      auto rule = std::make_shared<Rule>();
      rule->output = rule_output(rec, line_no);
      if (rec.contains("stop") && !rec["stop"].is_null()) {
        rule->stop = stop_reason_from_string(rec["stop"].get<std::string>());
        if (!rule->stop) throw bad("unknown stop reason " + rec["stop"].dump());
      }
      if (rec.contains("times")) rule->times = rec["times"].get<unsigned>();
      rule->dies = rec.value("dies", false);
      if (rec.value("on", "") == "run") {
        fake->run_rule_ = rule;
        continue;
      }
      if (!rec.contains("match")) throw bad("record needs \"match\" or \"on\"");
      rule->pattern = rec["match"].get<std::string>();
      try {
        rule->match = std::regex(rule->pattern);
      } catch (const std::regex_error& e) {
        throw bad("invalid regex: " + std::string(e.what()));
      }
      fake->rules_.push_back(rule);
    } catch (const json::exception& e) {
      throw bad(e.what());
    }
  }
  return fake;
}

std::unique_ptr<FakeDebugger> FakeDebugger::from_file(const fs::path& path) {
  auto text = try_read_file(path);
  if (!text) {
    throw Error(ErrorCode::LaunchFailure, "cannot read fake debugger transcript " +
                                              path.string());
  }
  return from_jsonl(*text);
}

DebuggerOutput FakeDebugger::run_to_trap(std::chrono::milliseconds, std::size_t cap) {
  if (dead_) throw Error(ErrorCode::SessionDead, "fake debugger is dead");
  received_.push_back("run");
  if (!run_rule_) return capped_output("[Inferior 1 exited normally]\n", cap, StopReason::Exited);
  return capped_output(run_rule_->output, cap, run_rule_->stop);
}

DebuggerOutput FakeDebugger::execute(const DebugCommand& command, std::chrono::milliseconds,
                                     std::size_t cap) {
  if (dead_) throw Error(ErrorCode::SessionDead, "fake debugger is dead");
  std::string text = command.text();
  received_.push_back(text);
  for (auto& rule : rules_) {
    if (rule->times && *rule->times == 0) continue;
    if (!std::regex_search(text, rule->match)) continue;
    if (rule->times) --*rule->times;
    if (rule->dies) {
      dead_ = true;
      throw Error(ErrorCode::SessionDead, "fake debugger died on '" + text + "'");
    }
    return capped_output(rule->output, cap, rule->stop);
  }
  return capped_output("[fake debugger] no scripted response for: " + text + "\n", cap);
}

// ---- Session ---------------------------------------------------------------

DebugSession::DebugSession(std::unique_ptr<DebugBackend> backend, BackendKind kind,
                           SessionOptions options)
    : backend_(std::move(backend)), kind_(kind), options_(std::move(options)) {
  capabilities_ = backend_->capabilities();
}

DebugSession DebugSession::init(const DebugTarget& target, const SessionOptions& options) {
  if (options.backend == BackendKind::Fake) {
    return DebugSession(FakeDebugger::from_file(options.fake_transcript), BackendKind::Fake,
                        options);
  }
  if (target.argv.empty()) throw Error(ErrorCode::LaunchFailure, "no target binary");
  std::error_code ec;
  const fs::path binary = target.argv.front();
  if (!fs::is_regular_file(binary, ec) ||
      (fs::status(binary, ec).permissions() & fs::perms::owner_exec) == fs::perms::none) {
    throw Error(ErrorCode::LaunchFailure, "target is not an executable file: " +
                                              binary.string());
  }
  GdbOptions gdb = options.gdb;
  gdb.passthrough_verbs = options.policy.passthrough_verbs;
  if (options.backend == BackendKind::Replay) {
    if (!find_executable(gdb.rr)) throw Error(ErrorCode::RecordFailure, "rr is not installed");
    gdb.replay_trace = record_trace(target, options.recording_cache, gdb.rr, options.run_timeout);
  }
  if (!find_executable(gdb.gdb)) {
    throw Error(ErrorCode::LaunchFailure, "debugger not found: " + gdb.gdb);
  }
  return DebugSession(make_gdb_backend(target, gdb), options.backend, options);
}

namespace {

SessionState state_after(std::optional<StopReason> stop, SessionState current,
                         CommandCategory category) {
  if (!stop) {
    if (category == CommandCategory::Control || category == CommandCategory::Reverse) {
      return SessionState::Stopped;
    }
    return current;
  }
  switch (*stop) {
    case StopReason::Exited: return SessionState::Exited;
    case StopReason::SanitizerTrap:
    case StopReason::Signal: return SessionState::AtTrap;
    case StopReason::Breakpoint:
    case StopReason::Watchpoint: return SessionState::Stopped;
  }
  return current;
}

}  // namespace

DebuggerOutput DebugSession::run_to_trap() {
  if (state_ != SessionState::NotStarted) {
    throw Error(ErrorCode::RejectedCommand, "run_to_trap: session already started");
  }
  state_ = SessionState::Running;
  DebuggerOutput out;
  try {
    out = backend_->run_to_trap(options_.run_timeout, options_.output_cap);
  } catch (const Error& e) {
    state_ = SessionState::Exited;
    throw;
  }
  if (out.timed_out) out.stop_reason = StopReason::Exited;
  state_ = out.stop_reason ? state_after(out.stop_reason, state_, CommandCategory::Control)
                           : SessionState::Stopped;
  log_.push_back({"run", fnv1a_hex(out.raw)});
  return out;
}

DebugCommand DebugSession::validate(const std::string& text) const {
  return validate_command(text, capabilities_, options_.policy);
}

DebuggerOutput DebugSession::execute(const DebugCommand& command) {
  if (state_ != SessionState::AtTrap && state_ != SessionState::Stopped) {
    throw Error(ErrorCode::RejectedCommand,
                "rejected '" + command.text() + "': session is not stopped (state " +
                    std::string(to_string(state_)) + ")");
  }
  // Commands built by hand get the same scrutiny as parsed ones.
  validate(command.text());
  DebuggerOutput out;
  try {
    out = backend_->execute(command, options_.command_timeout, options_.output_cap);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SessionDead) state_ = SessionState::Exited;
    throw;
  }
  state_ = state_after(out.stop_reason, state_, command.category);
  log_.push_back({command.text(), fnv1a_hex(out.raw)});
  return out;
}

DebugSession open_session(const DebugTarget& target, const SessionOptions& options,
                          bool* fell_back) {
  if (fell_back) *fell_back = false;
  try {
    return DebugSession::init(target, options);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::RecordFailure || options.backend != BackendKind::Replay) throw;
    if (fell_back) *fell_back = true;
    SessionOptions forward = options;
    forward.backend = BackendKind::Forward;
    return DebugSession::init(target, forward);
  }
}

}  // namespace tracefix
