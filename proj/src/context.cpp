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

#include "tracefix/context.hpp"

#include <stdlib.h>

#include <csignal>
#include <json.hpp>

#include "tracefix/error.hpp"
#include "tracefix/process.hpp"
#include "tracefix/util.hpp"

namespace tracefix {

using nlohmann::json;

std::string_view to_string(ActionKind k) {
  switch (k) {
    case ActionKind::Hypothesis: return "hypothesis";
    case ActionKind::ViewSource: return "view_source";
    case ActionKind::Debug: return "debug";
    case ActionKind::Script: return "script";
    case ActionKind::Patch: return "patch";
    case ActionKind::Conclude: return "conclude";
  }
  return "hypothesis";
}

namespace {

struct FencedBlock {
  std::string body;
  bool terminated = false;
};

std::vector<FencedBlock> envelope_blocks(std::string_view text) {
  std::vector<FencedBlock> blocks;
  auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto t = trim(lines[i]);
    if (!starts_with(t, "```") || trim(t.substr(3)) != kEnvelopeFence) continue;
    FencedBlock block;
    std::size_t j = i + 1;
    for (; j < lines.size(); ++j) {
      if (trim(lines[j]) == "```") {
        block.terminated = true;
        break;
      }
      block.body += lines[j];
      block.body += '\n';
    }
    blocks.push_back(std::move(block));
    i = j;
  }
  return blocks;
}

std::string required_string(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw std::invalid_argument(std::string("field '") + key + "' must be a string");
  }
  auto s = j[key].get<std::string>();
  if (trim(s).empty()) {
    throw std::invalid_argument(std::string("field '") + key + "' must not be empty");
  }
  return s;
}

std::optional<unsigned> optional_positive(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_number_integer() || j[key].get<long long>() < 1) {
    throw std::invalid_argument(std::string("field '") + key +
                                "' must be a positive integer");
  }
  return j[key].get<unsigned>();
}

ActionEnvelope envelope_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("envelope body must be a JSON object");
  auto kind = required_string(j, "kind");
  ActionEnvelope e;
  if (kind == "hypothesis") {
    e.payload = HypothesisAction{required_string(j, "text")};
  } else if (kind == "view_source") {
    ViewSourceAction v;
    if (j.contains("symbol")) {
      v.symbol = required_string(j, "symbol");
    } else {
      v.path = required_string(j, "path");
    }
    if (v.symbol.empty() && !j.contains("line")) {
      throw std::invalid_argument("field 'line' is required with 'path'");
    }
    v.line = optional_positive(j, "line").value_or(1);
    v.radius = optional_positive(j, "radius");
    e.payload = v;
  } else if (kind == "debug") {
    DebugAction d;
    if (j.contains("commands") && j["commands"].is_array()) {
      for (const auto& c : j["commands"]) {
        if (!c.is_string()) throw std::invalid_argument("commands must be strings");
        d.commands.push_back(c.get<std::string>());
      }
    } else if (j.contains("command") && j["command"].is_string()) {
      d.commands.push_back(j["command"].get<std::string>());
    }
    if (d.commands.empty()) {
      throw std::invalid_argument("field 'commands' must be a non-empty list of strings");
    }
    e.payload = d;
  } else if (kind == "script") {
    ScriptAction s;
    s.code = required_string(j, "code");
    if (j.contains("target")) s.target = required_string(j, "target");
    e.payload = s;
  } else if (kind == "patch") {
    PatchAction p;
    p.diff = required_string(j, "diff");
    p.root_cause = j.contains("root_cause") ? required_string(j, "root_cause") : "";
    e.payload = p;
  } else if (kind == "conclude") {
    e.payload = ConcludeAction{required_string(j, "rationale")};
  } else {
    throw std::invalid_argument("unknown action kind '" + kind +
                                "' (expected hypothesis, view_source, debug, "
                                "script, patch or conclude)");
  }
  return e;
}

json envelope_to_json(const ActionEnvelope& e) {
  json j;
  j["kind"] = std::string(to_string(e.kind()));
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, HypothesisAction>) {
          j["text"] = p.text;
        } else if constexpr (std::is_same_v<T, ViewSourceAction>) {
          if (!p.symbol.empty()) j["symbol"] = p.symbol;
          if (!p.path.empty()) j["path"] = p.path;
          j["line"] = p.line;
          if (p.radius) j["radius"] = *p.radius;
        } else if constexpr (std::is_same_v<T, DebugAction>) {
          j["commands"] = p.commands;
        } else if constexpr (std::is_same_v<T, ScriptAction>) {
          j["code"] = p.code;
          j["target"] = p.target;
        } else if constexpr (std::is_same_v<T, PatchAction>) {
          j["diff"] = p.diff;
          if (!p.root_cause.empty()) j["root_cause"] = p.root_cause;
        } else {
          j["rationale"] = p.rationale;
        }
      },
      e.payload);
  return j;
}

}  // namespace

ParsedAction parse_action(std::string_view assistant_text) {
  auto blocks = envelope_blocks(assistant_text);
  if (blocks.empty()) {
    throw Error(ErrorCode::ProtocolError,
                "no action envelope found: reply with exactly one ```action block");
  }
  std::optional<std::string> first_problem;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    std::string problem;
    if (!blocks[i].terminated) {
      problem = "envelope is missing its closing ```";
    } else {
      try {
        ParsedAction parsed{envelope_from_json(json::parse(blocks[i].body)),
                            blocks.size() - 1};
        return parsed;
      } catch (const json::exception& e) {
        problem = std::string("envelope body is not valid JSON: ") + e.what();
      } catch (const std::invalid_argument& e) {
        problem = e.what();
      }
    }
    if (!first_problem) first_problem = problem;
  }
  throw Error(ErrorCode::ProtocolError, "malformed action envelope: " + *first_problem);
}

std::string render_action(const ActionEnvelope& envelope) {
  return "```" + std::string(kEnvelopeFence) + "\n" + envelope_to_json(envelope).dump() +
         "\n```\n";
}

void AgentContext::append(ChatTurn turn) {
  char_estimate_ += turn.content.size();
  turns_.push_back(std::move(turn));
}

void AgentContext::add_note(std::string note) { notes_.push_back(std::move(note)); }

void AgentContext::mark_hypothesis() { hypothesis_stated_ = true; }

// ---- Sandbox ---------------------------------------------------------------

namespace {

constexpr int kViolationExit = 97;

// Installed before the agent's code runs: every open outside the scratch dir
// and the interpreter's library, any write, and any process/network/ctypes
// event terminates the interpreter with kViolationExit. The hook keeps its
// state in a closure and the prelude's globals are deleted, so the script
// cannot reach or relax it. The seccomp filter backs this up at the kernel.
constexpr const char* kPrelude = R"PY(
import os, sys
def _install(scratch, script):
    allowed = tuple(sorted({os.path.realpath(scratch)} |
                           {os.path.realpath(p) for p in sys.path if p} |
                           {os.path.realpath(os.path.dirname(os.__file__))}))
    blocked = ('socket.', 'subprocess.', 'os.system', 'os.exec', 'os.spawn',
               'os.fork', 'os.forkpty', 'os.posix_spawn', 'os.kill', 'os.killpg',
               'ctypes.', 'os.remove', 'os.rename', 'os.rmdir', 'os.mkdir',
               'os.chmod', 'os.chown', 'os.truncate', 'os.symlink', 'os.link',
               'os.unlink', 'os.putenv', 'os.chdir', 'shutil.', 'pty.', 'winreg.',
               'urllib.', 'http.', 'ftplib.', 'smtplib.', 'telnetlib.', 'webbrowser.')
    wflags = os.O_WRONLY | os.O_RDWR | os.O_CREAT | os.O_TRUNC | os.O_APPEND
    write, exit_ = os.write, os._exit
    realpath, fsdecode, sep = os.path.realpath, os.fsdecode, os.sep
    def deny(what):
        write(2, ('sandbox violation: %s\n' % (what,)).encode('utf-8', 'replace'))
        exit_(97)
    def guard(event, args):
        if event == 'open':
            path, mode, flags = args
            if isinstance(path, int):
                return
            if isinstance(mode, str) and any(c in mode for c in 'wax+'):
                deny('write access to %r' % (path,))
            if isinstance(flags, int) and flags & wflags:
                deny('write access to %r' % (path,))
            real = realpath(fsdecode(path))
            if not any(real == a or real.startswith(a + sep) for a in allowed):
                deny('read outside the sandbox: %r' % (path,))
        elif event.startswith(blocked):
            deny(event)
    with open(script, encoding='utf-8', errors='replace') as f:
        source = f.read()
    code = compile(source, 'summary.py', 'exec')
    sys.argv = ['summary.py']
    sys.addaudithook(guard)
    return code
_code = _install(sys.argv[1], sys.argv[2])
_globals = {'__name__': '__main__', '__builtins__': __builtins__}
del _install
exec(_code, _globals)
)PY";

std::string stderr_tail(const std::string& err) {
  constexpr std::size_t kTail = 1024;
  std::string tail = err.size() > kTail ? "..." + err.substr(err.size() - kTail) : err;
  return std::string(trim(sanitize_utf8(tail)));
}

class ScratchDir {
 public:
  ScratchDir() {
    std::string tmpl = (fs::temp_directory_path() / "tracefix-sandbox-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) {
      throw Error(ErrorCode::Io, "cannot create sandbox scratch directory");
    }
    path_ = tmpl;
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

}  // namespace

std::string run_summary_script(const std::string& script_text,
                               const std::string& stdin_data,
                               const SandboxLimits& limits) {
  if (script_text.size() > limits.max_script_bytes) {
    throw Error(ErrorCode::SandboxViolation,
                "script is " + std::to_string(script_text.size()) + " bytes; limit is " +
                    std::to_string(limits.max_script_bytes));
  }
  auto interpreter = find_executable(limits.interpreter);
  if (!interpreter) {
    throw Error(ErrorCode::NonZeroExit,
                "script interpreter '" + limits.interpreter + "' not found");
  }
  ScratchDir scratch;
  auto script_path = scratch.path() / "summary.py";
  write_file_atomic(script_path, script_text);

  ProcessSpec spec;
  spec.argv = {interpreter->string(), "-I", "-S", "-B", "-c", kPrelude,
               scratch.path().string(), script_path.string()};
  spec.cwd = scratch.path();
  spec.env = std::vector<std::string>{"PATH=/usr/bin:/bin", "LANG=C.UTF-8",
                                      "PYTHONIOENCODING=utf-8", "HOME=" + scratch.path().string()};
  spec.stdin_data = stdin_data;
  spec.timeout = limits.wall_timeout;
  spec.stdout_cap = limits.stdout_cap;
  spec.stderr_cap = 16 * 1024;
  spec.limits.cpu_seconds = limits.cpu_seconds;
  spec.limits.address_space_bytes = limits.memory_bytes;
  spec.limits.file_size_bytes = 0;
  spec.limits.confine = true;

  auto r = run_process(spec);
  if (r.timed_out || r.term_signal == SIGXCPU || r.term_signal == SIGKILL) {
    throw Error(ErrorCode::Timeout, "script exceeded its time limit (" +
                                        std::to_string(limits.cpu_seconds) + " s CPU)");
  }
  if (r.term_signal == SIGSYS || (r.term_signal == 0 && r.exit_code == kViolationExit)) {
    std::string why = r.term_signal == SIGSYS ? "forbidden system call" : stderr_tail(r.err);
    throw Error(ErrorCode::SandboxViolation, "script violated the sandbox: " + why);
  }
  if (r.term_signal == 0 && r.exit_code != 0 && contains(r.err, "MemoryError")) {
    throw Error(ErrorCode::SandboxViolation, "script exceeded the memory limit");
  }
  if (r.exec_failed || r.term_signal != 0 || r.exit_code != 0) {
    std::string status = r.term_signal ? "signal " + std::to_string(r.term_signal)
                                       : "exit " + std::to_string(r.exit_code);
    throw Error(ErrorCode::NonZeroExit, "script failed (" + status + "): " + stderr_tail(r.err));
  }
  std::string out = sanitize_utf8(r.out);
  if (r.out_bytes > r.out.size()) {
    out += "\n[... stdout truncated: " + std::to_string(r.out_bytes - r.out.size()) +
           " of " + std::to_string(r.out_bytes) + " bytes dropped ...]";
  }
  return out;
}

// ---- Distillation ----------------------------------------------------------

std::string truncate_head_tail(std::string_view text, std::size_t cap, double head_fraction) {
  if (text.size() <= cap) return std::string(text);
  auto marker_for = [&](std::size_t dropped) {
    return "\n[... " + std::to_string(dropped) + " of " + std::to_string(text.size()) +
           " bytes elided ...]\n";
  };
  // Reserve room for the widest marker this input can produce.
  std::size_t reserve = marker_for(text.size()).size();
  std::size_t keep = cap > reserve ? cap - reserve : 0;
  std::size_t head = static_cast<std::size_t>(static_cast<double>(keep) * head_fraction);
  std::size_t tail = keep - head;
  std::string out = sanitize_utf8(text.substr(0, head));
  out += marker_for(text.size() - head - tail);
  out += sanitize_utf8(text.substr(text.size() - tail));
  // A split UTF-8 sequence can widen by the replacement character; trim back.
  while (out.size() > cap && tail > 0) {
    --tail;
    out = sanitize_utf8(text.substr(0, head)) + marker_for(text.size() - head - tail) +
          sanitize_utf8(text.substr(text.size() - tail));
  }
  return out;
}

DistillResult distill_output(std::string_view raw_output,
                             const std::optional<std::string>& script,
                             const DistillOptions& options) {
  DistillResult result;
  if (script) {
    try {
      auto out = run_summary_script(*script, std::string(raw_output), options.sandbox);
      result.summary = truncate_head_tail(out, options.inline_cap, options.head_fraction);
      return result;
    } catch (const Error& e) {
      result.script_failed = true;
      std::string note = "[summary script failed (" + std::string(to_string(e.code())) +
                         "): " + e.what() + "; showing truncated raw output]\n";
      result.summary = cap_bytes(note, 512);
      if (result.summary.back() != '\n') result.summary += '\n';
    }
  }
  result.summary += truncate_head_tail(raw_output, options.inline_cap, options.head_fraction);
  return result;
}

std::string distill(AgentContext& ctx, std::string_view raw_output,
                    const std::optional<std::string>& script, const DistillOptions& options) {
  auto result = distill_output(raw_output, script, options);
  if (result.script_failed) ctx.add_note("summary script failed; truncation fallback used");
  ctx.append(make_turn(Role::Tool, result.summary));
  return result.summary;
}

}  // namespace tracefix
