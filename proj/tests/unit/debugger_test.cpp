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

#include <random>

#include "test_support.hpp"
#include "tracefix/debugger.hpp"
#include "tracefix/error.hpp"
#include "tracefix/mi.hpp"
#include "tracefix/process.hpp"
#include "tracefix/task.hpp"
#include "tracefix/util.hpp"

namespace tracefix {
namespace {

using testing::TempDir;
using testing::write_text;

std::string rejection(const std::string& text, const std::set<Capability>& caps = {},
                      const CommandPolicy& policy = {}) {
  try {
    validate_command(text, caps, policy);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RejectedCommand);
    return e.what();
  }
  return {};
}

// ---- MI parsing ------------------------------------------------------------

TEST(MiRecord, ConsoleStreamUnescapes) {
  auto r = mi::parse_record(R"(~"Breakpoint 1, \"x\"\tat a.c:3\n")");
  EXPECT_EQ(r.type, mi::RecordType::Console);
  EXPECT_EQ(r.text, "Breakpoint 1, \"x\"\tat a.c:3\n");
}

TEST(MiRecord, OctalEscape) {
  auto r = mi::parse_record(R"(~"\033[0m\101")");
  EXPECT_EQ(r.text, "\x1b[0mA");
}

TEST(MiRecord, ResultWithTuple) {
  auto r = mi::parse_record(
      R"(7^done,bkpt={number="1",type="breakpoint",addr="<PENDING>",pending="__sanitizer::Die",times="0"})");
  EXPECT_EQ(r.type, mi::RecordType::Result);
  ASSERT_TRUE(r.token);
  EXPECT_EQ(*r.token, 7u);
  EXPECT_EQ(r.klass, "done");
  EXPECT_EQ(r.results["bkpt"]["number"], "1");
  EXPECT_EQ(r.results["bkpt"]["pending"], "__sanitizer::Die");
}

TEST(MiRecord, StoppedWithFrameAndArgs) {
  auto r = mi::parse_record(
      R"(*stopped,reason="breakpoint-hit",disp="keep",bkptno="2",frame={addr="0x1",func="f",args=[{name="x",value="1"},{name="y",value="[2]"}],file="a.c",line="4"},thread-id="1",stopped-threads="all")");
  EXPECT_EQ(r.type, mi::RecordType::Exec);
  EXPECT_EQ(r.klass, "stopped");
  EXPECT_EQ(r.results["reason"], "breakpoint-hit");
  EXPECT_EQ(r.results["frame"]["args"].size(), 2u);
  EXPECT_EQ(r.results["frame"]["args"][1]["value"], "[2]");
  EXPECT_EQ(r.results["frame"]["line"], "4");
}

TEST(MiRecord, ListOfResults) {
  auto r = mi::parse_record(R"(^done,stack=[frame={level="0"},frame={level="1"}])");
  ASSERT_EQ(r.type, mi::RecordType::Result);
  ASSERT_EQ(r.results["stack"].size(), 2u);
  EXPECT_EQ(r.results["stack"][1]["frame"]["level"], "1");
}

TEST(MiRecord, PromptAndInferiorOutput) {
  EXPECT_EQ(mi::parse_record("(gdb) ").type, mi::RecordType::Prompt);
  auto r = mi::parse_record("==123==ERROR: AddressSanitizer: heap-use-after-free");
  EXPECT_EQ(r.type, mi::RecordType::Other);
  EXPECT_EQ(r.text, "==123==ERROR: AddressSanitizer: heap-use-after-free");
  EXPECT_EQ(mi::parse_record("^done,x=").type, mi::RecordType::Other);
  EXPECT_EQ(mi::parse_record("~\"unterminated").type, mi::RecordType::Other);
}

TEST(MiRecord, QuoteRoundTrip) {
  std::mt19937 rng(11);
  for (int i = 0; i < 300; ++i) {
    std::string s;
    int len = rng() % 40;
    for (int k = 0; k < len; ++k) s += static_cast<char>(1 + rng() % 126);
    auto q = mi::quote(s);
    std::size_t pos = 0;
    auto back = mi::parse_c_string(q, pos);
    ASSERT_TRUE(back);
    EXPECT_EQ(*back, s);
    EXPECT_EQ(pos, q.size());
  }
}

// ---- Command validation ----------------------------------------------------

TEST(ValidateCommand, WhitelistCategories) {
  const std::set<Capability> all = {Capability::ReverseExec, Capability::HeapIntrospection};
  struct Case {
    const char* text;
    const char* verb;
    CommandCategory category;
  };
  const Case cases[] = {
      {"break table.c:40", "break", CommandCategory::Breakpoint},
      {"tbreak main", "tbreak", CommandCategory::Breakpoint},
      {"watch x", "watch", CommandCategory::Breakpoint},
      {"rwatch x", "rwatch", CommandCategory::Breakpoint},
      {"awatch x", "awatch", CommandCategory::Breakpoint},
      {"delete 2", "delete", CommandCategory::Breakpoint},
      {"info locals", "info", CommandCategory::Inspect},
      {"print e->label", "print", CommandCategory::Inspect},
      {"x/8xb ptr", "x", CommandCategory::Inspect},
      {"backtrace full", "backtrace", CommandCategory::Inspect},
      {"bt", "backtrace", CommandCategory::Inspect},
      {"frame 3", "frame", CommandCategory::Inspect},
      {"up", "up", CommandCategory::Inspect},
      {"down 2", "down", CommandCategory::Inspect},
      {"list table.c:30", "list", CommandCategory::Inspect},
      {"disassemble /r", "disassemble", CommandCategory::Inspect},
      {"display i", "display", CommandCategory::Inspect},
      {"continue", "continue", CommandCategory::Control},
      {"step", "step", CommandCategory::Control},
      {"next 3", "next", CommandCategory::Control},
      {"finish", "finish", CommandCategory::Control},
      {"until 50", "until", CommandCategory::Control},
      {"reverse-continue", "reverse-continue", CommandCategory::Reverse},
      {"reverse-step", "reverse-step", CommandCategory::Reverse},
      {"reverse-next", "reverse-next", CommandCategory::Reverse},
      {"reverse-finish", "reverse-finish", CommandCategory::Reverse},
      {"p 1", "print", CommandCategory::Inspect},
      {"c", "continue", CommandCategory::Control},
      {"s", "step", CommandCategory::Control},
      {"n", "next", CommandCategory::Control},
      {"b main", "break", CommandCategory::Breakpoint},
  };
  for (const auto& c : cases) {
    auto cmd = validate_command(c.text, all);
    EXPECT_EQ(cmd.verb, c.verb) << c.text;
    EXPECT_EQ(cmd.category, c.category) << c.text;
  }
}

TEST(ValidateCommand, SimplePrint) {
  auto cmd = validate_command("print 1+1", {});
  EXPECT_EQ(cmd.verb, "print");
  EXPECT_EQ(cmd.argument_text, "1+1");
  EXPECT_EQ(cmd.text(), "print 1+1");
}

TEST(ValidateCommand, ShellIsRejected) {
  EXPECT_NE(rejection("shell rm -rf /"), "");
  EXPECT_NE(rejection("!rm -rf /"), "");
  EXPECT_NE(rejection("| bt | sh"), "");
  EXPECT_NE(rejection("pipe bt | sh"), "");
  EXPECT_NE(rejection("python import os"), "");
  EXPECT_NE(rejection("source /tmp/x.gdb"), "");
  EXPECT_NE(rejection("run"), "");
  EXPECT_NE(rejection("call abort()"), "");
}

TEST(ValidateCommand, LocationWatchIsBreakpoint) {
  auto cmd = validate_command("watch -l *(mrb_value*)0x7fffdeadbeef", {});
  EXPECT_EQ(cmd.category, CommandCategory::Breakpoint);
  EXPECT_EQ(cmd.argument_text, "-l *(mrb_value*)0x7fffdeadbeef");
}

TEST(ValidateCommand, ReverseNeedsCapability) {
  auto why = rejection("reverse-step");
  EXPECT_NE(why.find("reverse"), std::string::npos) << why;
  EXPECT_NE(why.find("capability"), std::string::npos) << why;
  EXPECT_NO_THROW(validate_command("reverse-step", {Capability::ReverseExec}));
}

TEST(ValidateCommand, PassthroughVerbs) {
  CommandPolicy policy;
  policy.passthrough_verbs = {"heap"};
  EXPECT_NE(rejection("heap chunks", {}, policy), "");
  auto cmd = validate_command("heap chunks", {Capability::HeapIntrospection}, policy);
  EXPECT_EQ(cmd.category, CommandCategory::Passthrough);
  EXPECT_NE(rejection("bins", {Capability::HeapIntrospection}, policy), "");
}

TEST(ValidateCommand, FormatSuffixes) {
  auto cmd = validate_command("x/16xb buf", {});
  EXPECT_EQ(cmd.text(), "x/16xb buf");
  EXPECT_EQ(validate_command("p/x 255", {}).text(), "print/x 255");
  EXPECT_NE(rejection("frame/x 1"), "");
  EXPECT_NE(rejection("x/1;2 buf"), "");
}

TEST(ValidateCommand, InferiorSpawnsAreRejected) {
  EXPECT_NE(rejection("print system(\"id\")"), "");
  EXPECT_NE(rejection("print (int)popen (\"id\", \"r\")"), "");
  EXPECT_NE(rejection("break f if execve(0,0,0)"), "");
  EXPECT_NE(rejection("print ((int(*)(char*))0x7ffff7e1d290)(\"id\")"), "");
  EXPECT_NE(rejection("print $_shell(\"id\")"), "");
  EXPECT_NE(rejection("frame apply all shell id"), "");
  EXPECT_NE(rejection("print 1\nshell id"), "");
  EXPECT_NE(rejection("print `id`"), "");
  EXPECT_NE(rejection("print $(id)"), "");
  EXPECT_NE(rejection(""), "");
  // Names that merely contain a spawning function's name are fine.
  EXPECT_NO_THROW(validate_command("print my_system_state", {}));
  EXPECT_NO_THROW(validate_command("break fork_child_slot", {}));
}

// ---- Fuzzed injections against a live debugger ----------------------------

std::vector<std::string> injection_corpus(std::size_t n) {
  const std::vector<std::string> verbs = {"print", "p",    "x",        "info", "list",
                                          "break", "frame", "display", "bt",   "watch",
                                          "shell", "!",     "|",       "pipe", "echo"};
  const std::vector<std::string> payloads = {
      "; touch CANARY",        "| touch CANARY",          "`touch CANARY`",
      "$(touch CANARY)",       "\ntouch CANARY",          "system(\"touch CANARY\")",
      " && touch CANARY",      "apply all shell touch CANARY",
      "((int(*)(const char*))system)(\"touch CANARY\")",
      "$_shell(\"touch CANARY\")", "popen(\"touch CANARY\",\"r\")",
      "\r\nshell touch CANARY", "|| touch CANARY",         "> CANARY",
      "main",                   "1+1",                     "counter"};
  std::mt19937 rng(2024);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string cmd = verbs[rng() % verbs.size()];
    std::string arg = payloads[rng() % payloads.size()];
    switch (rng() % 3) {
      case 0: cmd += " " + arg; break;
      case 1: cmd += " counter " + arg; break;
      default: cmd += arg; break;
    }
    out.push_back(cmd);
  }
  return out;
}

TEST(ValidateCommand, AcceptedInjectionsNeverReachAShell) {
  if (!testing::have_tool("gdb") || !testing::have_tool("cc")) {
    GTEST_SKIP() << "needs gdb and cc";
  }
  TempDir dir("inject");
  auto prog = testing::compile_c(dir.path(),
                                 "#include <stdlib.h>\n"
                                 "#include <signal.h>\n"
                                 "int counter = 1;\n"
                                 "int main(void) { counter += system(0) ? 1 : 0;\n"
                                 "  raise(SIGSEGV); return counter; }\n");
  DebugTarget target{{prog.string()}, std::nullopt, dir.path(), current_environment()};
  SessionOptions opts;
  opts.command_timeout = std::chrono::seconds(10);
  auto session = DebugSession::init(target, opts);
  auto first = session.run_to_trap();
  ASSERT_EQ(session.state(), SessionState::AtTrap) << first.raw;

  std::size_t accepted = 0, rejected = 0;
  for (const auto& text : injection_corpus(400)) {
    DebugCommand cmd;
    try {
      cmd = session.validate(text);
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), ErrorCode::RejectedCommand);
      ++rejected;
      continue;
    }
    ++accepted;
    // Only inspection is exercised here; control verbs would end the run.
    if (cmd.category != CommandCategory::Inspect &&
        cmd.category != CommandCategory::Breakpoint) {
      continue;
    }
    session.execute(cmd);
    ASSERT_FALSE(fs::exists(dir / "CANARY")) << "command reached a shell: " << text;
  }
  EXPECT_GT(accepted, 20u);
  EXPECT_GT(rejected, 100u);
  EXPECT_FALSE(fs::exists(dir / "CANARY"));
}

// ---- Fake backend and session state ---------------------------------------

const char* kFakeTranscript = R"({"capabilities": ["heap_introspection"]}
{"on": "run", "output": "==1==ERROR: AddressSanitizer: heap-use-after-free\n", "stop": "sanitizer_trap"}
{"match": "^print 1\\+1$", "output": "$1 = 2\n"}
{"match": "^backtrace", "output": "#0 last_label () at table.c:46\n#1 main () at main.c:21\n"}
{"match": "^print big", "repeat_output": {"text": "0123456789abcdef", "count": 655360}}
{"match": "^next$", "output": "47\t}\n", "times": 1}
{"match": "^next$", "dies": true}
{"match": "^continue$", "output": "[Inferior 1 (process 7) exited normally]\n", "stop": "exited"}
)";

DebugSession fake_session(const char* transcript = kFakeTranscript) {
  return DebugSession(FakeDebugger::from_jsonl(transcript), BackendKind::Fake, {});
}

TEST(FakeDebugger, PrintAndTrap) {
  auto session = fake_session();
  EXPECT_EQ(session.state(), SessionState::NotStarted);
  EXPECT_TRUE(session.capabilities().count(Capability::HeapIntrospection));
  auto run = session.run_to_trap();
  EXPECT_EQ(run.stop_reason, StopReason::SanitizerTrap);
  EXPECT_EQ(session.state(), SessionState::AtTrap);
  auto out = session.execute("print 1+1");
  EXPECT_NE(out.raw.find("2"), std::string::npos);
  EXPECT_FALSE(out.truncated);
  auto bt = session.execute("bt");
  EXPECT_NE(bt.raw.find("last_label"), std::string::npos);
}

TEST(FakeDebugger, CommandsBeforeRunAreRejected) {
  auto session = fake_session();
  try {
    session.execute("print 1+1");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RejectedCommand);
  }
}

TEST(FakeDebugger, LargeOutputIsCapped) {
  auto session = fake_session();
  session.run_to_trap();
  auto out = session.execute("print big");
  EXPECT_TRUE(out.truncated);
  EXPECT_EQ(out.byte_count, 10u * 1024 * 1024);
  EXPECT_LE(out.raw.size(), kDebuggerOutputCap + 128);
  EXPECT_EQ(out.raw.substr(0, 16), "0123456789abcdef");
}

TEST(FakeDebugger, ExitEndsSession) {
  auto session = fake_session();
  session.run_to_trap();
  auto out = session.execute("continue");
  EXPECT_EQ(out.stop_reason, StopReason::Exited);
  EXPECT_EQ(session.state(), SessionState::Exited);
  EXPECT_THROW(session.execute("bt"), Error);
}

TEST(FakeDebugger, SteppingThenDeath) {
  auto session = fake_session();
  session.run_to_trap();
  auto step = session.execute("next");
  EXPECT_EQ(step.raw, "47\t}\n");
  EXPECT_EQ(session.state(), SessionState::Stopped);
  try {
    session.execute("next");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SessionDead);
  }
  EXPECT_EQ(session.state(), SessionState::Exited);
}

TEST(FakeDebugger, CommandLogRecordsDigests) {
  auto session = fake_session();
  session.run_to_trap();
  auto out = session.execute("p 1+1");
  ASSERT_EQ(session.command_log().size(), 2u);
  EXPECT_EQ(session.command_log()[0].command, "run");
  EXPECT_EQ(session.command_log()[1].command, "print 1+1");
  EXPECT_EQ(session.command_log()[1].output_digest, fnv1a_hex(out.raw));
}

TEST(FakeDebugger, UnmatchedCommandGetsFixedReply) {
  auto session = fake_session();
  session.run_to_trap();
  auto out = session.execute("info registers");
  EXPECT_NE(out.raw.find("no scripted response"), std::string::npos);
}

TEST(FakeDebugger, ReverseRejectedWithoutCapability) {
  auto session = fake_session();
  session.run_to_trap();
  try {
    session.execute("reverse-continue");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RejectedCommand);
    EXPECT_NE(std::string(e.what()).find("reverse"), std::string::npos);
  }
}

TEST(FakeDebugger, MalformedTranscriptNamesLine) {
  try {
    FakeDebugger::from_jsonl("{\"match\": \"x\"}\n{oops\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(FakeDebugger, DeterministicAcrossRuns) {
  auto run = [] {
    auto s = fake_session();
    std::string all = s.run_to_trap().raw;
    for (const char* c : {"bt", "print 1+1", "info frame", "next"}) all += s.execute(c).raw;
    return all;
  };
  EXPECT_EQ(run(), run());
}

// ---- Replay gating ---------------------------------------------------------

TEST(Replay, MissingRrIsRecordFailure) {
  TempDir dir("rr-missing");
  write_text(dir / "bin", "#!/bin/sh\nexit 0\n");
  fs::permissions(dir / "bin", fs::perms::owner_all);
  DebugTarget target{{(dir / "bin").string()}, std::nullopt, dir.path(), {}};
  SessionOptions opts;
  opts.backend = BackendKind::Replay;
  opts.gdb.rr = "/nonexistent/rr";
  opts.recording_cache = dir / "cache";
  try {
    DebugSession::init(target, opts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RecordFailure);
  }
}

TEST(Replay, FallsBackToForward) {
  if (!testing::have_tool("gdb") || !testing::have_tool("cc")) GTEST_SKIP();
  TempDir dir("rr-fallback");
  auto prog = testing::compile_c(dir.path(), "int main(void) { return 0; }\n");
  DebugTarget target{{prog.string()}, std::nullopt, dir.path(), current_environment()};
  SessionOptions opts;
  opts.backend = BackendKind::Replay;
  opts.gdb.rr = "/nonexistent/rr";
  opts.recording_cache = dir / "cache";
  bool fell_back = false;
  auto session = open_session(target, opts, &fell_back);
  EXPECT_TRUE(fell_back);
  EXPECT_EQ(session.backend_kind(), BackendKind::Forward);
  EXPECT_FALSE(session.capabilities().count(Capability::ReverseExec));
}

TEST(Replay, RecordingsAreCachedPerBinaryHash) {
  TempDir dir("rr-cache");
  // Stand-in recorder: creates the trace directory and counts invocations.
  write_text(dir / "rr",
             "#!/bin/sh\n"
             "echo x >> \"" + (dir / "calls").string() + "\"\n"
             "[ \"$1\" = record ] && [ \"$2\" = -o ] && mkdir -p \"$3\" && exit 1\n"
             "exit 2\n");
  fs::permissions(dir / "rr", fs::perms::owner_all);
  write_text(dir / "bin", "binary v1");
  DebugTarget target{{(dir / "bin").string()}, std::nullopt, dir.path(), current_environment()};
  auto count_calls = [&] { return split_lines(read_file(dir / "calls")).size(); };

  auto t1 = record_trace(target, dir / "cache", (dir / "rr").string());
  auto t2 = record_trace(target, dir / "cache", (dir / "rr").string());
  EXPECT_EQ(t1, t2);
  EXPECT_EQ(count_calls(), 1u);
  write_text(dir / "bin", "binary v2");
  auto t3 = record_trace(target, dir / "cache", (dir / "rr").string());
  EXPECT_NE(t3, t1);
  EXPECT_EQ(count_calls(), 2u);
}

TEST(Replay, FailedRecordingIsRecordFailure) {
  TempDir dir("rr-fail");
  write_text(dir / "rr", "#!/bin/sh\necho 'rr: perf counters unavailable' >&2\nexit 1\n");
  fs::permissions(dir / "rr", fs::perms::owner_all);
  write_text(dir / "bin", "x");
  DebugTarget target{{(dir / "bin").string()}, std::nullopt, dir.path(), {}};
  try {
    record_trace(target, dir / "cache", (dir / "rr").string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RecordFailure);
    EXPECT_NE(std::string(e.what()).find("perf counters"), std::string::npos);
  }
}

// ---- Forward backend against real programs ---------------------------------

TEST(GdbSession, MissingBinaryIsLaunchFailure) {
  DebugTarget target{{"/nonexistent/app"}, std::nullopt, "/", {}};
  try {
    DebugSession::init(target, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LaunchFailure);
  }
}

TEST(GdbSession, SignalStopsAtTrap) {
  if (!testing::have_tool("gdb") || !testing::have_tool("cc")) GTEST_SKIP();
  TempDir dir("gdb-sig");
  auto prog = testing::compile_c(dir.path(),
                                 "int *volatile p = 0;\n"
                                 "int bump(int x) { return x + 1; }\n"
                                 "int main(void) { int a = bump(41);\n"
                                 "  *p = a;\n"
                                 "  return 0; }\n");
  DebugTarget target{{prog.string()}, std::nullopt, dir.path(), current_environment()};
  auto session = DebugSession::init(target, {});
  auto run = session.run_to_trap();
  EXPECT_EQ(run.stop_reason, StopReason::Signal) << run.raw;
  EXPECT_EQ(session.state(), SessionState::AtTrap);
  EXPECT_NE(run.raw.find("SIGSEGV"), std::string::npos) << run.raw;
  EXPECT_NE(session.execute("print 1+1").raw.find("2"), std::string::npos);
  EXPECT_NE(session.execute("print a").raw.find("42"), std::string::npos);
  auto bt = session.execute("bt");
  EXPECT_NE(bt.raw.find("main"), std::string::npos) << bt.raw;
  auto bad = session.execute("print no_such_symbol");
  EXPECT_NE(bad.raw.find("No symbol"), std::string::npos) << bad.raw;
  auto cont = session.execute("continue");
  EXPECT_EQ(cont.stop_reason, StopReason::Exited) << cont.raw;
  EXPECT_EQ(session.state(), SessionState::Exited);
}

TEST(GdbSession, RunTimeoutEndsSession) {
  if (!testing::have_tool("gdb") || !testing::have_tool("cc")) GTEST_SKIP();
  TempDir dir("gdb-spin");
  auto prog = testing::compile_c(dir.path(),
                                 "int main(void) { volatile int x = 0; for (;;) ++x; }\n");
  DebugTarget target{{prog.string()}, std::nullopt, dir.path(), current_environment()};
  SessionOptions opts;
  opts.run_timeout = std::chrono::milliseconds(1500);
  auto session = DebugSession::init(target, opts);
  auto start = std::chrono::steady_clock::now();
  auto run = session.run_to_trap();
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(10));
  EXPECT_TRUE(run.timed_out);
  EXPECT_EQ(run.stop_reason, StopReason::Exited);
  EXPECT_NE(run.raw.find("timed out"), std::string::npos);
  EXPECT_EQ(session.state(), SessionState::Exited);
}

TEST(GdbSession, BreakpointAndStepAfterStop) {
  if (!testing::have_tool("gdb") || !testing::have_tool("cc")) GTEST_SKIP();
  TempDir dir("gdb-bp");
  auto prog = testing::compile_c(dir.path(),
                                 "#include <signal.h>\n"
                                 "int hits = 0;\n"
                                 "void tick(void) { ++hits; }\n"
                                 "int main(void) {\n"
                                 "  raise(SIGTRAP);\n"
                                 "  tick();\n"
                                 "  tick();\n"
                                 "  return hits; }\n");
  DebugTarget target{{prog.string()}, std::nullopt, dir.path(), current_environment()};
  auto session = DebugSession::init(target, {});
  auto run = session.run_to_trap();
  ASSERT_EQ(run.stop_reason, StopReason::Signal) << run.raw;
  session.execute("break tick");
  auto hit = session.execute("continue");
  EXPECT_EQ(hit.stop_reason, StopReason::Breakpoint) << hit.raw;
  EXPECT_EQ(session.state(), SessionState::Stopped);
  session.execute("watch hits");
  auto w = session.execute("continue");
  EXPECT_EQ(w.stop_reason, StopReason::Watchpoint) << w.raw;
  auto fin = session.execute("finish");
  EXPECT_EQ(session.state(), SessionState::Stopped) << fin.raw;
}

TEST(GdbSession, SanitizerTrapOnFixtureProject) {
  if (!testing::have_tool("gdb") || !testing::have_asan_toolchain()) GTEST_SKIP();
  TempDir dir("gdb-uaf");
  std::string log;
  ASSERT_TRUE(testing::build_fixture_project("uaf_basic", dir.path(), &log)) << log;
  auto task = load_task_manifest(dir / "task.json");
  auto target = debug_target_for(task, dir.path());
  auto session = DebugSession::init(target, {});
  auto run = session.run_to_trap();
  EXPECT_EQ(run.stop_reason, StopReason::SanitizerTrap) << run.raw;
  EXPECT_EQ(session.state(), SessionState::AtTrap);
  EXPECT_NE(run.raw.find("heap-use-after-free"), std::string::npos) << run.raw;
  auto bt = session.execute("backtrace");
  EXPECT_NE(bt.raw.find("#1"), std::string::npos) << bt.raw;
  EXPECT_NE(bt.raw.find("last_label"), std::string::npos) << bt.raw;
  EXPECT_NE(session.execute("print 1+1").raw.find("2"), std::string::npos);
}

TEST(GdbSession, BenignInputExits) {
  if (!testing::have_tool("gdb") || !testing::have_asan_toolchain()) GTEST_SKIP();
  TempDir dir("gdb-benign");
  ASSERT_TRUE(testing::build_fixture_project("uaf_basic", dir.path()));
  auto task = load_task_manifest(dir / "task.json");
  task.poc_path = "poc/benign.txt";
  auto session = DebugSession::init(debug_target_for(task, dir.path()), {});
  auto run = session.run_to_trap();
  EXPECT_EQ(run.stop_reason, StopReason::Exited) << run.raw;
  EXPECT_EQ(session.state(), SessionState::Exited);
}

}  // namespace
}  // namespace tracefix
