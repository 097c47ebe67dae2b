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

#include "agent_support.hpp"

#include "test_support.hpp"

#include "tracefix/report.hpp"
#include "tracefix/util.hpp"

namespace tracefix::testing {

using nlohmann::json;

std::string action_message(const json& body, const std::string& prose) {
  return prose + "\n```action\n" + body.dump() + "\n```\n";
}

std::string hypothesis(const std::string& text) {
  return action_message({{"kind", "hypothesis"}, {"text", text}});
}

std::string debug(const std::vector<std::string>& commands) {
  return action_message({{"kind", "debug"}, {"commands", commands}});
}

std::string view(const std::string& path, unsigned line, unsigned radius) {
  return action_message({{"kind", "view_source"}, {"path", path}, {"line", line}, {"radius", radius}});
}

std::string script(const std::string& code) {
  return action_message({{"kind", "script"}, {"code", code}});
}

std::string patch_msg(const std::string& diff, const std::string& root_cause) {
  return action_message({{"kind", "patch"}, {"diff", diff}, {"root_cause", root_cause}});
}

std::string conclude(const std::string& why) {
  return action_message({{"kind", "conclude"}, {"rationale", why}});
}

ScriptedBackend scripted(const std::vector<std::string>& messages, double cost_each) {
  std::vector<ScriptedBackend::Message> m;
  for (const auto& s : messages) m.push_back({s, cost_each});
  return ScriptedBackend(std::move(m));
}

std::string hbo_fake_debugger_transcript() {
  auto report = read_file(fixture_path("projects/hbo_basic/ground_truth/report.txt"));
  std::vector<json> lines = {
      {{"capabilities", json::array()}},
      {{"on", "run"}, {"output", report}, {"stop", "sanitizer_trap"}},
      {{"match", "^(bt|backtrace)"},
       {"output",
        "#0  terminate_name (buf=0x502000000010 \"abcdefgh\", len=8) at sources/record.c:17\n"
        "#1  parse_record (line=0x7ffc \"abcdefgh:1\", out=0x7ffc) at sources/record.c:27\n"
        "#2  main () at sources/main.c:12\n"}},
      {{"match", "^frame 1"},
       {"output", "#1  parse_record (line=..., out=...) at sources/record.c:27\n"
                  "27\t  terminate_name(out->name, len);\n"}},
      {{"match", "^print len"}, {"output", "$1 = 8\n"}},
      {{"match", "^print \\(len \\+ 7\\)"}, {"output", "$2 = 8\n"}},
      {{"match", "^info locals"}, {"output", "len = 8\ncolon = 0x7ffc \":1\"\n"}},
  };
  std::string out;
  for (const auto& l : lines) out += l.dump() + "\n";
  return out;
}

PreflightFn reproducing_preflight() {
  return [](const RepairTask& task, const fs::path&) {
    PreflightResult p;
    p.reproduced = true;
    p.run_output = read_file(task.resolve(task.report_path));
    p.observed = parse_report(p.run_output);
    return p;
  };
}

PreflightFn failing_preflight() {
  return [](const RepairTask&, const fs::path&) {
    PreflightResult p;
    p.detail = "PoC exited normally (exit status 0) without a sanitizer report";
    return p;
  };
}

namespace {

// Shares the fake with the test so it can be inspected after the session ends.
class SharedFake : public DebugBackend {
 public:
  explicit SharedFake(std::shared_ptr<FakeDebugger> fake) : fake_(std::move(fake)) {}
  std::set<Capability> capabilities() const override { return fake_->capabilities(); }
  DebuggerOutput run_to_trap(std::chrono::milliseconds t, std::size_t cap) override {
    return fake_->run_to_trap(t, cap);
  }
  DebuggerOutput execute(const DebugCommand& c, std::chrono::milliseconds t,
                         std::size_t cap) override {
    return fake_->execute(c, t, cap);
  }

 private:
  std::shared_ptr<FakeDebugger> fake_;
};

}  // namespace

SessionFactory FakeSessions::factory() {
  return [this](const DebugTarget&, const SessionOptions& options) {
    std::shared_ptr<FakeDebugger> fake = FakeDebugger::from_jsonl(transcript);
    opened.push_back(fake);
    return DebugSession(std::make_unique<SharedFake>(fake), BackendKind::Fake, options);
  };
}

}  // namespace tracefix::testing
