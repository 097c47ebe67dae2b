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

#include "tracefix/validate.hpp"

#include <regex>
#include <set>

#include "tracefix/environment.hpp"
#include "tracefix/error.hpp"
#include "tracefix/process.hpp"
#include "tracefix/util.hpp"

namespace tracefix {

std::string_view to_string(ValidationStatus s) {
  switch (s) {
    case ValidationStatus::Pass: return "Pass";
    case ValidationStatus::CompileFail: return "CompileFail";
    case ValidationStatus::CrashPersists: return "CrashPersists";
    case ValidationStatus::TestsFail: return "TestsFail";
    case ValidationStatus::Timeout: return "Timeout";
  }
  return "Pass";
}

std::optional<ValidationStatus> validation_status_from_string(std::string_view s) {
  for (auto v : {ValidationStatus::Pass, ValidationStatus::CompileFail,
                 ValidationStatus::CrashPersists, ValidationStatus::TestsFail,
                 ValidationStatus::Timeout}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

namespace {

constexpr std::size_t kStageLogCap = 1024 * 1024;

std::string fit(std::string text, std::size_t cap) {
  if (text.size() <= cap) return text;
  static const std::string marker = "\n[... feedback truncated ...]\n";
  if (cap <= marker.size()) return text.substr(0, cap);
  return text.substr(0, cap - marker.size()) + marker;
}

std::string last_lines(std::string_view text, std::size_t n) {
  auto lines = split_lines(text);
  std::size_t from = lines.size() > n ? lines.size() - n : 0;
  std::string out;
  for (std::size_t i = from; i < lines.size(); ++i) out += lines[i] + "\n";
  return out;
}

std::string exit_description(int exit_code, int term_signal) {
  if (term_signal) return "signal " + std::to_string(term_signal);
  return "exit status " + std::to_string(exit_code);
}

// Summary without run-specific noise (addresses, pids, working-copy
// prefixes), so identical failures give identical feedback.
std::string stable_summary(std::string_view log, const SanitizerReport& report,
                           const std::optional<fs::path>& root) {
  std::string line;
  for (const auto& l : split_lines(log)) {
    auto t = trim(l);
    if (starts_with(t, "SUMMARY: ")) line = std::string(t);
  }
  if (line.empty()) line = report.summary_line;
  if (line.empty()) return std::string(display_name(report.vuln_class));
  if (root) {
    auto prefix = root->lexically_normal().string();
    if (!prefix.empty() && prefix.back() != '/') prefix += '/';
    for (std::size_t at; (at = line.find(prefix)) != std::string::npos;) line.erase(at, prefix.size());
  }
  static const std::regex hex("0x[0-9a-fA-F]+");
  return std::regex_replace(line, hex, "0x?");
}

}  // namespace

bool has_sanitizer_report(std::string_view output) {
  static const std::regex header(
      R"((ERROR|SUMMARY): (Address|Leak|Memory|Thread|UndefinedBehavior)Sanitizer|: runtime error: )");
  return std::regex_search(output.begin(), output.end(), header);
}

std::vector<std::string> extract_error_lines(std::string_view build_log) {
  static const std::regex error(R"((\berror\b|undefined reference to))", std::regex::icase);
  std::vector<std::string> out;
  for (const auto& line : split_lines(build_log)) {
    if (std::regex_search(line, error)) out.push_back(line);
  }
  return out;
}

std::vector<std::string> extract_failing_tests(std::string_view output) {
  static const std::vector<std::regex> patterns = {
      std::regex(R"(^\s*FAIL:\s*(\S+))"),
      std::regex(R"(^\[\s+FAILED\s+\]\s+([A-Za-z_][\w/.]*\.[\w/]+))"),
      std::regex(R"(^not ok \d+\s*-?\s*(.+?)\s*(#.*)?$)"),
      std::regex(R"(^\s*\d+/\d+ Test\s+#\d+: (\S+) \.+\*+\s*Failed)"),
      std::regex(R"(^FAILED (\S+))"),
      std::regex(R"(^(\S+ \([\w.]+\)) \.\.\. (FAIL|ERROR))"),
  };
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const auto& line : split_lines(output)) {
    for (const auto& re : patterns) {
      std::smatch m;
      if (std::regex_search(line, m, re)) {
        std::string id = m[1].str();
        if (seen.insert(id).second) ids.push_back(id);
        break;
      }
    }
  }
  return ids;
}

std::string distill_feedback(const ValidationResult& r, std::size_t cap,
                             const std::optional<fs::path>& project_root) {
  std::string out;
  switch (r.status) {
    case ValidationStatus::Pass:
      return {};

    case ValidationStatus::CompileFail: {
      out = "The patched project failed to build (" +
            exit_description(r.exit_code, r.term_signal) + ").\n";
      static const std::regex excerpt(R"(^\s*\d*\s*\|)");
      auto lines = split_lines(r.raw_log);
      std::size_t errors = 0, total_errors = extract_error_lines(r.raw_log).size();
      static const std::regex error(R"((\berror\b|undefined reference to))", std::regex::icase);
      for (std::size_t i = 0; i < lines.size() && errors < kCompileErrorLines; ++i) {
        if (!std::regex_search(lines[i], error)) continue;
        ++errors;
        out += lines[i] + "\n";
        // Source excerpt and caret lines that follow the diagnostic.
        for (std::size_t j = i + 1; j < lines.size() && j <= i + 3; ++j) {
          if (!std::regex_search(lines[j], excerpt)) break;
          out += lines[j] + "\n";
        }
      }
      if (total_errors > kCompileErrorLines) {
        out += "[... " + std::to_string(total_errors - kCompileErrorLines) +
               " more error lines elided ...]\n";
      }
      if (total_errors == 0) out += last_lines(r.raw_log, kCompileErrorLines);
      break;
    }

    case ValidationStatus::CrashPersists: {
      std::optional<SanitizerReport> report;
      try {
        ParseOptions opt;
        opt.project_root = project_root;
        report = parse_report(r.raw_log, opt);
      } catch (const Error&) {
      }
      if (!report) {
        out = "The PoC still terminates abnormally (" +
              exit_description(r.exit_code, r.term_signal) +
              ") without a sanitizer report. Last output:\n" + last_lines(r.raw_log, 10);
        break;
      }
      out = "The PoC still crashes after the patch.\n";
      out += "Summary: " + stable_summary(r.raw_log, *report, project_root) + "\n";
      try {
        out += "Trapping frame: " + render_frame(trapping_frame(*report, project_root)) + "\n";
      } catch (const Error&) {
      }
      auto original = r.original_class;
      if (original && *original != report->vuln_class) {
        out += "The crash class changed from " + std::string(display_name(*original)) + " to " +
               std::string(display_name(report->vuln_class)) +
               ": the patch moved the fault rather than removing it.\n";
      } else {
        out += "Crash class unchanged: " + std::string(display_name(report->vuln_class)) + ".\n";
      }
      break;
    }

    case ValidationStatus::TestsFail: {
      out = "The PoC no longer crashes, but functional tests failed (" +
            exit_description(r.exit_code, r.term_signal) + ").\n";
      auto ids = extract_failing_tests(r.raw_log);
      if (ids.empty()) {
        out += "No test identifiers recognized; last output:\n" + last_lines(r.raw_log, 20);
      } else {
        out += "Failing tests:\n";
        for (const auto& id : ids) out += "- " + id + "\n";
      }
      break;
    }

    case ValidationStatus::Timeout: {
      auto secs = std::chrono::duration_cast<std::chrono::seconds>(r.stage_timeout).count();
      out = "The " + (r.stage.empty() ? std::string("validation") : r.stage) +
            " step timed out after " + std::to_string(secs) + " s.\n";
      if (!r.raw_log.empty()) out += "Last output:\n" + last_lines(r.raw_log, 10);
      break;
    }
  }
  return fit(std::move(out), cap);
}

// ---- Gates -----------------------------------------------------------------

namespace {

struct StageRun {
  ProcessResult result;
  std::string log;
};

StageRun run_stage(ProcessSpec spec) {
  spec.stdout_cap = kStageLogCap;
  spec.stderr_cap = kStageLogCap;
  StageRun s;
  s.result = run_process(spec);
  s.log = s.result.out;
  if (!s.result.err.empty()) {
    if (!s.log.empty() && s.log.back() != '\n') s.log += "\n";
    s.log += s.result.err;
  }
  return s;
}

ProcessSpec shell_stage(const std::string& command, const fs::path& cwd,
                        const std::vector<std::string>& env, std::chrono::milliseconds timeout) {
  auto spec = shell_spec(command);
  spec.cwd = cwd;
  spec.env = env;
  spec.timeout = timeout;
  spec.merge_stderr = true;
  return spec;
}

ProcessSpec poc_stage(const RepairTask& task, const fs::path& wc,
                      const std::vector<std::string>& env, std::chrono::milliseconds timeout) {
  ProcessSpec spec;
  spec.argv = task.target_argv(wc);
  spec.cwd = wc;
  spec.env = env;
  spec.timeout = timeout;
  if (task.poc_delivery == PocDelivery::Stdin) spec.stdin_file = task.poc_path.is_absolute() ? task.poc_path : wc / task.poc_path;
  return spec;
}

void archive(const std::optional<fs::path>& dir, const std::string& name, const std::string& text,
             fs::path* where) {
  if (!dir) return;
  std::error_code ec;
  fs::create_directories(*dir, ec);
  *where = *dir / name;
  write_file_atomic(*where, text);
}

bool crashed(const ProcessResult& r, const std::string& log) {
  return r.term_signal != 0 || has_sanitizer_report(log);
}

}  // namespace

ValidationResult validate(const RepairTask& task, const fs::path& working_copy,
                          const ValidateOptions& options) {
  const fs::path wc = fs::absolute(working_copy).lexically_normal();
  const auto env = hermetic_environment(options.base_env.value_or(current_environment()));
  std::optional<fs::path> logs;
  if (options.log_dir) logs = *options.log_dir / options.label;

  ValidationResult r;
  r.original_class = options.original_class;
  auto fail = [&](ValidationStatus status, const std::string& stage, const StageRun& run,
                  std::chrono::milliseconds timeout) {
    r.status = run.result.timed_out ? ValidationStatus::Timeout : status;
    r.stage = stage;
    r.raw_log = run.log;
    r.exit_code = run.result.exit_code;
    r.term_signal = run.result.term_signal;
    r.stage_timeout = timeout;
    r.feedback = distill_feedback(r, options.feedback_cap, wc);
    if (r.feedback.empty()) r.feedback = std::string(to_string(r.status));
    return r;
  };

  auto build = run_stage(shell_stage(task.build_command, wc, env, options.gates.build));
  archive(logs, "build.log", build.log, &r.build_log_path);
  if (!build.result.ok()) {
    return fail(ValidationStatus::CompileFail, "build", build, options.gates.build);
  }

  auto poc = run_stage(poc_stage(task, wc, env, options.gates.poc));
  archive(logs, "poc.log", poc.log, &r.run_log_path);
  if (poc.result.timed_out || crashed(poc.result, poc.log)) {
    if (!poc.result.timed_out) {
      try {
        ParseOptions opt;
        opt.project_root = wc;
        r.new_class = parse_report(poc.log, opt).vuln_class;
      } catch (const Error&) {
      }
    }
    return fail(ValidationStatus::CrashPersists, "poc", poc, options.gates.poc);
  }

  auto tests = run_stage(shell_stage(task.test_command, wc, env, options.gates.tests));
  archive(logs, "tests.log", tests.log, &r.test_log_path);
  if (!tests.result.ok()) {
    return fail(ValidationStatus::TestsFail, "tests", tests, options.gates.tests);
  }
  r.status = ValidationStatus::Pass;
  return r;
}

ValidationResult CommandValidator::validate(const RepairTask& task, const fs::path& working_copy) {
  ValidateOptions opts = options_;
  opts.label = options_.label + "-" + std::to_string(++calls_);
  return tracefix::validate(task, working_copy, opts);
}

StubValidator::StubValidator(std::vector<ValidationResult> results)
    : results_(results.begin(), results.end()) {
  if (results_.empty()) results_.push_back(ValidationResult{});
}

StubValidator StubValidator::always(ValidationStatus status) {
  ValidationResult r;
  r.status = status;
  return StubValidator({r});
}

ValidationResult StubValidator::validate(const RepairTask&, const fs::path&) {
  ++calls_;
  ValidationResult r = results_.front();
  if (results_.size() > 1) results_.pop_front();
  if (r.status == ValidationStatus::Pass) {
    r.feedback.clear();
  } else if (r.feedback.empty()) {
    r.feedback = distill_feedback(r);
  }
  return r;
}

PreflightResult preflight(const RepairTask& task, const fs::path& working_copy,
                          const ValidateOptions& options) {
  const fs::path wc = fs::absolute(working_copy).lexically_normal();
  const auto env = hermetic_environment(options.base_env.value_or(current_environment()));
  PreflightResult p;
  auto build = run_stage(shell_stage(task.build_command, wc, env, options.gates.build));
  if (!build.result.ok()) {
    p.detail = "build failed (" +
               (build.result.timed_out ? std::string("timed out")
                                       : exit_description(build.result.exit_code,
                                                          build.result.term_signal)) +
               "): " + last_lines(build.log, 20);
    return p;
  }
  auto poc = run_stage(poc_stage(task, wc, env, options.gates.poc));
  p.run_output = poc.log;
  if (poc.result.timed_out) {
    p.detail = "PoC run timed out";
    return p;
  }
  if (!crashed(poc.result, poc.log)) {
    p.detail = "PoC exited normally (" +
               exit_description(poc.result.exit_code, poc.result.term_signal) +
               ") without a sanitizer report";
    return p;
  }
  p.reproduced = true;
  try {
    ParseOptions opt;
    opt.project_root = wc;
    p.observed = parse_report(poc.log, opt);
  } catch (const Error&) {
  }
  return p;
}

}  // namespace tracefix
