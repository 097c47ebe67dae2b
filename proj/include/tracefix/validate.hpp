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
#include <optional>
#include <string>
#include <vector>

#include "tracefix/report.hpp"
#include "tracefix/task.hpp"

namespace tracefix {

enum class ValidationStatus { Pass, CompileFail, CrashPersists, TestsFail, Timeout };

std::string_view to_string(ValidationStatus s);
std::optional<ValidationStatus> validation_status_from_string(std::string_view s);

struct ValidationResult {
  ValidationStatus status = ValidationStatus::Pass;
  std::string feedback;  // empty iff Pass
  std::filesystem::path build_log_path;
  std::filesystem::path run_log_path;
  std::filesystem::path test_log_path;

  // Material for distillation; not part of the archived result.
  std::string stage;        // "build", "poc" or "tests" for failures
  std::string raw_log;      // output of the failing stage (capped)
  int exit_code = 0;
  int term_signal = 0;
  std::chrono::milliseconds stage_timeout{0};
  std::optional<VulnClass> original_class;
  std::optional<VulnClass> new_class;
};

struct ValidationGates {
  std::chrono::milliseconds build{600000};
  std::chrono::milliseconds poc{120000};
  std::chrono::milliseconds tests{600000};
};

inline constexpr std::size_t kFeedbackCap = 6 * 1024;
inline constexpr std::size_t kCompileErrorLines = 20;

struct ValidateOptions {
  ValidationGates gates;
  std::size_t feedback_cap = kFeedbackCap;
  // Crash class of the original report, for class-change notes.
  std::optional<VulnClass> original_class;
  // Logs are archived under <log_dir>/<label>/ when set.
  std::optional<std::filesystem::path> log_dir;
  std::string label = "validation";
  // Base environment filtered through the allowlist; defaults to ours.
  std::optional<std::vector<std::string>> base_env;
};

// Sequential gates on an already-patched working copy: build, PoC under
// sanitizers, functional tests. Never throws for project failures.
ValidationResult validate(const RepairTask& task, const std::filesystem::path& working_copy,
                          const ValidateOptions& options = {});

// Mechanical feedback for a failed result: the first compiler error lines,
// the new sanitizer summary with trapping frame and class note, or the
// failing test identifiers. At most `cap` bytes; empty for Pass.
std::string distill_feedback(const ValidationResult& result, std::size_t cap = kFeedbackCap,
                             const std::optional<std::filesystem::path>& project_root =
                                 std::nullopt);

// Failing test identifiers recognized in common runner formats
// ("FAIL: x", gtest, TAP, ctest, pytest, unittest), in order, deduplicated.
std::vector<std::string> extract_failing_tests(std::string_view output);

// Lines that report compiler or linker errors.
std::vector<std::string> extract_error_lines(std::string_view build_log);

// True when the run output carries a sanitizer report header.
bool has_sanitizer_report(std::string_view output);

class Validator {
 public:
  virtual ~Validator() = default;
  virtual ValidationResult validate(const RepairTask& task,
                                    const std::filesystem::path& working_copy) = 0;
};

// Runs the real gates.
class CommandValidator : public Validator {
 public:
  explicit CommandValidator(ValidateOptions options = {}) : options_(std::move(options)) {}
  ValidationResult validate(const RepairTask& task,
                            const std::filesystem::path& working_copy) override;
  ValidateOptions& options() { return options_; }

 private:
  ValidateOptions options_;
  unsigned calls_ = 0;
};

// Returns canned results in order; the last one repeats once exhausted.
// Feedback is filled mechanically when left empty for a failure.
class StubValidator : public Validator {
 public:
  explicit StubValidator(std::vector<ValidationResult> results);
  static StubValidator always(ValidationStatus status);
  ValidationResult validate(const RepairTask& task,
                            const std::filesystem::path& working_copy) override;
  unsigned calls() const { return calls_; }

 private:
  std::deque<ValidationResult> results_;
  unsigned calls_ = 0;
};

// ---- Preflight -------------------------------------------------------------

struct PreflightResult {
  bool reproduced = false;
  std::string detail;  // why not, when not reproduced
  std::optional<SanitizerReport> observed;
  std::string run_output;
};

// Builds the working copy and runs the PoC once; reproduced when a
// sanitizer report (or a fatal signal) is observed.
PreflightResult preflight(const RepairTask& task, const std::filesystem::path& working_copy,
                          const ValidateOptions& options = {});

}  // namespace tracefix
