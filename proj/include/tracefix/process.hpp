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
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tracefix {

struct ResourceLimits {
  std::optional<std::uint64_t> cpu_seconds;
  std::optional<std::uint64_t> address_space_bytes;
  // 0 forbids growing any regular file; pipes are unaffected.
  std::optional<std::uint64_t> file_size_bytes;
  bool disable_core_dumps = true;
  // Installs a seccomp filter that kills the process on socket creation,
  // process creation and filesystem mutation.
  bool confine = false;
};

struct ProcessSpec {
  std::vector<std::string> argv;
  std::optional<std::filesystem::path> cwd;
  // Full "KEY=VALUE" environment; nullopt inherits the parent's.
  std::optional<std::vector<std::string>> env;
  std::string stdin_data;
  std::optional<std::filesystem::path> stdin_file;
  std::chrono::milliseconds timeout{0};  // zero means no deadline
  std::size_t stdout_cap = std::numeric_limits<std::size_t>::max();
  std::size_t stderr_cap = std::numeric_limits<std::size_t>::max();
  bool merge_stderr = false;
  ResourceLimits limits;
};

struct ProcessResult {
  int exit_code = -1;  // valid when term_signal == 0
  int term_signal = 0;
  bool timed_out = false;
  bool exec_failed = false;
  std::string out;
  std::string err;
  std::size_t out_bytes = 0;  // total produced, before capping
  std::size_t err_bytes = 0;
  std::chrono::milliseconds elapsed{0};

  bool ok() const { return !timed_out && term_signal == 0 && exit_code == 0; }
};

// Runs to completion (or deadline, after which the whole process group is
// killed). Never throws for child failures; only for local resource errors.
ProcessResult run_process(const ProcessSpec& spec);

// Convenience: `/bin/sh -c command`.
ProcessSpec shell_spec(std::string command);

// Environment of the current process as "KEY=VALUE" strings.
std::vector<std::string> current_environment();
std::optional<std::string> env_lookup(const std::vector<std::string>& env,
                                      std::string_view key);
void env_set(std::vector<std::string>& env, std::string_view key,
             std::string_view value);

// Resolves an executable name against PATH; absolute/relative paths are
// checked as-is.
std::optional<std::filesystem::path> find_executable(
    std::string_view name, std::optional<std::string> path_env = std::nullopt);

// A long-lived child with piped stdin and a line-oriented stdout reader.
class Subprocess {
 public:
  enum class ReadStatus { Line, Timeout, Eof };
  struct ReadResult {
    ReadStatus status;
    std::string line;
  };

  Subprocess() = default;
  Subprocess(const Subprocess&) = delete;
  Subprocess& operator=(const Subprocess&) = delete;
  Subprocess(Subprocess&& other) noexcept;
  Subprocess& operator=(Subprocess&& other) noexcept;
  ~Subprocess();

  // Throws Error{LaunchFailure} when the program cannot be started. With
  // merge_stderr false the child's stderr goes to /dev/null.
  static Subprocess spawn(const std::vector<std::string>& argv,
                          const std::optional<std::vector<std::string>>& env,
                          const std::optional<std::filesystem::path>& cwd,
                          bool merge_stderr = true);

  bool valid() const { return pid_ > 0; }
  bool running();
  int pid() const { return pid_; }

  // Returns false when the child's stdin is closed.
  bool write(std::string_view data);
  ReadResult read_line(std::chrono::steady_clock::time_point deadline);
  // Reads exactly n bytes (for length-prefixed protocols).
  std::optional<std::string> read_exact(
      std::size_t n, std::chrono::steady_clock::time_point deadline);

  void interrupt();  // SIGINT to the child's process group
  void terminate();  // SIGKILL + reap

 private:
  bool fill(std::chrono::steady_clock::time_point deadline);

  int pid_ = -1;
  int in_fd_ = -1;
  int out_fd_ = -1;
  bool eof_ = false;
  std::string buffer_;
};

}  // namespace tracefix
