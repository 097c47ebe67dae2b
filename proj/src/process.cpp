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

#include "tracefix/process.hpp"

#include <fcntl.h>
#include <linux/audit.h>
#include <linux/filter.h>
#include <linux/seccomp.h>
#include <poll.h>
#include <signal.h>
#include <sys/prctl.h>
#include <sys/resource.h>
#include <sys/syscall.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstddef>
#include <cstring>

#include "tracefix/error.hpp"

extern char** environ;

namespace tracefix {

namespace {

using Clock = std::chrono::steady_clock;

#if defined(__x86_64__)
constexpr std::uint32_t kAuditArch = AUDIT_ARCH_X86_64;
#elif defined(__aarch64__)
constexpr std::uint32_t kAuditArch = AUDIT_ARCH_AARCH64;
#else
constexpr std::uint32_t kAuditArch = 0;
#endif

// Filter that kills on network sockets, process creation and filesystem
// mutation. Built in the parent so the child does not allocate.
std::vector<sock_filter> confinement_filter() {
  std::vector<sock_filter> f;
  auto stmt = [&](std::uint16_t code, std::uint32_t k) {
    f.push_back(BPF_STMT(code, k));
  };
  auto kill_if = [&](long nr) {
    f.push_back(BPF_JUMP(BPF_JMP | BPF_JEQ | BPF_K,
                         static_cast<std::uint32_t>(nr), 0, 1));
    stmt(BPF_RET | BPF_K, SECCOMP_RET_KILL_PROCESS);
  };
  stmt(BPF_LD | BPF_W | BPF_ABS, offsetof(seccomp_data, arch));
  f.push_back(BPF_JUMP(BPF_JMP | BPF_JEQ | BPF_K, kAuditArch, 1, 0));
  stmt(BPF_RET | BPF_K, SECCOMP_RET_KILL_PROCESS);
  stmt(BPF_LD | BPF_W | BPF_ABS, offsetof(seccomp_data, nr));
  for (long nr : {
           static_cast<long>(SYS_socket), static_cast<long>(SYS_clone),
           static_cast<long>(SYS_clone3), static_cast<long>(SYS_unlinkat),
           static_cast<long>(SYS_renameat), static_cast<long>(SYS_renameat2),
           static_cast<long>(SYS_mkdirat), static_cast<long>(SYS_linkat),
           static_cast<long>(SYS_symlinkat), static_cast<long>(SYS_fchmodat),
           static_cast<long>(SYS_truncate), static_cast<long>(SYS_ptrace),
#ifdef SYS_fork
           static_cast<long>(SYS_fork), static_cast<long>(SYS_vfork),
           static_cast<long>(SYS_unlink), static_cast<long>(SYS_rename),
           static_cast<long>(SYS_mkdir), static_cast<long>(SYS_rmdir),
           static_cast<long>(SYS_link), static_cast<long>(SYS_symlink),
           static_cast<long>(SYS_chmod), static_cast<long>(SYS_creat),
#endif
       }) {
    kill_if(nr);
  }
  // openat(dirfd, path, flags): refuse any write or create flag.
  constexpr std::uint32_t kWriteFlags =
      O_WRONLY | O_RDWR | O_CREAT | O_TRUNC | O_APPEND;
  f.push_back(BPF_JUMP(BPF_JMP | BPF_JEQ | BPF_K,
                       static_cast<std::uint32_t>(SYS_openat), 0, 3));
  stmt(BPF_LD | BPF_W | BPF_ABS, offsetof(seccomp_data, args[2]));
  f.push_back(BPF_JUMP(BPF_JMP | BPF_JSET | BPF_K, kWriteFlags, 0, 1));
  stmt(BPF_RET | BPF_K, SECCOMP_RET_KILL_PROCESS);
#ifdef SYS_open
  stmt(BPF_LD | BPF_W | BPF_ABS, offsetof(seccomp_data, nr));
  f.push_back(BPF_JUMP(BPF_JMP | BPF_JEQ | BPF_K,
                       static_cast<std::uint32_t>(SYS_open), 0, 3));
  stmt(BPF_LD | BPF_W | BPF_ABS, offsetof(seccomp_data, args[1]));
  f.push_back(BPF_JUMP(BPF_JMP | BPF_JSET | BPF_K, kWriteFlags, 0, 1));
  stmt(BPF_RET | BPF_K, SECCOMP_RET_KILL_PROCESS);
#endif
  stmt(BPF_RET | BPF_K, SECCOMP_RET_ALLOW);
  return f;
}

void set_limit(int resource, std::uint64_t value) {
  rlimit rl{static_cast<rlim_t>(value), static_cast<rlim_t>(value)};
  ::setrlimit(resource, &rl);
}

// Runs in the forked child; async-signal-safe calls only.
[[noreturn]] void exec_child(char* const* argv, char* const* envp,
                             const char* cwd, const ResourceLimits& limits,
                             const sock_fprog* filter) {
  ::setpgid(0, 0);
  ::signal(SIGPIPE, SIG_DFL);
  ::signal(SIGINT, SIG_DFL);
  if (cwd != nullptr && ::chdir(cwd) != 0) ::_exit(127);
  if (limits.disable_core_dumps) set_limit(RLIMIT_CORE, 0);
  if (limits.cpu_seconds) {
    // Soft limit delivers SIGXCPU; the hard limit one second later kills a
    // child that ignores it.
    rlimit rl{static_cast<rlim_t>(*limits.cpu_seconds),
              static_cast<rlim_t>(*limits.cpu_seconds + 1)};
    ::setrlimit(RLIMIT_CPU, &rl);
  }
  if (limits.address_space_bytes) {
    set_limit(RLIMIT_AS, *limits.address_space_bytes);
  }
  if (limits.file_size_bytes) set_limit(RLIMIT_FSIZE, *limits.file_size_bytes);
  if (filter != nullptr) {
    ::prctl(PR_SET_NO_NEW_PRIVS, 1, 0, 0, 0);
    if (::prctl(PR_SET_SECCOMP, SECCOMP_MODE_FILTER, filter) != 0) {
      ::_exit(126);
    }
  }
  if (envp != nullptr) {
    ::execve(argv[0], argv, envp);
    // execve does not search PATH; retry through execvpe semantics.
    ::execvpe(argv[0], argv, envp);
  } else {
    ::execvp(argv[0], argv);
  }
  ::_exit(127);
}

struct CStrings {
  explicit CStrings(const std::vector<std::string>& v) {
    for (const auto& s : v) ptrs.push_back(const_cast<char*>(s.c_str()));
    ptrs.push_back(nullptr);
  }
  char* const* data() { return ptrs.data(); }
  std::vector<char*> ptrs;
};

void set_nonblocking(int fd) {
  int flags = ::fcntl(fd, F_GETFL);
  ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

void close_fd(int& fd) {
  if (fd >= 0) ::close(fd);
  fd = -1;
}

int poll_timeout_ms(Clock::time_point deadline, bool has_deadline) {
  if (!has_deadline) return 200;
  auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
      deadline - Clock::now());
  return static_cast<int>(std::clamp<long long>(left.count(), 0, 200));
}

}  // namespace

ProcessResult run_process(const ProcessSpec& spec) {
  if (spec.argv.empty()) throw Error(ErrorCode::LaunchFailure, "empty argv");
  ProcessResult result;
  const auto start = Clock::now();

  int in_pipe[2], out_pipe[2], err_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0 || ::pipe2(out_pipe, O_CLOEXEC) != 0 ||
      ::pipe2(err_pipe, O_CLOEXEC) != 0) {
    throw Error(ErrorCode::LaunchFailure,
                std::string("pipe: ") + std::strerror(errno));
  }
  int stdin_file_fd = -1;
  if (spec.stdin_file) {
    stdin_file_fd = ::open(spec.stdin_file->c_str(), O_RDONLY | O_CLOEXEC);
    if (stdin_file_fd < 0) {
      for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1],
                     err_pipe[0], err_pipe[1]}) {
        ::close(fd);
      }
      throw Error(ErrorCode::LaunchFailure,
                  "cannot open stdin file " + spec.stdin_file->string());
    }
  }

  CStrings argv(spec.argv);
  std::optional<CStrings> envp;
  if (spec.env) envp.emplace(*spec.env);
  std::string cwd = spec.cwd ? spec.cwd->string() : std::string();
  std::vector<sock_filter> filter_code;
  sock_fprog filter{};
  if (spec.limits.confine) {
    filter_code = confinement_filter();
    filter.len = static_cast<unsigned short>(filter_code.size());
    filter.filter = filter_code.data();
  }

  pid_t pid = ::fork();
  if (pid < 0) {
    throw Error(ErrorCode::LaunchFailure,
                std::string("fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    ::dup2(stdin_file_fd >= 0 ? stdin_file_fd : in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::dup2(spec.merge_stderr ? out_pipe[1] : err_pipe[1], STDERR_FILENO);
    exec_child(argv.data(), envp ? envp->data() : nullptr,
               spec.cwd ? cwd.c_str() : nullptr, spec.limits,
               spec.limits.confine ? &filter : nullptr);
  }
  ::setpgid(pid, pid);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  ::close(err_pipe[1]);
  if (stdin_file_fd >= 0) ::close(stdin_file_fd);
  int in_fd = in_pipe[1];
  int out_fd = out_pipe[0];
  int err_fd = err_pipe[0];
  set_nonblocking(in_fd);
  set_nonblocking(out_fd);
  set_nonblocking(err_fd);
  if (spec.stdin_data.empty() || stdin_file_fd >= 0) close_fd(in_fd);

  const bool has_deadline = spec.timeout.count() > 0;
  const auto deadline = start + spec.timeout;
  std::size_t written = 0;
  char buf[65536];

  auto drain = [&](int& fd, std::string& sink, std::size_t& total,
                   std::size_t cap) {
    for (;;) {
      ssize_t n = ::read(fd, buf, sizeof buf);
      if (n > 0) {
        auto count = static_cast<std::size_t>(n);
        total += count;
        if (sink.size() < cap) {
          sink.append(buf, std::min(count, cap - sink.size()));
        }
        continue;
      }
      if (n == 0) close_fd(fd);
      if (n < 0 && errno == EINTR) continue;
      return;
    }
  };

  while (out_fd >= 0 || err_fd >= 0) {
    if (has_deadline && Clock::now() >= deadline) {
      result.timed_out = true;
      ::kill(-pid, SIGKILL);
      ::kill(pid, SIGKILL);
      break;
    }
    pollfd fds[3];
    int nfds = 0;
    int out_idx = -1, err_idx = -1, in_idx = -1;
    if (out_fd >= 0) { out_idx = nfds; fds[nfds++] = {out_fd, POLLIN, 0}; }
    if (err_fd >= 0) { err_idx = nfds; fds[nfds++] = {err_fd, POLLIN, 0}; }
    if (in_fd >= 0) { in_idx = nfds; fds[nfds++] = {in_fd, POLLOUT, 0}; }
    int rc = ::poll(fds, static_cast<nfds_t>(nfds),
                    poll_timeout_ms(deadline, has_deadline));
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (out_idx >= 0 && fds[out_idx].revents != 0) {
      drain(out_fd, result.out, result.out_bytes, spec.stdout_cap);
    }
    if (err_idx >= 0 && fds[err_idx].revents != 0) {
      drain(err_fd, result.err, result.err_bytes, spec.stderr_cap);
    }
    if (in_idx >= 0 && fds[in_idx].revents != 0) {
      if ((fds[in_idx].revents & (POLLERR | POLLHUP)) != 0) {
        close_fd(in_fd);
      } else {
        ssize_t n = ::write(in_fd, spec.stdin_data.data() + written,
                            spec.stdin_data.size() - written);
        if (n > 0) written += static_cast<std::size_t>(n);
        if (n < 0 && errno != EAGAIN && errno != EINTR) close_fd(in_fd);
        if (written >= spec.stdin_data.size()) close_fd(in_fd);
      }
    }
  }
  close_fd(in_fd);
  close_fd(out_fd);
  close_fd(err_fd);

  int status = 0;
  for (;;) {
    pid_t r = ::waitpid(pid, &status, has_deadline ? WNOHANG : 0);
    if (r == pid) break;
    if (r < 0 && errno != EINTR) break;
    if (r == 0) {
      if (Clock::now() >= deadline) {
        result.timed_out = true;
        ::kill(-pid, SIGKILL);
        ::kill(pid, SIGKILL);
        ::waitpid(pid, &status, 0);
        break;
      }
      ::usleep(2000);
    }
  }
  // Reap stragglers left in the group (e.g. by a killed shell).
  ::kill(-pid, SIGKILL);
  if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
    result.exec_failed = result.exit_code == 127 && result.out_bytes == 0 &&
                         result.err_bytes == 0;
  } else if (WIFSIGNALED(status)) {
    result.term_signal = WTERMSIG(status);
  }
  result.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
      Clock::now() - start);
  return result;
}

ProcessSpec shell_spec(std::string command) {
  ProcessSpec spec;
  spec.argv = {"/bin/sh", "-c", std::move(command)};
  return spec;
}

std::vector<std::string> current_environment() {
  std::vector<std::string> env;
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
    env.emplace_back(*e);
  }
  return env;
}

std::optional<std::string> env_lookup(const std::vector<std::string>& env,
                                      std::string_view key) {
  for (const auto& kv : env) {
    if (kv.size() > key.size() && kv[key.size()] == '=' &&
        std::string_view(kv).substr(0, key.size()) == key) {
      return kv.substr(key.size() + 1);
    }
  }
  return std::nullopt;
}

void env_set(std::vector<std::string>& env, std::string_view key,
             std::string_view value) {
  std::string entry = std::string(key) + "=" + std::string(value);
  for (auto& kv : env) {
    if (kv.size() > key.size() && kv[key.size()] == '=' &&
        std::string_view(kv).substr(0, key.size()) == key) {
      kv = std::move(entry);
      return;
    }
  }
  env.push_back(std::move(entry));
}

std::optional<std::filesystem::path> find_executable(
    std::string_view name, std::optional<std::string> path_env) {
  namespace fs = std::filesystem;
  if (name.empty()) return std::nullopt;
  if (name.find('/') != std::string_view::npos) {
    fs::path p(name);
    if (::access(p.c_str(), X_OK) == 0 && !fs::is_directory(p)) return p;
    return std::nullopt;
  }
  std::string path = path_env ? *path_env : [] {
    const char* p = std::getenv("PATH");
    return std::string(p ? p : "/usr/bin:/bin");
  }();
  std::size_t start = 0;
  while (start <= path.size()) {
    auto colon = path.find(':', start);
    std::string dir = path.substr(
        start, colon == std::string::npos ? std::string::npos : colon - start);
    if (!dir.empty()) {
      fs::path candidate = fs::path(dir) / std::string(name);
      if (::access(candidate.c_str(), X_OK) == 0 &&
          !fs::is_directory(candidate)) {
        return candidate;
      }
    }
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  return std::nullopt;
}

// --- Subprocess --------------------------------------------------------------

Subprocess::Subprocess(Subprocess&& other) noexcept
    : pid_(std::exchange(other.pid_, -1)),
      in_fd_(std::exchange(other.in_fd_, -1)),
      out_fd_(std::exchange(other.out_fd_, -1)),
      eof_(other.eof_),
      buffer_(std::move(other.buffer_)) {}

Subprocess& Subprocess::operator=(Subprocess&& other) noexcept {
  if (this != &other) {
    terminate();
    pid_ = std::exchange(other.pid_, -1);
    in_fd_ = std::exchange(other.in_fd_, -1);
    out_fd_ = std::exchange(other.out_fd_, -1);
    eof_ = other.eof_;
    buffer_ = std::move(other.buffer_);
  }
  return *this;
}

Subprocess::~Subprocess() { terminate(); }

Subprocess Subprocess::spawn(const std::vector<std::string>& argv,
                             const std::optional<std::vector<std::string>>& env,
                             const std::optional<std::filesystem::path>& cwd,
                             bool merge_stderr) {
  if (argv.empty()) throw Error(ErrorCode::LaunchFailure, "empty argv");
  if (!find_executable(argv[0])) {
    throw Error(ErrorCode::LaunchFailure, "executable not found: " + argv[0]);
  }
  int in_pipe[2], out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) {
    throw Error(ErrorCode::LaunchFailure, "pipe failed");
  }
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw Error(ErrorCode::LaunchFailure, "pipe failed");
  }
  CStrings cargv(argv);
  std::optional<CStrings> cenv;
  if (env) cenv.emplace(*env);
  std::string cwd_str = cwd ? cwd->string() : std::string();
  ResourceLimits limits;

  pid_t pid = ::fork();
  if (pid < 0) throw Error(ErrorCode::LaunchFailure, "fork failed");
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    if (merge_stderr) {
      ::dup2(out_pipe[1], STDERR_FILENO);
    } else {
      int devnull = ::open("/dev/null", O_WRONLY);
      if (devnull >= 0) ::dup2(devnull, STDERR_FILENO);
    }
    exec_child(cargv.data(), cenv ? cenv->data() : nullptr,
               cwd ? cwd_str.c_str() : nullptr, limits, nullptr);
  }
  ::setpgid(pid, pid);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  Subprocess p;
  p.pid_ = pid;
  p.in_fd_ = in_pipe[1];
  p.out_fd_ = out_pipe[0];
  set_nonblocking(p.out_fd_);
  return p;
}

bool Subprocess::running() {
  if (pid_ <= 0) return false;
  int status = 0;
  pid_t r = ::waitpid(pid_, &status, WNOHANG);
  if (r == pid_) {
    pid_ = -1;
    return false;
  }
  return r == 0;
}

bool Subprocess::write(std::string_view data) {
  if (in_fd_ < 0) return false;
  // SIGPIPE is ignored process-wide by callers that talk to children.
  ::signal(SIGPIPE, SIG_IGN);
  while (!data.empty()) {
    ssize_t n = ::write(in_fd_, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

bool Subprocess::fill(Clock::time_point deadline) {
  if (eof_ || out_fd_ < 0) return false;
  for (;;) {
    char buf[65536];
    ssize_t n = ::read(out_fd_, buf, sizeof buf);
    if (n > 0) {
      buffer_.append(buf, static_cast<std::size_t>(n));
      return true;
    }
    if (n == 0) {
      eof_ = true;
      return false;
    }
    if (errno == EINTR) continue;
    if (errno != EAGAIN && errno != EWOULDBLOCK) {
      eof_ = true;
      return false;
    }
    auto now = Clock::now();
    if (now >= deadline) return false;
    pollfd pfd{out_fd_, POLLIN, 0};
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  deadline - now).count();
    ::poll(&pfd, 1, static_cast<int>(std::clamp<long long>(ms, 1, 1000)));
  }
}

Subprocess::ReadResult Subprocess::read_line(Clock::time_point deadline) {
  for (;;) {
    auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return {ReadStatus::Line, std::move(line)};
    }
    if (!fill(deadline)) {
      if (eof_) {
        if (!buffer_.empty()) {
          std::string rest = std::move(buffer_);
          buffer_.clear();
          return {ReadStatus::Line, std::move(rest)};
        }
        return {ReadStatus::Eof, {}};
      }
      if (Clock::now() >= deadline) return {ReadStatus::Timeout, {}};
    }
  }
}

std::optional<std::string> Subprocess::read_exact(
    std::size_t n, Clock::time_point deadline) {
  while (buffer_.size() < n) {
    if (!fill(deadline) && (eof_ || Clock::now() >= deadline)) {
      return std::nullopt;
    }
  }
  std::string out = buffer_.substr(0, n);
  buffer_.erase(0, n);
  return out;
}

void Subprocess::interrupt() {
  if (pid_ > 0) ::kill(-pid_, SIGINT);
}

void Subprocess::terminate() {
  if (in_fd_ >= 0) ::close(in_fd_);
  in_fd_ = -1;
  if (pid_ > 0) {
    ::kill(-pid_, SIGKILL);
    ::kill(pid_, SIGKILL);
    int status = 0;
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }
  if (out_fd_ >= 0) ::close(out_fd_);
  out_fd_ = -1;
}

}  // namespace tracefix
