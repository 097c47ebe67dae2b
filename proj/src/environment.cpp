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

#include "tracefix/environment.hpp"

#include <algorithm>

#include "tracefix/process.hpp"

namespace tracefix {

const std::vector<std::string_view>& environment_allowlist() {
  static const std::vector<std::string_view> names = {
      "PATH",   "HOME",     "USER",    "LOGNAME", "LANG",
      "LC_ALL", "TMPDIR",   "TZ",      "CC",      "CXX",
      "CFLAGS", "CXXFLAGS", "CPPFLAGS", "LDFLAGS", "SOURCE_DATE_EPOCH",
  };
  return names;
}

std::vector<std::string> hermetic_environment(const std::vector<std::string>& base,
                                              bool under_debugger) {
  std::vector<std::string> env;
  const auto& allow = environment_allowlist();
  for (const auto& kv : base) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    std::string_view key(kv.data(), eq);
    if (std::find(allow.begin(), allow.end(), key) != allow.end()) env.push_back(kv);
  }
  if (!env_lookup(env, "PATH")) env_set(env, "PATH", "/usr/local/bin:/usr/bin:/bin");
  env_set(env, "ASAN_OPTIONS",
          std::string("abort_on_error=1:symbolize=1:disable_coredump=1:"
                      "handle_abort=0:detect_leaks=") +
              (under_debugger ? "0" : "1"));
  env_set(env, "UBSAN_OPTIONS",
          "print_stacktrace=1:halt_on_error=1:abort_on_error=1:symbolize=1");
  env_set(env, "MSAN_OPTIONS", "abort_on_error=1:symbolize=1:disable_coredump=1");
  env_set(env, "LSAN_OPTIONS", "symbolize=1");
  return env;
}

std::vector<std::string> hermetic_environment(bool under_debugger) {
  return hermetic_environment(current_environment(), under_debugger);
}

}  // namespace tracefix
