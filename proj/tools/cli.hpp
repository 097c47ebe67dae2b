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

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace tracefix::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // non-Resolved outcome, correction failure
inline constexpr int kExitUsage = 2;    // bad manifest, config, report or arguments

struct Invocation {
  std::vector<std::string> args;  // without the program name
  // Binary re-executed for batch children.
  std::filesystem::path self_exe;
  std::vector<std::string> env;   // for credential overrides
};

int run(const Invocation& inv, std::ostream& out, std::ostream& err);

}  // namespace tracefix::cli
