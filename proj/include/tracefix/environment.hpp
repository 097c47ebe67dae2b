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

#include <string>
#include <string_view>
#include <vector>

namespace tracefix {

// Variables carried over from the caller's environment into builds, PoC
// runs and test runs. Everything else is dropped.
const std::vector<std::string_view>& environment_allowlist();

// Allowlisted subset of `base` with sanitizer options pinned: abort on
// error, symbolization on, no core dumps. Under a debugger leak detection is
// off (it cannot run under ptrace).
std::vector<std::string> hermetic_environment(const std::vector<std::string>& base,
                                              bool under_debugger = false);
std::vector<std::string> hermetic_environment(bool under_debugger = false);

}  // namespace tracefix
