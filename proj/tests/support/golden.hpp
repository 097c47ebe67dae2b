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
#include <vector>

namespace tracefix::testing {

// Names of the golden report fixtures (stem of each *.expect.json).
std::vector<std::string> golden_report_names();

// Parses fixtures/reports/<name>.txt and compares class, tool, fault
// address, trapping frame and every expected trace against
// <name>.expect.json. Returns one message per mismatch.
std::vector<std::string> check_golden_report(const std::string& name);

}  // namespace tracefix::testing
