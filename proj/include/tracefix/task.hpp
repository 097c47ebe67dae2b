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
#include <string>
#include <vector>

namespace tracefix {

enum class PocDelivery { Stdin, Argv, FileArg };

std::string_view to_string(PocDelivery d);

// (project, tests, PoC, sanitizer report) as consumed by the repair loop.
// Paths other than project_root are stored relative to it when they lie
// inside the project.
struct RepairTask {
  std::filesystem::path project_root;
  std::string build_command;
  std::string test_command;
  std::filesystem::path binary;  // built target, relative to project_root
  std::vector<std::string> binary_args;
  std::filesystem::path poc_path;
  PocDelivery poc_delivery = PocDelivery::Stdin;
  std::filesystem::path report_path;

  // Resolves a task-relative path against `root` (defaults to project_root).
  std::filesystem::path resolve(const std::filesystem::path& p) const;
  // argv for running the target from `root`, honoring the delivery mode.
  std::vector<std::string> target_argv(const std::filesystem::path& root) const;
};

// Loads a JSON task manifest. Relative paths are resolved against the
// manifest's directory. Throws Error{InvalidManifest} naming the bad field.
RepairTask load_task_manifest(const std::filesystem::path& manifest_path);
// Checks that every referenced path exists.
void check_task_paths(const RepairTask& task);

}  // namespace tracefix
