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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tracefix/report.hpp"
#include "tracefix/task.hpp"

namespace tracefix {

struct Guideline {
  VulnClass vuln_class = VulnClass::Unclassified;
  std::vector<std::string> common_root_causes;
  std::vector<std::string> investigation_priorities;
  std::vector<std::string> recommended_commands;
  std::vector<std::string> rules_of_engagement;
};

// True when some rule requires a hypothesis before any patch.
bool has_hypothesis_rule(const Guideline& g);

// Guideline documents keyed by class, loaded from data/guidelines/<Class>.json.
class Playbook {
 public:
  static const Playbook& builtin();
  // Documents found in `dir` override the built-in ones class by class.
  static Playbook from_directory(const std::filesystem::path& dir);

  const Guideline& guidelines_for(VulnClass c) const;

 private:
  std::map<VulnClass, Guideline> guidelines_;
};

Guideline parse_guideline(std::string_view json_text);

const Guideline& guidelines_for(VulnClass c);

struct PromptBundle {
  std::string system_prompt;
  std::string initial_user_message;
  std::string action_protocol_doc;

  bool operator==(const PromptBundle&) const = default;
};

struct PromptOptions {
  std::size_t frames_per_trace = 12;
  std::size_t char_budget = 16000;
};

inline constexpr std::string_view kGuidelineBegin = "## Crash-class guidance: ";
inline constexpr std::string_view kGuidelineEnd = "## End of crash-class guidance";

std::string render_guideline(const Guideline& g);
const std::string& action_protocol_doc();

PromptBundle assemble_prompt(const RepairTask& task,
                             const SanitizerReport& report,
                             const Guideline& guideline,
                             const PromptOptions& options = {});

}  // namespace tracefix
