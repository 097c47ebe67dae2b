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
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tracefix/agent.hpp"

namespace tracefix {

enum class BackendChoice { Scripted, Http };

struct Config {
  BackendChoice backend = BackendChoice::Scripted;
  std::filesystem::path transcript;  // scripted
  HttpBackendOptions http;           // http

  Budget budget;  // 75 iterations, temperature 0.0, $1.00

  BackendKind debugger = BackendKind::Forward;
  std::filesystem::path fake_transcript;
  std::set<std::string> passthrough_verbs;
  std::size_t debugger_output_cap = kDebuggerOutputCap;
  std::string gdb = "gdb";
  std::string rr = "rr";
  std::filesystem::path recording_cache;  // default: <output_dir>/recordings

  ValidationGates gates;
  std::chrono::milliseconds debugger_run_timeout{120000};
  std::chrono::milliseconds debugger_command_timeout{30000};
  std::chrono::milliseconds lsp_timeout{20000};
  std::vector<std::string> lsp_server = LspOptions{}.server_argv;

  std::size_t inline_cap = 4 * 1024;
  FeedbackMode feedback_mode = FeedbackMode::Mechanical;
  std::string feedback_script;
  double rejection_threshold = 0.35;
  std::optional<std::filesystem::path> playbook_dir;

  std::filesystem::path output_dir = "tracefix-out";
};

// Parses a config document. Relative paths resolve against `base_dir`.
// Unknown keys and ill-typed values throw Error{InvalidConfig} naming the
// field (dotted path).
Config config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);
Config load_config(const std::filesystem::path& path);

// Credentials and endpoint from the environment ("KEY=VALUE" list):
// TRACEFIX_API_KEY, TRACEFIX_ENDPOINT, TRACEFIX_MODEL.
void apply_env_overrides(Config& config, const std::vector<std::string>& env);

// Checks cross-field requirements (e.g. a transcript for the scripted
// backend). Throws Error{InvalidConfig} naming the field.
void check_config(const Config& config);

AgentConfig agent_config(const Config& config);
std::unique_ptr<ChatBackend> make_backend(const Config& config);

}  // namespace tracefix
