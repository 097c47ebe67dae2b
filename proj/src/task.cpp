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

#include "tracefix/task.hpp"

#include <json.hpp>

#include "tracefix/error.hpp"
#include "tracefix/util.hpp"

namespace tracefix {

std::string_view to_string(PocDelivery d) {
  switch (d) {
    case PocDelivery::Stdin: return "stdin";
    case PocDelivery::Argv: return "argv";
    case PocDelivery::FileArg: return "file-arg";
  }
  return "stdin";
}

fs::path RepairTask::resolve(const fs::path& p) const {
  return p.is_absolute() ? p : project_root / p;
}

std::vector<std::string> RepairTask::target_argv(const fs::path& root) const {
  auto at = [&](const fs::path& p) {
    return (p.is_absolute() ? p : root / p).string();
  };
  std::vector<std::string> argv{at(binary)};
  argv.insert(argv.end(), binary_args.begin(), binary_args.end());
  switch (poc_delivery) {
    case PocDelivery::Stdin:
      break;
    case PocDelivery::FileArg:
      argv.push_back(at(poc_path));
      break;
    case PocDelivery::Argv: {
      auto content = try_read_file(at(poc_path)).value_or("");
      while (!content.empty() && content.back() == '\n') content.pop_back();
      argv.push_back(content);
      break;
    }
  }
  return argv;
}

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::InvalidManifest, "manifest field '" + field + "': " + why);
}

std::string required_string(const nlohmann::json& doc, const std::string& field) {
  if (!doc.contains(field)) bad(field, "missing");
  if (!doc[field].is_string()) bad(field, "must be a string");
  return doc[field].get<std::string>();
}

}  // namespace

RepairTask load_task_manifest(const fs::path& manifest_path) {
  auto text = try_read_file(manifest_path);
  if (!text) {
    throw Error(ErrorCode::InvalidManifest,
                "cannot read manifest " + manifest_path.string());
  }
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(*text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidManifest,
                "manifest is not valid JSON: " + std::string(e.what()));
  }
  if (!doc.is_object()) bad("<root>", "must be an object");

  const fs::path base = fs::absolute(manifest_path).parent_path();
  RepairTask task;
  fs::path root = required_string(doc, "project_root");
  task.project_root = (root.is_absolute() ? root : base / root).lexically_normal();
  task.build_command = required_string(doc, "build_command");
  task.test_command = required_string(doc, "test_command");
  task.binary = required_string(doc, "binary");
  if (doc.contains("binary_args")) {
    if (!doc["binary_args"].is_array()) bad("binary_args", "must be an array");
    for (const auto& a : doc["binary_args"]) {
      if (!a.is_string()) bad("binary_args", "entries must be strings");
      task.binary_args.push_back(a.get<std::string>());
    }
  }
  if (!doc.contains("poc") || !doc["poc"].is_object()) bad("poc", "missing");
  const auto& poc = doc["poc"];
  task.poc_path = required_string(poc, "path");
  std::string mode = poc.value("delivery", "stdin");
  if (mode == "stdin") task.poc_delivery = PocDelivery::Stdin;
  else if (mode == "argv") task.poc_delivery = PocDelivery::Argv;
  else if (mode == "file-arg") task.poc_delivery = PocDelivery::FileArg;
  else bad("poc.delivery", "expected stdin | argv | file-arg, got '" + mode + "'");
  task.report_path = required_string(doc, "report_path");

  // Paths in the manifest are relative to the project root.
  for (auto* p : {&task.poc_path, &task.report_path}) {
    if (p->is_absolute()) {
      if (auto rel = relative_under(*p, task.project_root)) *p = *rel;
    }
  }
  return task;
}

void check_task_paths(const RepairTask& task) {
  std::error_code ec;
  if (!fs::is_directory(task.project_root, ec)) {
    bad("project_root", "directory does not exist: " + task.project_root.string());
  }
  if (!fs::is_regular_file(task.resolve(task.poc_path), ec)) {
    bad("poc.path", "file does not exist: " + task.resolve(task.poc_path).string());
  }
  if (!fs::is_regular_file(task.resolve(task.report_path), ec)) {
    bad("report_path",
        "file does not exist: " + task.resolve(task.report_path).string());
  }
}

}  // namespace tracefix
