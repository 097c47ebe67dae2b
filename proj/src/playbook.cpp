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

#include "tracefix/playbook.hpp"

#include <algorithm>

#include <json.hpp>

#include "tracefix/embedded_data.hpp"
#include "tracefix/error.hpp"
#include "tracefix/util.hpp"

namespace tracefix {

namespace {

std::string embedded_text(const std::string& name) {
  const auto& files = embedded::files();
  auto it = files.find(name);
  if (it == files.end()) {
    throw Error(ErrorCode::InvalidConfig, "missing built-in data file " + name);
  }
  return std::string(it->second);
}

std::vector<std::string> string_list(const nlohmann::json& doc,
                                     const char* field) {
  std::vector<std::string> out;
  for (const auto& v : doc.at(field)) out.push_back(v.get<std::string>());
  return out;
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

}  // namespace

bool has_hypothesis_rule(const Guideline& g) {
  return std::any_of(g.rules_of_engagement.begin(), g.rules_of_engagement.end(),
                     [](const std::string& r) {
                       return contains(r, "hypothesis") && contains(r, "patch");
                     });
}

Guideline parse_guideline(std::string_view json_text) {
  Guideline g;
  try {
    auto doc = nlohmann::json::parse(json_text);
    auto cls = vuln_class_from_string(doc.at("vuln_class").get<std::string>());
    if (!cls) throw Error(ErrorCode::InvalidConfig, "unknown vuln_class");
    g.vuln_class = *cls;
    g.common_root_causes = string_list(doc, "common_root_causes");
    g.investigation_priorities = string_list(doc, "investigation_priorities");
    g.recommended_commands = string_list(doc, "recommended_commands");
    g.rules_of_engagement = string_list(doc, "rules_of_engagement");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig,
                std::string("malformed guideline document: ") + e.what());
  }
  if (!has_hypothesis_rule(g)) {
    throw Error(ErrorCode::InvalidConfig,
                "guideline for " + std::string(to_string(g.vuln_class)) +
                    " lacks the hypothesis-before-patch rule");
  }
  return g;
}

const Playbook& Playbook::builtin() {
  static const Playbook playbook = [] {
    Playbook p;
    for (VulnClass c : kAllVulnClasses) {
      p.guidelines_[c] = parse_guideline(
          embedded_text("guidelines/" + std::string(to_string(c)) + ".json"));
    }
    return p;
  }();
  return playbook;
}

Playbook Playbook::from_directory(const fs::path& dir) {
  Playbook p = builtin();
  for (VulnClass c : kAllVulnClasses) {
    auto path = dir / (std::string(to_string(c)) + ".json");
    if (auto text = try_read_file(path)) {
      Guideline g = parse_guideline(*text);
      if (g.vuln_class != c) {
        throw Error(ErrorCode::InvalidConfig,
                    path.string() + " declares a different vuln_class");
      }
      p.guidelines_[c] = std::move(g);
    }
  }
  return p;
}

const Guideline& Playbook::guidelines_for(VulnClass c) const {
  auto it = guidelines_.find(c);
  if (it == guidelines_.end()) it = guidelines_.find(VulnClass::Unclassified);
  return it->second;
}

const Guideline& guidelines_for(VulnClass c) {
  return Playbook::builtin().guidelines_for(c);
}

const std::string& action_protocol_doc() {
  static const std::string doc = embedded_text("prompt/action_protocol.md");
  return doc;
}

std::string render_guideline(const Guideline& g) {
  std::string out;
  out += kGuidelineBegin;
  out += display_name(g.vuln_class);
  out += "\n\n### Common root causes\n";
  for (const auto& s : g.common_root_causes) out += "- " + s + "\n";
  out += "\n### Investigation priorities (in order)\n";
  for (std::size_t i = 0; i < g.investigation_priorities.size(); ++i) {
    out += std::to_string(i + 1) + ". " + g.investigation_priorities[i] + "\n";
  }
  out += "\n### Recommended debugger commands\n";
  for (const auto& s : g.recommended_commands) out += "- `" + s + "`\n";
  out += "\n### Rules of engagement\n";
  for (const auto& s : g.rules_of_engagement) out += "- " + s + "\n";
  out += "\n";
  out += kGuidelineEnd;
  return out;
}

namespace {

std::string render_trace(const std::string& title,
                         const std::vector<StackFrame>& frames, std::size_t n) {
  std::string out = title + ":\n";
  std::size_t shown = std::min(n, frames.size());
  for (std::size_t i = 0; i < shown; ++i) {
    out += "  " + render_frame(frames[i]) + "\n";
  }
  if (frames.size() > shown) {
    out += "  ... (" + std::to_string(frames.size() - shown) +
           " more frames truncated)\n";
  }
  return out;
}

std::string render_user_message(const RepairTask& task,
                                const SanitizerReport& report, std::size_t n) {
  std::string out;
  out += "A sanitizer trapped the target on the proof-of-concept input.\n\n";
  out += "Sanitizer: " + std::string(to_string(report.tool)) + "\n";
  out += "Error: " + report.summary_line + "\n";
  out += "Class: " + std::string(display_name(report.vuln_class)) + "\n";
  if (!report.primary_trace.empty()) {
    out += "Trapping frame: " + render_frame(trapping_frame(report)) + "\n";
  }
  out += "Target: " + task.binary.generic_string() + " (PoC " +
         task.poc_path.generic_string() + " delivered via " +
         std::string(to_string(task.poc_delivery)) + ")\n\n";
  out += render_trace("Primary trace", report.primary_trace, n);
  for (const auto& [name, frames] : report.auxiliary_traces) {
    out += render_trace("Trace " + name, frames, n);
  }
  out += "\nStart by stating your root-cause hypothesis, then verify it.\n";
  return out;
}

}  // namespace

PromptBundle assemble_prompt(const RepairTask& task,
                             const SanitizerReport& report,
                             const Guideline& guideline,
                             const PromptOptions& options) {
  PromptBundle bundle;
  bundle.action_protocol_doc = action_protocol_doc();
  std::string system = embedded_text("prompt/system_scaffold.md");
  replace_all(system, "{{GUIDELINE}}", render_guideline(guideline));
  replace_all(system, "{{PROTOCOL}}", bundle.action_protocol_doc);
  bundle.system_prompt = std::move(system);

  std::size_t n = options.frames_per_trace;
  bundle.initial_user_message = render_user_message(task, report, n);
  // Over budget: drop trace tails first; guideline text is never cut.
  while (n > 0 && bundle.system_prompt.size() +
                          bundle.initial_user_message.size() >
                      options.char_budget) {
    --n;
    bundle.initial_user_message = render_user_message(task, report, n);
  }
  return bundle;
}

}  // namespace tracefix
