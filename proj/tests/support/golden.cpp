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

#include "golden.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "test_support.hpp"
#include "tracefix/error.hpp"
#include "tracefix/report.hpp"
#include "tracefix/util.hpp"

namespace tracefix::testing {

using nlohmann::json;

std::vector<std::string> golden_report_names() {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(fixture_path("reports"))) {
    auto name = e.path().filename().string();
    const std::string suffix = ".expect.json";
    if (name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      names.push_back(name.substr(0, name.size() - suffix.size()));
    }
  }
  std::sort(names.begin(), names.end());
  return names;
}

namespace {

std::string describe(const StackFrame& f) {
  std::ostringstream os;
  os << "[" << f.function << ", " << f.file.value_or("null") << ", "
     << (f.line ? std::to_string(*f.line) : "null") << "]";
  return os.str();
}

void compare_trace(const std::string& label, const json& expected,
                   const std::vector<StackFrame>& actual,
                   std::vector<std::string>& out) {
  if (expected.size() != actual.size()) {
    out.push_back(label + ": expected " + std::to_string(expected.size()) +
                  " frames, got " + std::to_string(actual.size()));
    return;
  }
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const auto& e = expected[i];
    const auto& f = actual[i];
    bool ok = e[0].get<std::string>() == f.function;
    ok = ok && (e[1].is_null() ? !f.file.has_value()
                               : f.file == e[1].get<std::string>());
    ok = ok && (e[2].is_null() ? !f.line.has_value()
                               : f.line == e[2].get<unsigned>());
    if (!ok) {
      out.push_back(label + " frame " + std::to_string(i) + ": expected " +
                    e.dump() + ", got " + describe(f));
    }
  }
}

}  // namespace

std::vector<std::string> check_golden_report(const std::string& name) {
  std::vector<std::string> out;
  auto dir = fixture_path("reports");
  auto expect = json::parse(read_file(dir / (name + ".expect.json")));
  auto text = read_file(dir / (name + ".txt"));

  ParseOptions options;
  if (expect.contains("project_root")) {
    options.project_root = expect["project_root"].get<std::string>();
  }

  if (expect.contains("error")) {
    try {
      parse_report(text, options);
      out.push_back("expected error " + expect["error"].get<std::string>());
    } catch (const Error& e) {
      if (to_string(e.code()) != expect["error"].get<std::string>()) {
        out.push_back("wrong error " + std::string(to_string(e.code())));
      }
    }
    return out;
  }

  SanitizerReport r;
  try {
    r = parse_report(text, options);
  } catch (const std::exception& e) {
    out.push_back(std::string("parse failed: ") + e.what());
    return out;
  }
  if (to_string(r.vuln_class) != expect["vuln_class"].get<std::string>()) {
    out.push_back("class: expected " + expect["vuln_class"].get<std::string>() +
                  ", got " + std::string(to_string(r.vuln_class)));
  }
  if (to_string(r.tool) != expect["tool"].get<std::string>()) {
    out.push_back("tool: got " + std::string(to_string(r.tool)));
  }
  if (expect["fault_address"].is_null()) {
    if (r.fault_address) out.push_back("unexpected fault address");
  } else {
    auto want = std::stoull(expect["fault_address"].get<std::string>(), nullptr, 16);
    if (r.fault_address != want) out.push_back("fault address mismatch");
  }

  compare_trace("primary", expect["primary"], r.primary_trace, out);
  if (expect.contains("binary_offsets")) {
    const auto& offs = expect["binary_offsets"];
    for (std::size_t i = 0; i < offs.size() && i < r.primary_trace.size(); ++i) {
      if (r.primary_trace[i].binary_offset != offs[i].get<std::string>()) {
        out.push_back("binary offset " + std::to_string(i) + " mismatch");
      }
    }
  }
  std::size_t expected_aux = expect["auxiliary"].size();
  if (expected_aux != r.auxiliary_traces.size()) {
    out.push_back("auxiliary trace count: expected " + std::to_string(expected_aux) +
                  ", got " + std::to_string(r.auxiliary_traces.size()));
  }
  for (const auto& [aux_name, frames] : expect["auxiliary"].items()) {
    const auto* trace = r.auxiliary(aux_name);
    if (!trace) {
      out.push_back("missing auxiliary trace " + aux_name);
      continue;
    }
    compare_trace(aux_name, frames, *trace, out);
  }

  try {
    auto t = trapping_frame(r, options.project_root);
    const auto& e = expect["trapping"];
    bool ok = t.index == e["index"].get<unsigned>() &&
              t.function == e["function"].get<std::string>() &&
              (e["file"].is_null() ? !t.file : t.file == e["file"].get<std::string>()) &&
              (e["line"].is_null() ? !t.line : t.line == e["line"].get<unsigned>());
    if (!ok) out.push_back("trapping frame: got #" + std::to_string(t.index) + " " + describe(t));
  } catch (const Error& e) {
    out.push_back(std::string("trapping_frame threw: ") + e.what());
  }
  return out;
}

}  // namespace tracefix::testing
