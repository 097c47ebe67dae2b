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

#include "tracefix/report.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <regex>

#include <json.hpp>

#include "tracefix/embedded_data.hpp"
#include "tracefix/error.hpp"
#include "tracefix/util.hpp"

namespace tracefix {

namespace {

struct ClassNames {
  VulnClass value;
  std::string_view id;
  std::string_view display;
};

constexpr std::array<ClassNames, 11> kClassNames = {{
    {VulnClass::HeapBufferOverflow, "HeapBufferOverflow", "heap-buffer-overflow"},
    {VulnClass::StackBufferOverflow, "StackBufferOverflow", "stack-buffer-overflow"},
    {VulnClass::GlobalBufferOverflow, "GlobalBufferOverflow", "global-buffer-overflow"},
    {VulnClass::UseAfterFree, "UseAfterFree", "use-after-free"},
    {VulnClass::DoubleFree, "DoubleFree", "double-free"},
    {VulnClass::NullDereference, "NullDereference", "null-dereference"},
    {VulnClass::MemoryLeak, "MemoryLeak", "memory-leak"},
    {VulnClass::UseOfUninitialized, "UseOfUninitialized", "use-of-uninitialized-value"},
    {VulnClass::IntegerOverflowUB, "IntegerOverflowUB", "integer-overflow"},
    {VulnClass::Segv, "Segv", "segv"},
    {VulnClass::Unclassified, "Unclassified", "unclassified"},
}};

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

std::optional<unsigned> to_unsigned(std::string_view s) {
  unsigned v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<std::uint64_t> parse_hex(std::string_view s) {
  if (starts_with(s, "0x") || starts_with(s, "0X")) s.remove_prefix(2);
  if (s.empty()) return std::nullopt;
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

const std::regex& header_regex() {
  static const std::regex re(
      R"((ERROR|WARNING|SUMMARY): (Address|Leak|UndefinedBehavior|Memory)Sanitizer:\s*(.*))");
  return re;
}

const std::regex& runtime_error_regex() {
  static const std::regex re(R"(^\s*(\S+?):(\d+):(\d+): runtime error: (.*)$)");
  return re;
}

SanitizerTool tool_from_name(std::string_view name) {
  if (name == "Leak") return SanitizerTool::Leak;
  if (name == "UndefinedBehavior") return SanitizerTool::UndefinedBehavior;
  if (name == "Memory") return SanitizerTool::Memory;
  return SanitizerTool::Address;
}

// Splits a frame's tail ("in func file:line:col" or "(module+0xoff)").
std::optional<StackFrame> parse_frame_line(std::string_view line) {
  auto s = trim(line);
  if (s.size() < 2 || s[0] != '#' ||
      !std::isdigit(static_cast<unsigned char>(s[1]))) {
    return std::nullopt;
  }
  s.remove_prefix(1);
  std::size_t digits = 0;
  while (digits < s.size() && std::isdigit(static_cast<unsigned char>(s[digits]))) {
    ++digits;
  }
  auto index = to_unsigned(s.substr(0, digits));
  if (!index) return std::nullopt;
  s = trim(s.substr(digits));
  if (starts_with(s, "0x")) {
    auto sp = s.find_first_of(" \t");
    s = sp == std::string_view::npos ? std::string_view{} : trim(s.substr(sp));
  }
  auto build_id = s.find("(BuildId:");
  if (build_id != std::string_view::npos) s = trim(s.substr(0, build_id));

  StackFrame frame;
  frame.index = *index;
  bool has_in = starts_with(s, "in ");
  if (has_in) s = trim(s.substr(3));

  std::string_view location;
  std::string_view function = s;
  auto last_sp = s.find_last_of(" \t");
  std::string_view last_token =
      last_sp == std::string_view::npos ? s : s.substr(last_sp + 1);
  auto looks_like_module = [](std::string_view t) {
    return t.size() > 2 && t.front() == '(' && t.back() == ')' &&
           t.find("+0x") != std::string_view::npos;
  };
  auto looks_like_path = [](std::string_view t) {
    return t.find('/') != std::string_view::npos ||
           t.find(".c") != std::string_view::npos ||
           t.find(".h") != std::string_view::npos;
  };
  if (looks_like_module(last_token) ||
      (!has_in && last_sp == std::string_view::npos) ||
      (last_sp != std::string_view::npos && looks_like_path(last_token))) {
    location = last_token;
    function = last_sp == std::string_view::npos ? std::string_view{}
                                                 : trim(s.substr(0, last_sp));
  }
  if (!has_in && location.empty()) {
    location = s;
    function = {};
  }
  if (!location.empty()) {
    if (looks_like_module(location)) {
      frame.binary_offset = std::string(location.substr(1, location.size() - 2));
    } else {
      // file[:line[:col]]
      std::string_view path = location;
      std::optional<unsigned> ln, col;
      auto c1 = path.rfind(':');
      if (c1 != std::string_view::npos) {
        if (auto n = to_unsigned(path.substr(c1 + 1))) {
          auto before = path.substr(0, c1);
          auto c2 = before.rfind(':');
          if (c2 != std::string_view::npos) {
            if (auto m = to_unsigned(before.substr(c2 + 1))) {
              ln = m;
              col = n;
              path = before.substr(0, c2);
            } else {
              ln = n;
              path = before;
            }
          } else {
            ln = n;
            path = before;
          }
        }
      }
      if (!path.empty()) {
        frame.file = std::string(path);
        if (ln && *ln > 0) frame.line = ln;
        if (frame.line && col && *col > 0) frame.column = col;
      }
    }
  }
  if (!function.empty()) frame.function = std::string(function);
  return frame;
}

std::optional<std::string> section_for(std::string_view line) {
  auto t = trim(line);
  if (contains(t, "freed by thread")) return "freed-by";
  if (contains(t, "allocated by thread")) return "allocated-by";
  if (contains(t, "Direct leak of") || contains(t, "Indirect leak of")) {
    return "leak";
  }
  if (contains(t, "is located in stack of thread")) return "stack-object";
  if (starts_with(t, "Thread T") && contains(t, "created by")) {
    return "thread-created";
  }
  if (contains(t, "Uninitialized value was created by") ||
      contains(t, "Uninitialized value was stored")) {
    return "origin";
  }
  return std::nullopt;
}

void normalize_path(StackFrame& f, const ParseOptions& options) {
  if (!f.file || !options.project_root) return;
  fs::path p(*f.file);
  const auto& root = *options.project_root;
  if (p.is_absolute()) {
    if (auto rel = relative_under(p, root)) {
      f.file = rel->generic_string();
      return;
    }
    for (const auto& prefix : options.strip_prefixes) {
      if (!prefix.is_absolute()) continue;
      if (auto rel = relative_under(p, prefix)) {
        // A build dir inside the root keeps its position below the root.
        auto anchored = relative_under(prefix, root);
        fs::path joined = anchored && *anchored != "." ? *anchored / *rel : *rel;
        f.file = joined.lexically_normal().generic_string();
        return;
      }
    }
  } else {
    f.file = p.lexically_normal().generic_string();
  }
}

std::optional<StackFrame> frame_from_summary(std::string_view summary) {
  static const std::regex re(R"(([^\s:]+):(\d+)(?::(\d+))? in (.+)$)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(summary.begin(), summary.end(), m, re)) {
    return std::nullopt;
  }
  StackFrame f;
  f.file = m[1].str();
  f.line = to_unsigned(m[2].str());
  if (m[3].matched) f.column = to_unsigned(m[3].str());
  f.function = std::string(trim(m[4].str()));
  return f;
}

}  // namespace

std::string_view to_string(VulnClass c) {
  for (const auto& n : kClassNames) {
    if (n.value == c) return n.id;
  }
  return "Unclassified";
}

std::string_view display_name(VulnClass c) {
  for (const auto& n : kClassNames) {
    if (n.value == c) return n.display;
  }
  return "unclassified";
}

std::optional<VulnClass> vuln_class_from_string(std::string_view name) {
  for (const auto& n : kClassNames) {
    if (n.id == name || n.display == name) return n.value;
  }
  return std::nullopt;
}

std::string_view to_string(SanitizerTool t) {
  switch (t) {
    case SanitizerTool::Address: return "address";
    case SanitizerTool::Leak: return "leak";
    case SanitizerTool::UndefinedBehavior: return "undefined-behavior";
    case SanitizerTool::Memory: return "memory";
  }
  return "address";
}

std::string render_frame(const StackFrame& f) {
  std::string out = "#" + std::to_string(f.index) + " " + f.function;
  if (f.file) {
    out += " " + *f.file;
    if (f.line) out += ":" + std::to_string(*f.line);
    if (f.column) out += ":" + std::to_string(*f.column);
  } else if (f.binary_offset) {
    out += " (" + *f.binary_offset + ")";
  }
  return out;
}

const std::vector<StackFrame>* SanitizerReport::auxiliary(
    std::string_view name) const {
  for (const auto& [n, trace] : auxiliary_traces) {
    if (n == name) return &trace;
  }
  return nullptr;
}

const KeywordTable& KeywordTable::builtin() {
  static const KeywordTable table = [] {
    const auto& files = embedded::files();
    auto it = files.find("keywords.json");
    if (it == files.end()) {
      throw Error(ErrorCode::InvalidConfig, "keyword manifest missing");
    }
    return from_json(it->second);
  }();
  return table;
}

KeywordTable KeywordTable::from_json(std::string_view json_text) {
  auto doc = nlohmann::json::parse(json_text);
  KeywordTable table;
  table.version_ = doc.value("table_version", "");
  for (const auto& e : doc.at("keywords")) {
    auto cls = vuln_class_from_string(e.at("class").get<std::string>());
    if (!cls) {
      throw Error(ErrorCode::InvalidConfig,
                  "unknown class in keyword table: " + e.at("class").dump());
    }
    table.entries_.push_back({e.at("keyword").get<std::string>(), *cls});
  }
  return table;
}

VulnClass KeywordTable::classify(std::string_view text) const {
  const Entry* best = nullptr;
  for (const auto& e : entries_) {
    if (best != nullptr && e.keyword.size() <= best->keyword.size()) continue;
    std::size_t pos = 0;
    while ((pos = text.find(e.keyword, pos)) != std::string_view::npos) {
      std::size_t end = pos + e.keyword.size();
      bool left_ok = pos == 0 || !is_word_char(text[pos - 1]);
      bool right_ok = end >= text.size() ||
                      (!is_word_char(text[end]) && text[end] != '-');
      if (left_ok && right_ok) {
        best = &e;
        break;
      }
      ++pos;
    }
  }
  return best != nullptr ? best->vuln_class : VulnClass::Unclassified;
}

VulnClass classify(std::string_view header_line) {
  return KeywordTable::builtin().classify(header_line);
}

SanitizerReport parse_report(std::string_view text, const ParseOptions& options) {
  SanitizerReport report;
  report.raw_text = sanitize_utf8(text);
  const auto lines = split_lines(report.raw_text);

  std::optional<std::size_t> error_idx, summary_idx, runtime_idx;
  std::smatch m;
  std::string error_tool, summary_tool;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (std::regex_search(lines[i], m, header_regex())) {
      if (m[1] == "SUMMARY") {
        if (!summary_idx) {
          summary_idx = i;
          summary_tool = m[2].str();
        }
      } else if (!error_idx) {
        error_idx = i;
        error_tool = m[2].str();
      }
    } else if (!runtime_idx && std::regex_search(lines[i], runtime_error_regex())) {
      runtime_idx = i;
    }
  }
  if (!error_idx && !summary_idx && runtime_idx) {
    // Non-halting UBSan prints only "file:line:col: runtime error: ...".
    error_tool = "UndefinedBehavior";
  } else if (!error_idx && !summary_idx) {
    throw Error(ErrorCode::NoErrorHeader,
                "input is not a sanitizer report: no ERROR/SUMMARY header");
  }

  auto strip_pid = [](const std::string& line) {
    // "==1234==ERROR: ..." -> "ERROR: ..."
    auto pos = line.find("==ERROR:");
    if (pos == std::string::npos) pos = line.find("==WARNING:");
    if (pos != std::string::npos) return std::string(trim(line.substr(pos + 2)));
    return std::string(trim(line));
  };

  report.tool = tool_from_name(error_idx || !summary_idx ? error_tool : summary_tool);
  if (error_idx) {
    report.summary_line = strip_pid(lines[*error_idx]);
  } else if (runtime_idx) {
    report.summary_line = std::string(trim(lines[*runtime_idx]));
  } else {
    report.summary_line = std::string(trim(lines[*summary_idx]));
  }

  const auto& table = KeywordTable::builtin();
  report.vuln_class = table.classify(report.summary_line);
  if (report.vuln_class == VulnClass::Unclassified && runtime_idx) {
    report.vuln_class = table.classify(lines[*runtime_idx]);
  }
  if (report.vuln_class == VulnClass::Unclassified && summary_idx) {
    report.vuln_class = table.classify(lines[*summary_idx]);
  }

  static const std::regex addr_patterns[] = {
      std::regex(R"(address (0x[0-9a-fA-F]+))"),
      std::regex(R"(double-free on (0x[0-9a-fA-F]+))"),
      std::regex(R"(: (0x[0-9a-fA-F]+) in thread)"),
  };
  for (const auto& re : addr_patterns) {
    if (std::regex_search(report.summary_line, m, re)) {
      report.fault_address = parse_hex(m[1].str());
      break;
    }
  }

  // Frame collection between the first header and the SUMMARY line.
  std::size_t begin = error_idx ? *error_idx : summary_idx ? *summary_idx : *runtime_idx;
  if (runtime_idx) begin = std::min(begin, *runtime_idx);
  std::size_t end = lines.size();
  if (summary_idx && *summary_idx > begin) end = *summary_idx;

  std::string section = "primary";
  std::vector<StackFrame>* current = &report.primary_trace;
  std::map<std::string, int> section_counts;
  bool leak_primary_taken = false;

  auto open_section = [&](const std::string& name) {
    if (name == "leak" && !leak_primary_taken && report.primary_trace.empty()) {
      leak_primary_taken = true;
      current = &report.primary_trace;
      return;
    }
    int n = ++section_counts[name];
    std::string key = name;
    if (name == "leak") key = "leak-" + std::to_string(n + 1);
    else if (n > 1) key += "-" + std::to_string(n);
    report.auxiliary_traces.emplace_back(key, std::vector<StackFrame>{});
    current = &report.auxiliary_traces.back().second;
  };

  for (std::size_t i = begin; i < end; ++i) {
    const auto& line = lines[i];
    if (contains(line, "Shadow bytes around")) break;
    if (auto sec = section_for(line)) {
      open_section(*sec);
      continue;
    }
    auto frame = parse_frame_line(line);
    if (!frame) continue;
    if (!current->empty()) {
      if (frame->index == 0) {
        open_section("trace");
      } else if (frame->index <= current->back().index) {
        continue;
      }
    }
    normalize_path(*frame, options);
    current->push_back(std::move(*frame));
  }
  // Drop sections that never received frames.
  std::erase_if(report.auxiliary_traces,
                [](const auto& t) { return t.second.empty(); });

  if (report.primary_trace.empty() && report.vuln_class != VulnClass::Unclassified) {
    std::optional<StackFrame> fallback;
    if (summary_idx) fallback = frame_from_summary(lines[*summary_idx]);
    if (!fallback && runtime_idx &&
        std::regex_search(lines[*runtime_idx], m, runtime_error_regex())) {
      StackFrame f;
      f.file = m[1].str();
      f.line = to_unsigned(m[2].str());
      f.column = to_unsigned(m[3].str());
      fallback = f;
    }
    if (fallback) {
      normalize_path(*fallback, options);
      report.primary_trace.push_back(std::move(*fallback));
    } else {
      report.vuln_class = VulnClass::Unclassified;
    }
  }
  return report;
}

bool is_runtime_frame(const StackFrame& f) {
  static constexpr std::string_view kRuntimeFunctions[] = {
      "__interceptor_", "___interceptor_", "__asan", "__sanitizer", "__lsan",
      "__ubsan", "__msan", "__libc_", "_start", "operator new",
      "operator delete", "__GI_", "__strcpy", "__memcpy", "__memmove",
  };
  static constexpr std::string_view kRuntimePaths[] = {
      "libsanitizer", "compiler-rt", "sysdeps/", "csu/", "/usr/include/",
      "/usr/lib/", "glibc", "libc-start",
  };
  static constexpr std::string_view kRuntimeModules[] = {
      "libasan", "libubsan", "liblsan", "libmsan", "libclang_rt", "libc.so",
      "libstdc++", "ld-linux",
  };
  for (auto p : kRuntimeFunctions) {
    if (starts_with(f.function, p)) return true;
  }
  if (f.file) {
    for (auto p : kRuntimePaths) {
      if (contains(*f.file, p)) return true;
    }
  }
  if (f.binary_offset) {
    for (auto p : kRuntimeModules) {
      if (contains(*f.binary_offset, p)) return true;
    }
  }
  return false;
}

StackFrame trapping_frame(const SanitizerReport& report,
                          const std::optional<fs::path>& project_root) {
  if (report.primary_trace.empty()) {
    throw Error(ErrorCode::EmptyTrace, "primary trace is empty");
  }
  for (const auto& f : report.primary_trace) {
    if (!f.file || is_runtime_frame(f)) continue;
    fs::path p(*f.file);
    if (project_root) {
      if (p.is_absolute() ? relative_under(p, *project_root).has_value()
                          : !starts_with(*f.file, "..")) {
        return f;
      }
    } else if (!starts_with(*f.file, "/usr/") && !starts_with(*f.file, "..")) {
      return f;
    }
  }
  return report.primary_trace.front();
}

}  // namespace tracefix
