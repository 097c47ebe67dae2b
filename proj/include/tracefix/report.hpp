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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tracefix {

enum class VulnClass {
  HeapBufferOverflow,
  StackBufferOverflow,
  GlobalBufferOverflow,
  UseAfterFree,
  DoubleFree,
  NullDereference,
  MemoryLeak,
  UseOfUninitialized,
  IntegerOverflowUB,
  Segv,
  Unclassified,
};

inline constexpr VulnClass kAllVulnClasses[] = {
    VulnClass::HeapBufferOverflow, VulnClass::StackBufferOverflow,
    VulnClass::GlobalBufferOverflow, VulnClass::UseAfterFree,
    VulnClass::DoubleFree,         VulnClass::NullDereference,
    VulnClass::MemoryLeak,         VulnClass::UseOfUninitialized,
    VulnClass::IntegerOverflowUB,  VulnClass::Segv,
    VulnClass::Unclassified,
};

std::string_view to_string(VulnClass c);
// Lowercase sanitizer-style name ("heap-buffer-overflow", ...).
std::string_view display_name(VulnClass c);
std::optional<VulnClass> vuln_class_from_string(std::string_view name);

enum class SanitizerTool { Address, Leak, UndefinedBehavior, Memory };

std::string_view to_string(SanitizerTool t);

struct StackFrame {
  unsigned index = 0;
  std::string function = "<unknown>";
  std::optional<std::string> file;
  std::optional<unsigned> line;
  std::optional<unsigned> column;
  std::optional<std::string> binary_offset;  // "module+0xoff"

  bool operator==(const StackFrame&) const = default;
};

std::string render_frame(const StackFrame& f);

struct SanitizerReport {
  std::string raw_text;
  SanitizerTool tool = SanitizerTool::Address;
  VulnClass vuln_class = VulnClass::Unclassified;
  std::optional<std::uint64_t> fault_address;
  std::vector<StackFrame> primary_trace;
  // Ordered by appearance; names such as "freed-by", "allocated-by".
  std::vector<std::pair<std::string, std::vector<StackFrame>>> auxiliary_traces;
  std::string summary_line;

  const std::vector<StackFrame>* auxiliary(std::string_view name) const;
};

struct ParseOptions {
  // When set, frame paths under the root are rewritten project-relative.
  std::optional<std::filesystem::path> project_root;
  // Build-directory prefixes (e.g. compilation-database working dirs) whose
  // relative paths are re-anchored at the project root.
  std::vector<std::filesystem::path> strip_prefixes;
};

// Keyword table mapping sanitizer strings to classes. The built-in table is
// the versioned data/keywords.json manifest.
class KeywordTable {
 public:
  struct Entry {
    std::string keyword;
    VulnClass vuln_class;
  };

  static const KeywordTable& builtin();
  static KeywordTable from_json(std::string_view json_text);

  // Longest keyword found in `text` (at word boundaries); Unclassified when
  // none matches.
  VulnClass classify(std::string_view text) const;

  const std::vector<Entry>& entries() const { return entries_; }
  const std::string& version() const { return version_; }

 private:
  std::vector<Entry> entries_;
  std::string version_;
};

// Throws Error{NoErrorHeader} when no sanitizer header is present.
SanitizerReport parse_report(std::string_view text,
                             const ParseOptions& options = {});

VulnClass classify(std::string_view header_line);

// Innermost frame that belongs to the project (runtime, interceptor and libc
// frames skipped); frame 0 when none qualifies. Throws Error{EmptyTrace}.
StackFrame trapping_frame(const SanitizerReport& report,
                          const std::optional<std::filesystem::path>&
                              project_root = std::nullopt);

bool is_runtime_frame(const StackFrame& f);

}  // namespace tracefix
