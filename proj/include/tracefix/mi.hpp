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

#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

// Minimal GDB/MI output-record parser.
namespace tracefix::mi {

enum class RecordType {
  Console,   // ~"..."
  Target,    // @"..."
  Log,       // &"..."
  Result,    // [token]^class,results
  Exec,      // [token]*class,results
  Status,    // [token]+class,results
  Notify,    // [token]=class,results
  Prompt,    // (gdb)
  Other,     // anything else: inferior output sharing the terminal
};

struct Record {
  RecordType type = RecordType::Other;
  std::optional<unsigned long> token;
  std::string klass;      // "done", "stopped", ...
  nlohmann::json results = nlohmann::json::object();
  std::string text;       // unescaped stream text, or the raw line for Other
};

// Never throws: lines that do not parse as MI come back as Other.
Record parse_record(std::string_view line);

// C-string literal ("...") unescape; `pos` is advanced past the closing
// quote. Returns nullopt on malformed input.
std::optional<std::string> parse_c_string(std::string_view s, std::size_t& pos);

// Quotes `s` as an MI c-string.
std::string quote(std::string_view s);

}  // namespace tracefix::mi
