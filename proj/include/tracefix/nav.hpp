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

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tracefix/process.hpp"

namespace tracefix {

// ---- Compilation database --------------------------------------------------

struct CompileCommand {
  std::filesystem::path directory;
  std::vector<std::string> arguments;
  std::filesystem::path file;
  std::optional<std::filesystem::path> output;

  bool operator==(const CompileCommand&) const = default;
};

struct CaptureOptions {
  // Driver names intercepted on PATH.
  std::vector<std::string> compilers = {"cc", "gcc", "clang", "c++", "g++", "clang++"};
  std::chrono::milliseconds timeout{600000};
  std::vector<std::string> env;  // empty: the hermetic environment
};

// Runs `build_command` (through /bin/sh, in `root`) with compiler shims
// first on PATH; each shim logs its invocation and execs the real compiler
// with unchanged arguments, so build outputs are identical to an
// unwrapped build. Writes root/compile_commands.json (entries sorted by
// file, then directory) and returns the entries. Throws
// Error{BuildFailed} with the exit status and stderr tail.
std::vector<CompileCommand> capture_compile_db(const std::filesystem::path& root,
                                               const std::string& build_command,
                                               const CaptureOptions& options = {});

nlohmann::json to_json(const std::vector<CompileCommand>& db);
std::vector<CompileCommand> compile_db_from_json(const nlohmann::json& doc);

// ---- Source views ----------------------------------------------------------

inline constexpr unsigned kDefaultViewRadius = 30;
inline constexpr unsigned kMaxViewRadius = 200;

struct SourceView {
  std::filesystem::path path;  // relative to the root
  unsigned first_line = 0;     // 1-based, inclusive; 0 for an empty file
  unsigned last_line = 0;
  std::string text;            // "<line>\t<text>\n" per line
  bool elided = false;         // the requested radius was clamped

  bool operator==(const SourceView&) const = default;
};

// Lines [line - radius, line + radius] of `path` (clamped to the file).
// Throws Error{PathEscapesRoot} for paths resolving outside `root` (symlinks
// included) and Error{NoSuchFile}.
SourceView view_source(const std::filesystem::path& root, const std::filesystem::path& path,
                       unsigned line, unsigned radius = kDefaultViewRadius);

// ---- Symbols ---------------------------------------------------------------

enum class LocationKind { Definition, Reference };

struct SymbolLocation {
  std::filesystem::path path;  // relative to the root
  unsigned line = 0;           // 1-based
  unsigned column = 0;         // 1-based
  LocationKind kind = LocationKind::Reference;
  bool low_confidence = false;  // textual match, not a language-server answer

  bool operator==(const SymbolLocation&) const = default;
};

struct LspOptions {
  std::vector<std::string> server_argv = {"clangd", "--background-index=false",
                                          "--log=error"};
  std::chrono::milliseconds timeout{20000};
  // Source occurrences tried as query positions before giving up.
  std::size_t max_probe_sites = 5;
};

// Minimal LSP client over stdio (JSON-RPC with Content-Length framing).
class LspClient {
 public:
  // Spawns and initializes the server. Throws Error{ServerUnavailable}.
  LspClient(const std::filesystem::path& root, const LspOptions& options);
  ~LspClient();
  LspClient(const LspClient&) = delete;
  LspClient& operator=(const LspClient&) = delete;

  // Zero-based positions, as on the wire.
  std::vector<SymbolLocation> definition(const std::filesystem::path& file, unsigned line,
                                         unsigned character);
  std::vector<SymbolLocation> references(const std::filesystem::path& file, unsigned line,
                                         unsigned character);

 private:
  nlohmann::json request(const std::string& method, nlohmann::json params);
  void notify(const std::string& method, nlohmann::json params);
  void send(const nlohmann::json& message);
  nlohmann::json read_message(std::chrono::steady_clock::time_point deadline);
  void open_document(const std::filesystem::path& file);
  std::vector<SymbolLocation> locations(const nlohmann::json& result, LocationKind kind);

  std::filesystem::path root_;
  LspOptions options_;
  Subprocess proc_;
  long next_id_ = 1;
  std::vector<std::filesystem::path> opened_;
};

// Word-boundary textual search over C/C++ sources; results are marked
// low-confidence, with definition-looking lines first.
std::vector<SymbolLocation> grep_symbol(const std::filesystem::path& root,
                                        const std::string& symbol);

// Definitions then references via the language server; falls back to
// grep_symbol() when the server is unavailable. Unknown symbols give an
// empty list.
std::vector<SymbolLocation> resolve_symbol(const std::filesystem::path& root,
                                           const std::string& symbol,
                                           const LspOptions& options = {});

}  // namespace tracefix
