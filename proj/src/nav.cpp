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

#include "tracefix/nav.hpp"

#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <regex>
#include <cctype>
#include <set>
#include <sstream>
#include <tuple>

#include "tracefix/environment.hpp"
#include "tracefix/error.hpp"
#include "tracefix/util.hpp"

namespace tracefix {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

// ---- Compilation database --------------------------------------------------

namespace {

std::string sh_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

bool is_source_file(const std::string& arg) {
  static const std::set<std::string> exts = {".c", ".cc", ".cpp", ".cxx", ".c++",
                                             ".C", ".m",  ".mm",  ".cp"};
  return exts.count(fs::path(arg).extension().string()) > 0;
}

// Options whose value is the next argument.
bool takes_value(const std::string& arg) {
  static const std::set<std::string> opts = {
      "-o",        "-I",       "-D",       "-U",        "-include", "-imacros",
      "-isystem",  "-iquote",  "-idirafter", "-MF",     "-MT",      "-MQ",
      "-x",        "-L",       "-Xlinker", "-Xpreprocessor", "-Xassembler",
      "-aux-info", "--param",  "-arch",    "-target",   "-isysroot"};
  return opts.count(arg) > 0;
}

fs::path make_temp_dir(const std::string& tag) {
  std::string tmpl = (fs::temp_directory_path() / ("tracefix-" + tag + "-XXXXXX")).string();
  if (!::mkdtemp(tmpl.data())) {
    throw Error(ErrorCode::Io, "cannot create temporary directory: " + std::string(std::strerror(errno)));
  }
  return tmpl;
}

struct TempTree {
  fs::path path;
  ~TempTree() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::vector<CompileCommand> entries_from_invocation(const std::vector<std::string>& fields) {
  std::vector<CompileCommand> out;
  if (fields.size() < 2) return out;
  const fs::path dir = fields[0];
  std::vector<std::string> args(fields.begin() + 1, fields.end());
  std::vector<std::string> sources;
  std::optional<fs::path> output;
  bool preprocess_only = false;
  for (std::size_t i = 1; i < args.size(); ++i) {
    const auto& a = args[i];
    if (a == "-E" || a == "-M" || a == "-MM") preprocess_only = true;
    if (a == "-o" && i + 1 < args.size()) {
      output = args[i + 1];
    }
    if (takes_value(a)) {
      ++i;
      continue;
    }
    if (!a.empty() && a[0] != '-' && is_source_file(a)) sources.push_back(a);
  }
  if (preprocess_only) return out;
  for (const auto& src : sources) {
    CompileCommand c;
    c.directory = dir;
    c.arguments = args;
    fs::path f = src;
    c.file = (f.is_absolute() ? f : dir / f).lexically_normal();
    if (output) c.output = output->is_absolute() ? *output : (dir / *output).lexically_normal();
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

json to_json(const std::vector<CompileCommand>& db) {
  json arr = json::array();
  for (const auto& c : db) {
    json e = {{"directory", c.directory.string()},
              {"arguments", c.arguments},
              {"file", c.file.string()}};
    if (c.output) e["output"] = c.output->string();
    arr.push_back(std::move(e));
  }
  return arr;
}

std::vector<CompileCommand> compile_db_from_json(const json& doc) {
  std::vector<CompileCommand> db;
  if (!doc.is_array()) throw Error(ErrorCode::InvalidConfig, "compile db must be an array");
  for (const auto& e : doc) {
    CompileCommand c;
    c.directory = e.at("directory").get<std::string>();
    c.file = e.at("file").get<std::string>();
    if (e.contains("arguments")) {
      c.arguments = e["arguments"].get<std::vector<std::string>>();
    } else if (e.contains("command")) {
      std::istringstream in(e["command"].get<std::string>());
      for (std::string w; in >> w;) c.arguments.push_back(w);
    }
    if (e.contains("output")) c.output = fs::path(e["output"].get<std::string>());
    db.push_back(std::move(c));
  }
  return db;
}

std::vector<CompileCommand> capture_compile_db(const fs::path& root_in,
                                               const std::string& build_command,
                                               const CaptureOptions& options) {
  const fs::path root = fs::absolute(root_in).lexically_normal();
  std::vector<std::string> env = options.env.empty() ? hermetic_environment() : options.env;
  const std::string path_env = env_lookup(env, "PATH").value_or("/usr/bin:/bin");

  TempTree tmp{make_temp_dir("cdb")};
  const fs::path shim_dir = tmp.path / "bin";
  const fs::path log_dir = tmp.path / "log";
  fs::create_directories(shim_dir);
  fs::create_directories(log_dir);

  for (const auto& name : options.compilers) {
    auto real = find_executable(name, path_env);
    if (!real) continue;
    std::string script =
        "#!/bin/sh\n"
        "f=$(mktemp " + sh_quote((log_dir / "inv.XXXXXXXX").string()) + " 2>/dev/null) && \\\n"
        "  printf '%s\\000' \"$PWD\" " + sh_quote(name) + " \"$@\" > \"$f\"\n"
        "exec " + sh_quote(real->string()) + " \"$@\"\n";
    write_file_atomic(shim_dir / name, script);
    fs::permissions(shim_dir / name, fs::perms::owner_all | fs::perms::group_read |
                                         fs::perms::group_exec | fs::perms::others_read |
                                         fs::perms::others_exec);
  }
  env_set(env, "PATH", shim_dir.string() + ":" + path_env);

  ProcessSpec spec = shell_spec(build_command);
  spec.cwd = root;
  spec.env = env;
  spec.timeout = options.timeout;
  spec.stdout_cap = 256 * 1024;
  spec.stderr_cap = 256 * 1024;
  auto res = run_process(spec);
  if (!res.ok()) {
    std::string tail = res.err.size() > 4096 ? res.err.substr(res.err.size() - 4096) : res.err;
    std::string status = res.timed_out ? "timed out"
                         : res.term_signal ? "killed by signal " + std::to_string(res.term_signal)
                                           : "exit status " + std::to_string(res.exit_code);
    throw Error(ErrorCode::BuildFailed, "build failed (" + status + "): " + tail);
  }

  std::vector<CompileCommand> db;
  std::vector<fs::path> logs;
  for (const auto& e : fs::directory_iterator(log_dir)) logs.push_back(e.path());
  std::sort(logs.begin(), logs.end());
  for (const auto& log : logs) {
    std::string data = read_file(log);
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data[i] == '\0') {
        fields.emplace_back(data.substr(start, i - start));
        start = i + 1;
      }
    }
    for (auto& c : entries_from_invocation(fields)) db.push_back(std::move(c));
  }
  auto key = [](const CompileCommand& c) {
    return std::make_tuple(c.file.string(), c.directory.string(),
                           c.output.value_or("").string(), c.arguments);
  };
  std::sort(db.begin(), db.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
  db.erase(std::unique(db.begin(), db.end()), db.end());
  write_file_atomic(root / "compile_commands.json", to_json(db).dump(2) + "\n");
  return db;
}

// ---- Source views ----------------------------------------------------------

namespace {

// Canonical location of `path` under `root`, or PathEscapesRoot.
std::pair<fs::path, fs::path> contained_path(const fs::path& root, const fs::path& path) {
  std::error_code ec;
  fs::path canon_root = fs::weakly_canonical(fs::absolute(root), ec);
  fs::path candidate = path.is_absolute() ? path : fs::absolute(root) / path;
  fs::path canon = fs::weakly_canonical(candidate, ec);
  auto rel = relative_under(canon, canon_root);
  if (!rel) {
    throw Error(ErrorCode::PathEscapesRoot, "path escapes the project root: " + path.string());
  }
  return {canon, *rel};
}

}  // namespace

SourceView view_source(const fs::path& root, const fs::path& path, unsigned line,
                       unsigned radius) {
  auto [abs, rel] = contained_path(root, path);
  std::error_code ec;
  if (!fs::is_regular_file(abs, ec)) {
    throw Error(ErrorCode::NoSuchFile, "no such file: " + path.string());
  }
  auto text = try_read_file(abs);
  if (!text) throw Error(ErrorCode::NoSuchFile, "cannot read " + path.string());

  SourceView view;
  view.path = rel;
  if (radius > kMaxViewRadius) {
    radius = kMaxViewRadius;
    view.elided = true;
  }
  auto lines = split_lines(*text);
  if (lines.empty()) return view;
  const unsigned n = static_cast<unsigned>(lines.size());
  line = std::clamp(line, 1u, n);
  view.first_line = line > radius ? line - radius : 1;
  view.last_line = std::min(n, line + radius);
  for (unsigned i = view.first_line; i <= view.last_line; ++i) {
    view.text += std::to_string(i) + "\t" + lines[i - 1] + "\n";
  }
  return view;
}

// ---- Grep fallback ---------------------------------------------------------

namespace {

bool is_c_family(const fs::path& p) {
  static const std::set<std::string> exts = {".c",  ".h",  ".cc", ".cpp", ".cxx", ".hpp",
                                             ".hh", ".hxx", ".C", ".inc", ".ipp"};
  return exts.count(p.extension().string()) > 0;
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Last component of a possibly qualified name; empty when not an identifier.
std::string bare_identifier(const std::string& symbol) {
  std::string s = symbol;
  if (auto p = s.rfind("::"); p != std::string::npos) s = s.substr(p + 2);
  static const std::regex ident(R"([A-Za-z_][A-Za-z0-9_]*)");
  return std::regex_match(s, ident) ? s : std::string();
}

bool looks_like_definition(const std::string& line, const std::string& sym) {
  const std::string w = "\\b" + sym + "\\b";
  std::string_view t = rtrim(line);
  if (std::regex_search(line, std::regex(R"(^\s*#\s*define\s+)" + sym + R"(\b)"))) return true;
  if (std::regex_search(line, std::regex(R"(\b(struct|union|enum|class)\s+)" + sym +
                                         R"(\s*(\{|$|:))"))) {
    return true;
  }
  if (std::regex_search(line, std::regex(R"(^\s*typedef\b.*)" + w + R"(\s*;)"))) return true;
  if (line.empty() || std::isspace(static_cast<unsigned char>(line[0]))) return false;
  if (starts_with(line, "extern")) return false;
  // Function definition at column 0: not a prototype.
  if (std::regex_search(line, std::regex(w + R"(\s*\()")) && !t.empty() && t.back() != ';') {
    return true;
  }
  // File-scope variable.
  return std::regex_search(line, std::regex(R"(^[A-Za-z_][^()]*)" + w + R"(\s*(=|;|\[))"));
}

}  // namespace

std::vector<SymbolLocation> grep_symbol(const fs::path& root, const std::string& symbol) {
  std::vector<SymbolLocation> defs, refs;
  const std::string sym = bare_identifier(symbol);
  if (sym.empty()) return {};
  std::error_code ec;
  const fs::path base = fs::absolute(root).lexically_normal();
  std::vector<fs::path> files;
  for (auto it = fs::recursive_directory_iterator(
           base, fs::directory_options::skip_permission_denied, ec);
       it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (ec) break;
    const auto name = it->path().filename().string();
    if (it->is_directory(ec) && !name.empty() && name[0] == '.') {
      it.disable_recursion_pending();
      continue;
    }
    if (it->is_regular_file(ec) && is_c_family(it->path())) files.push_back(it->path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    auto text = try_read_file(f);
    if (!text) continue;
    auto lines = split_lines(*text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const auto& l = lines[i];
      for (std::size_t pos = l.find(sym); pos != std::string::npos; pos = l.find(sym, pos + 1)) {
        bool left = pos == 0 || !is_ident_char(l[pos - 1]);
        bool right = pos + sym.size() >= l.size() || !is_ident_char(l[pos + sym.size()]);
        if (!left || !right) continue;
        SymbolLocation loc;
        loc.path = f.lexically_relative(base);
        loc.line = static_cast<unsigned>(i + 1);
        loc.column = static_cast<unsigned>(pos + 1);
        loc.low_confidence = true;
        loc.kind = looks_like_definition(l, sym) ? LocationKind::Definition
                                                 : LocationKind::Reference;
        (loc.kind == LocationKind::Definition ? defs : refs).push_back(loc);
        break;  // first occurrence per line
      }
    }
  }
  defs.insert(defs.end(), refs.begin(), refs.end());
  if (defs.size() > 200) defs.resize(200);
  return defs;
}

// ---- LSP client ------------------------------------------------------------

namespace {

std::string file_uri(const fs::path& p) {
  std::string out = "file://";
  for (char c : fs::absolute(p).lexically_normal().string()) {
    switch (c) {
      case ' ': out += "%20"; break;
      case '%': out += "%25"; break;
      case '#': out += "%23"; break;
      case '?': out += "%3F"; break;
      default: out += c;
    }
  }
  return out;
}

std::optional<fs::path> uri_path(const std::string& uri) {
  if (!starts_with(uri, "file://")) return std::nullopt;
  std::string out;
  for (std::size_t i = 7; i < uri.size(); ++i) {
    if (uri[i] == '%' && i + 2 < uri.size()) {
      out += static_cast<char>(std::stoi(uri.substr(i + 1, 2), nullptr, 16));
      i += 2;
    } else {
      out += uri[i];
    }
  }
  return fs::path(out);
}

[[noreturn]] void unavailable(const std::string& why) {
  throw Error(ErrorCode::ServerUnavailable, "language server unavailable: " + why);
}

}  // namespace

LspClient::LspClient(const fs::path& root, const LspOptions& options)
    : root_(fs::absolute(root).lexically_normal()), options_(options) {
  if (options.server_argv.empty()) unavailable("no server configured");
  try {
    proc_ = Subprocess::spawn(options.server_argv, std::nullopt, root_, /*merge_stderr=*/false);
  } catch (const Error& e) {
    unavailable(e.what());
  }
  json caps = {{"textDocument",
                {{"definition", {{"linkSupport", false}}}, {"references", json::object()}}}};
  request("initialize", {{"processId", ::getpid()},
                         {"rootUri", file_uri(root_)},
                         {"capabilities", caps}});
  notify("initialized", json::object());
}

LspClient::~LspClient() {
  try {
    if (proc_.running()) {
      options_.timeout = std::chrono::milliseconds(2000);
      request("shutdown", nullptr);
      notify("exit", nullptr);
    }
  } catch (...) {
  }
  proc_.terminate();
}

void LspClient::send(const json& message) {
  std::string body = message.dump();
  std::string frame = "Content-Length: " + std::to_string(body.size()) + "\r\n\r\n" + body;
  if (!proc_.write(frame)) unavailable("server closed its input");
}

json LspClient::read_message(Clock::time_point deadline) {
  std::optional<std::size_t> length;
  for (;;) {
    auto r = proc_.read_line(deadline);
    if (r.status == Subprocess::ReadStatus::Eof) unavailable("server exited");
    if (r.status == Subprocess::ReadStatus::Timeout) unavailable("server timed out");
    if (r.line.empty()) {
      if (length) break;
      continue;
    }
    static const std::string kLen = "content-length:";
    std::string lower = r.line;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (starts_with(lower, kLen)) {
      try {
        length = std::stoul(std::string(trim(lower.substr(kLen.size()))));
      } catch (...) {
        unavailable("bad Content-Length header");
      }
    }
  }
  auto body = proc_.read_exact(*length, deadline);
  if (!body) unavailable("truncated message");
  try {
    return json::parse(*body);
  } catch (const json::exception&) {
    unavailable("malformed JSON from server");
  }
}

void LspClient::notify(const std::string& method, json params) {
  json msg = {{"jsonrpc", "2.0"}, {"method", method}};
  if (!params.is_null()) msg["params"] = std::move(params);
  send(msg);
}

json LspClient::request(const std::string& method, json params) {
  const long id = next_id_++;
  json msg = {{"jsonrpc", "2.0"}, {"id", id}, {"method", method}};
  if (!params.is_null()) msg["params"] = std::move(params);
  send(msg);
  auto deadline = Clock::now() + options_.timeout;
  for (;;) {
    json in = read_message(deadline);
    if (in.contains("method")) {
      // Server-to-client request: acknowledge with an empty result.
      if (in.contains("id")) send({{"jsonrpc", "2.0"}, {"id", in["id"]}, {"result", nullptr}});
      continue;
    }
    if (in.value("id", json()) != json(id)) continue;
    if (in.contains("error")) return json();
    return in.value("result", json());
  }
}

void LspClient::open_document(const fs::path& file) {
  fs::path abs = file.is_absolute() ? file : root_ / file;
  if (std::find(opened_.begin(), opened_.end(), abs) != opened_.end()) return;
  auto text = try_read_file(abs);
  if (!text) throw Error(ErrorCode::NoSuchFile, "no such file: " + file.string());
  std::string ext = abs.extension().string();
  std::string lang = (ext == ".c" || ext == ".h") ? "c" : "cpp";
  notify("textDocument/didOpen", {{"textDocument",
                                   {{"uri", file_uri(abs)},
                                    {"languageId", lang},
                                    {"version", 1},
                                    {"text", sanitize_utf8(*text)}}}});
  opened_.push_back(abs);
}

std::vector<SymbolLocation> LspClient::locations(const json& result, LocationKind kind) {
  std::vector<SymbolLocation> out;
  json items = result.is_array() ? result : (result.is_object() ? json::array({result})
                                                                : json::array());
  for (const auto& item : items) {
    std::string uri = item.contains("targetUri") ? item.value("targetUri", "")
                                                 : item.value("uri", "");
    const json& range = item.contains("targetSelectionRange") ? item["targetSelectionRange"]
                                                              : item.value("range", json());
    auto p = uri_path(uri);
    if (!p || !range.is_object()) continue;
    auto rel = relative_under(p->lexically_normal(), root_);
    if (!rel) continue;  // system headers and the like
    SymbolLocation loc;
    loc.path = *rel;
    loc.line = range["start"].value("line", 0u) + 1;
    loc.column = range["start"].value("character", 0u) + 1;
    loc.kind = kind;
    out.push_back(std::move(loc));
  }
  return out;
}

std::vector<SymbolLocation> LspClient::definition(const fs::path& file, unsigned line,
                                                  unsigned character) {
  open_document(file);
  fs::path abs = file.is_absolute() ? file : root_ / file;
  auto result = request("textDocument/definition",
                        {{"textDocument", {{"uri", file_uri(abs)}}},
                         {"position", {{"line", line}, {"character", character}}}});
  return locations(result, LocationKind::Definition);
}

std::vector<SymbolLocation> LspClient::references(const fs::path& file, unsigned line,
                                                  unsigned character) {
  open_document(file);
  fs::path abs = file.is_absolute() ? file : root_ / file;
  auto result = request("textDocument/references",
                        {{"textDocument", {{"uri", file_uri(abs)}}},
                         {"position", {{"line", line}, {"character", character}}},
                         {"context", {{"includeDeclaration", false}}}});
  return locations(result, LocationKind::Reference);
}

std::vector<SymbolLocation> resolve_symbol(const fs::path& root, const std::string& symbol,
                                           const LspOptions& options) {
  auto sites = grep_symbol(root, symbol);
  if (sites.empty()) return {};
  try {
    LspClient client(root, options);
    std::size_t probes = 0;
    for (const auto& site : sites) {
      if (probes++ >= options.max_probe_sites) break;
      auto defs = client.definition(site.path, site.line - 1, site.column - 1);
      if (defs.empty()) continue;
      const auto& d = defs.front();
      auto refs = client.references(d.path, d.line - 1, d.column - 1);
      std::vector<SymbolLocation> out = defs;
      for (auto& r : refs) {
        bool dup = std::any_of(defs.begin(), defs.end(), [&](const SymbolLocation& x) {
          return x.path == r.path && x.line == r.line;
        });
        if (!dup) out.push_back(std::move(r));
      }
      return out;
    }
    return {};
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ServerUnavailable) throw;
    return sites;
  }
}

}  // namespace tracefix
