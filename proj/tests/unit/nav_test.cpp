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

#include <gtest/gtest.h>

#include <fstream>

#include "test_support.hpp"
#include "tracefix/error.hpp"
#include "tracefix/nav.hpp"
#include "tracefix/process.hpp"
#include "tracefix/util.hpp"

namespace tracefix {
namespace {

using testing::TempDir;
using testing::write_text;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::Io;
}

// ---- view_source -----------------------------------------------------------

// Independent rendering of a window for comparison.
std::string expected_window(const fs::path& file, unsigned first, unsigned last) {
  std::ifstream in(file);
  std::string line, out;
  for (unsigned n = 1; std::getline(in, line); ++n) {
    if (n >= first && n <= last) out += std::to_string(n) + "\t" + line + "\n";
  }
  return out;
}

void write_numbered(const fs::path& p, int n) {
  std::string text;
  for (int i = 1; i <= n; ++i) text += "line " + std::to_string(i) + " text\n";
  write_text(p, text);
}

TEST(ViewSource, DefaultRadius) {
  TempDir dir("view");
  write_numbered(dir / "src/a.c", 500);
  auto v = view_source(dir.path(), "src/a.c", 100);
  EXPECT_EQ(v.first_line, 70u);
  EXPECT_EQ(v.last_line, 130u);
  EXPECT_FALSE(v.elided);
  EXPECT_EQ(v.path, fs::path("src/a.c"));
  EXPECT_EQ(v.text, expected_window(dir / "src/a.c", 70, 130));
  EXPECT_EQ(v.text.substr(0, v.text.find('\n')), "70\tline 70 text");
}

TEST(ViewSource, ClampsToFileBounds) {
  TempDir dir("view");
  write_numbered(dir / "a.c", 20);
  auto v = view_source(dir.path(), "a.c", 3, 5);
  EXPECT_EQ(v.first_line, 1u);
  EXPECT_EQ(v.last_line, 8u);
  auto end = view_source(dir.path(), "a.c", 999, 2);
  EXPECT_EQ(end.first_line, 18u);
  EXPECT_EQ(end.last_line, 20u);
  EXPECT_FALSE(end.elided);
}

TEST(ViewSource, RadiusCapSetsElided) {
  TempDir dir("view");
  write_numbered(dir / "a.c", 1000);
  auto v = view_source(dir.path(), "a.c", 500, 450);
  EXPECT_TRUE(v.elided);
  EXPECT_EQ(v.first_line, 500u - kMaxViewRadius);
  EXPECT_EQ(v.last_line, 500u + kMaxViewRadius);
  EXPECT_EQ(v.text, expected_window(dir / "a.c", 300, 700));
}

TEST(ViewSource, PreservesTabsAndBlankLines) {
  TempDir dir("view");
  write_text(dir / "a.c", "int f(void) {\n\n\treturn 1;\n}\n");
  auto v = view_source(dir.path(), "a.c", 2, 1);
  EXPECT_EQ(v.text, "1\tint f(void) {\n2\t\n3\t\treturn 1;\n");
}

TEST(ViewSource, EmptyFile) {
  TempDir dir("view");
  write_text(dir / "e.c", "");
  auto v = view_source(dir.path(), "e.c", 1);
  EXPECT_EQ(v.text, "");
  EXPECT_EQ(v.first_line, 0u);
}

TEST(ViewSource, RejectsEscapes) {
  TempDir dir("view");
  fs::create_directories(dir / "proj");
  write_text(dir / "outside.c", "secret\n");
  fs::create_symlink(dir / "outside.c", dir / "proj/link.c");
  const fs::path root = dir / "proj";
  EXPECT_EQ(code_of([&] { view_source(root, "../outside.c", 1); }), ErrorCode::PathEscapesRoot);
  EXPECT_EQ(code_of([&] { view_source(root, dir / "outside.c", 1); }), ErrorCode::PathEscapesRoot);
  EXPECT_EQ(code_of([&] { view_source(root, "link.c", 1); }), ErrorCode::PathEscapesRoot);
  EXPECT_EQ(code_of([&] { view_source(root, "/etc/passwd", 1); }), ErrorCode::PathEscapesRoot);
  EXPECT_EQ(code_of([&] { view_source(root, "missing.c", 1); }), ErrorCode::NoSuchFile);
  EXPECT_EQ(code_of([&] { view_source(root, ".", 1); }), ErrorCode::NoSuchFile);
}

TEST(ViewSource, AbsolutePathInsideRoot) {
  TempDir dir("view");
  write_numbered(dir / "a.c", 5);
  auto v = view_source(dir.path(), dir / "a.c", 1, 1);
  EXPECT_EQ(v.path, fs::path("a.c"));
}

// ---- compile db capture ----------------------------------------------------

TEST(CompileDb, CapturesInvocations) {
  if (!testing::have_tool("cc")) GTEST_SKIP();
  TempDir dir("cdb");
  write_text(dir / "a.c", "int a(void) { return 1; }\n");
  write_text(dir / "b.c", "int b(void) { return 2; }\n");
  write_text(dir / "sub/c.c", "int main(void) { return 0; }\n");
  auto db = capture_compile_db(
      dir.path(),
      "cc -DX=1 -c a.c b.c && cc -E a.c > /dev/null && (cd sub && cc -O1 -o c.o -c c.c) && "
      "cc -o app a.o b.o sub/c.o");
  ASSERT_EQ(db.size(), 3u);
  EXPECT_EQ(db[0].file, dir / "a.c");
  EXPECT_EQ(db[1].file, dir / "b.c");
  EXPECT_EQ(db[2].file, dir / "sub/c.c");
  EXPECT_EQ(db[2].directory, dir / "sub");
  EXPECT_EQ(db[0].arguments,
            (std::vector<std::string>{"cc", "-DX=1", "-c", "a.c", "b.c"}));
  ASSERT_TRUE(db[2].output);
  EXPECT_EQ(*db[2].output, dir / "sub/c.o");

  auto on_disk = nlohmann::json::parse(read_file(dir / "compile_commands.json"));
  EXPECT_EQ(compile_db_from_json(on_disk), db);
  for (const auto& e : on_disk) {
    EXPECT_TRUE(e.contains("directory"));
    EXPECT_TRUE(e.contains("file"));
    EXPECT_TRUE(e["arguments"].is_array());
  }
}

TEST(CompileDb, BuildFailureCarriesStatusAndStderr) {
  TempDir dir("cdb");
  try {
    capture_compile_db(dir.path(), "echo 'fatal: missing header' >&2; exit 3");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BuildFailed);
    std::string msg = e.what();
    EXPECT_NE(msg.find("exit status 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("missing header"), std::string::npos) << msg;
  }
}

TEST(CompileDb, FixtureRebuildIsStableAndBinaryUnchanged) {
  if (!testing::have_asan_toolchain()) GTEST_SKIP();
  TempDir dir("cdb-fixture");
  ASSERT_TRUE(testing::build_fixture_project("hbo_basic", dir.path()));
  const std::string plain = fnv1a_hex(read_file(dir / "app"));

  auto db = capture_compile_db(dir.path(), "sh build.sh");
  ASSERT_EQ(db.size(), 2u);
  EXPECT_EQ(db[0].file, dir / "sources/main.c");
  EXPECT_EQ(db[1].file, dir / "sources/record.c");
  const std::string wrapped = fnv1a_hex(read_file(dir / "app"));
  EXPECT_EQ(plain, wrapped);

  const std::string first = read_file(dir / "compile_commands.json");
  capture_compile_db(dir.path(), "sh build.sh");
  EXPECT_EQ(read_file(dir / "compile_commands.json"), first);
}

// ---- symbols ---------------------------------------------------------------

fs::path uaf_sources(TempDir& dir) {
  fs::copy(testing::fixture_path("projects/uaf_basic"), dir.path(), fs::copy_options::recursive);
  return dir.path();
}

TEST(GrepSymbol, FindsDefinitionFirst) {
  TempDir dir("grep");
  auto root = uaf_sources(dir);
  auto locs = grep_symbol(root, "table_remove");
  ASSERT_GE(locs.size(), 3u);
  EXPECT_EQ(locs[0].kind, LocationKind::Definition);
  EXPECT_EQ(locs[0].path, fs::path("sources/table.c"));
  EXPECT_EQ(locs[0].line, 32u);
  EXPECT_EQ(locs[0].column, 6u);
  for (const auto& l : locs) EXPECT_TRUE(l.low_confidence);
  bool call_in_main = false;
  for (const auto& l : locs) {
    if (l.path == "sources/main.c" && l.line == 19) {
      call_in_main = true;
      EXPECT_EQ(l.kind, LocationKind::Reference);
    }
  }
  EXPECT_TRUE(call_in_main);
  // The prototype in the header is not a definition.
  for (const auto& l : locs) {
    if (l.path == "sources/table.h") EXPECT_EQ(l.kind, LocationKind::Reference);
  }
}

TEST(GrepSymbol, WordBoundariesAndUnknown) {
  TempDir dir("grep");
  write_text(dir / "a.c", "int table_remove_all;\nint my_table_remove(void);\n");
  EXPECT_TRUE(grep_symbol(dir.path(), "table_remove").empty());
  EXPECT_TRUE(grep_symbol(dir.path(), "no_such_symbol").empty());
  EXPECT_TRUE(grep_symbol(dir.path(), "not an identifier").empty());
  auto locs = grep_symbol(dir.path(), "table_remove_all");
  ASSERT_EQ(locs.size(), 1u);
  EXPECT_EQ(locs[0].kind, LocationKind::Definition);
}

TEST(ResolveSymbol, MissingServerFallsBackToGrep) {
  TempDir dir("lsp");
  auto root = uaf_sources(dir);
  LspOptions opts;
  opts.server_argv = {"/nonexistent/language-server"};
  auto locs = resolve_symbol(root, "last_label", opts);
  ASSERT_FALSE(locs.empty());
  EXPECT_TRUE(locs[0].low_confidence);
  EXPECT_EQ(locs[0].kind, LocationKind::Definition);
  EXPECT_EQ(locs[0].line, 45u);
}

LspOptions fake_server(TempDir& dir, const std::string& mode) {
  nlohmann::json cfg = {
      {"mode", mode},
      {"symbols",
       {{"table_remove",
         {{"definition", {"sources/table.c", 31, 5}},
          {"references", {{"sources/main.c", 18, 6}, {"sources/table.c", 50, 4}}}}}}}};
  write_text(dir / "lsp.json", cfg.dump());
  LspOptions opts;
  opts.server_argv = {"python3", std::string(TRACEFIX_SUPPORT_DIR) + "/fake_lsp.py",
                      (dir / "lsp.json").string()};
  opts.timeout = std::chrono::milliseconds(3000);
  return opts;
}

TEST(ResolveSymbol, UsesLanguageServer) {
  if (!testing::have_tool("python3")) GTEST_SKIP();
  TempDir dir("lsp");
  auto root = uaf_sources(dir);
  auto locs = resolve_symbol(root, "table_remove", fake_server(dir, "normal"));
  ASSERT_EQ(locs.size(), 3u);
  EXPECT_EQ(locs[0], (SymbolLocation{"sources/table.c", 32, 6, LocationKind::Definition, false}));
  EXPECT_EQ(locs[1], (SymbolLocation{"sources/main.c", 19, 7, LocationKind::Reference, false}));
  EXPECT_EQ(locs[2], (SymbolLocation{"sources/table.c", 51, 5, LocationKind::Reference, false}));
}

TEST(ResolveSymbol, ServerWithoutAnswerMeansUnknown) {
  if (!testing::have_tool("python3")) GTEST_SKIP();
  TempDir dir("lsp");
  auto root = uaf_sources(dir);
  // Present in the text but unknown to the server.
  EXPECT_TRUE(resolve_symbol(root, "last_label", fake_server(dir, "normal")).empty());
  EXPECT_TRUE(resolve_symbol(root, "nothing_like_this", fake_server(dir, "normal")).empty());
}

TEST(ResolveSymbol, CrashingServerFallsBack) {
  if (!testing::have_tool("python3")) GTEST_SKIP();
  TempDir dir("lsp");
  auto root = uaf_sources(dir);
  auto locs = resolve_symbol(root, "table_remove", fake_server(dir, "crash"));
  ASSERT_FALSE(locs.empty());
  EXPECT_TRUE(locs[0].low_confidence);
}

TEST(ResolveSymbol, SilentServerTimesOutAndFallsBack) {
  if (!testing::have_tool("python3")) GTEST_SKIP();
  TempDir dir("lsp");
  auto root = uaf_sources(dir);
  auto opts = fake_server(dir, "silent");
  opts.timeout = std::chrono::milliseconds(500);
  auto start = std::chrono::steady_clock::now();
  auto locs = resolve_symbol(root, "table_remove", opts);
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(5));
  ASSERT_FALSE(locs.empty());
  EXPECT_TRUE(locs[0].low_confidence);
}

}  // namespace
}  // namespace tracefix
