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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tracefix::patch {

enum class LineTag { Context, Delete, Add };

struct HunkLine {
  LineTag tag;
  std::string text;
  bool no_newline = false;  // followed by a "\ No newline at end of file" marker

  bool operator==(const HunkLine&) const = default;
};

struct Hunk {
  // Header values exactly as rendered ("@@ -old_start,old_count ...").
  // A zero count puts the start on the line before the hunk, as diff does.
  unsigned old_start = 0;
  unsigned old_count = 0;
  unsigned new_start = 0;
  unsigned new_count = 0;
  std::string section;  // text after the closing "@@", if any
  std::vector<HunkLine> lines;

  // 1-based line of the first old-side line this hunk touches. For a
  // pure insertion this is the line the added text goes before.
  unsigned old_position() const { return old_count == 0 ? old_start + 1 : old_start; }
  bool counts_consistent() const;

  bool operator==(const Hunk&) const = default;
};

struct FilePatch {
  std::string path;        // project-relative, prefixes stripped
  std::string old_header;  // "--- a/foo.c" as written
  std::string new_header;  // "+++ b/foo.c" as written
  std::vector<std::string> preamble;  // "diff --git", "index" lines
  std::vector<Hunk> hunks;

  bool operator==(const FilePatch&) const = default;
};

enum class Tolerance {
  CountMismatch,          // header counts disagree with hunk body
  MissingCounts,          // "@@ -3 +3 @@" or "@@ @@"
  BlankContextLine,       // empty line inside a hunk read as blank context
  TrailingNoise,          // whitespace-only lines after a hunk dropped
  MissingPrefixSpace,     // unprefixed line inside a hunk read as context
};

std::string_view to_string(Tolerance t);

struct UnifiedDiff {
  std::vector<FilePatch> file_patches;
  std::vector<Tolerance> tolerances;  // in the order they fired

  bool fired(Tolerance t) const;
  bool operator==(const UnifiedDiff& o) const { return file_patches == o.file_patches; }
};

// Tolerant parse. Throws Error{UnparseableDiff} when no "@@" hunk exists or
// a hunk has no file header.
UnifiedDiff parse_diff(std::string_view text);
std::string render_diff(const UnifiedDiff& diff);

// Context + delete texts of a hunk in order. Throws Error{EmptyTarget} for
// pure insertions.
std::vector<std::string> reconstruct_target(const Hunk& hunk);

// Per-line mismatch: 0 when equal after whitespace normalization, otherwise
// character edit distance over the longer normalized length, in (0, 1].
double line_cost(std::string_view a, std::string_view b);

struct LocateOptions {
  double rejection_threshold = 0.35;  // max mean per-line cost
  unsigned min_position = 1;          // inclusive search bounds (1-based)
  std::optional<unsigned> max_position;
};

struct Location {
  unsigned position = 0;  // 1-based first file line of the window
  double cost = 0.0;
};

// Costs within this distance are treated as ties.
inline constexpr double kCostTieEpsilon = 1e-9;

// Slides `target` over `file_lines` (fixed window length) and returns the
// cheapest window; ties go to the window closest to declared_start, then to
// the smallest position. Throws Error{NoPlausibleLocation} when the best mean
// per-line cost exceeds the threshold, naming the best candidate.
Location locate_hunk(const std::vector<std::string>& target,
                     const std::vector<std::string>& file_lines,
                     unsigned declared_start, const LocateOptions& options = {});

struct CorrectOptions {
  double rejection_threshold = 0.35;
  unsigned anchor_context = 2;  // lines synthesized around pure insertions
};

// Relocates every hunk against the files under `root`, substitutes the exact
// file text for context/delete lines and recomputes all headers. Throws
// Error{CorrectionFailed} (whole diff rejected) when any hunk cannot be
// placed without overlapping its predecessor.
UnifiedDiff correct_diff(const UnifiedDiff& diff, const std::filesystem::path& root,
                         const CorrectOptions& options = {});

struct FileText {
  std::vector<std::string> lines;
  bool trailing_newline = true;
};

// Pure form used by correct_diff: corrects one file's hunks against its text.
FilePatch correct_file_patch(const FilePatch& fp, const FileText& file,
                             const CorrectOptions& options = {});

FileText split_file_text(std::string_view content);
std::string join_file_text(const FileText& text);

// Strict application to in-memory lines. Throws Error{ApplyConflict}.
FileText apply_file_patch(const FileText& original, const FilePatch& fp);

struct PatchedProject {
  std::filesystem::path root;
  std::vector<std::string> touched_files;
};

// Applies every file patch; each file is verified in full before any file is
// rewritten, then rewritten atomically.
PatchedProject apply_patch(const std::filesystem::path& root, const UnifiedDiff& diff);

// Swaps add/delete lines and old/new headers.
UnifiedDiff reverse_diff(const UnifiedDiff& diff);

}  // namespace tracefix::patch
