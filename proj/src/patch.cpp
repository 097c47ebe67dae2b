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

#include "tracefix/patch.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <regex>

#include "tracefix/error.hpp"
#include "tracefix/util.hpp"

namespace tracefix::patch {

namespace {

const std::regex& hunk_header_regex() {
  static const std::regex re(
      R"(^@@\s*-(\d+)(?:,(\d+))?\s+\+(\d+)(?:,(\d+))?\s*@@(.*)$)");
  return re;
}

unsigned to_uint(const std::string& s) {
  unsigned v = 0;
  std::from_chars(s.data(), s.data() + s.size(), v);
  return v;
}

bool is_file_header_at(const std::vector<std::string>& lines, std::size_t i) {
  return i + 1 < lines.size() && starts_with(lines[i], "--- ") &&
         starts_with(lines[i + 1], "+++ ");
}

bool ends_hunk(const std::vector<std::string>& lines, std::size_t i) {
  return starts_with(lines[i], "@@") || starts_with(lines[i], "diff ") ||
         is_file_header_at(lines, i);
}

std::string path_from_label(std::string_view label) {
  // "+++ b/src/x.c\t2024-01-01 ..." -> "src/x.c"
  label.remove_prefix(4);
  auto tab = label.find('\t');
  if (tab != std::string_view::npos) label = label.substr(0, tab);
  label = trim(label);
  if (starts_with(label, "a/") || starts_with(label, "b/")) label.remove_prefix(2);
  return std::string(label);
}

struct BodyCounts {
  unsigned old_lines = 0;
  unsigned new_lines = 0;
};

BodyCounts count_body(const std::vector<HunkLine>& lines) {
  BodyCounts c;
  for (const auto& l : lines) {
    if (l.tag != LineTag::Add) ++c.old_lines;
    if (l.tag != LineTag::Delete) ++c.new_lines;
  }
  return c;
}

void note(UnifiedDiff& diff, Tolerance t) { diff.tolerances.push_back(t); }

std::string render_range(unsigned start, unsigned count) {
  if (count == 1) return std::to_string(start);
  return std::to_string(start) + "," + std::to_string(count);
}

}  // namespace

std::string_view to_string(Tolerance t) {
  switch (t) {
    case Tolerance::CountMismatch: return "count-mismatch";
    case Tolerance::MissingCounts: return "missing-counts";
    case Tolerance::BlankContextLine: return "blank-context-line";
    case Tolerance::TrailingNoise: return "trailing-noise";
    case Tolerance::MissingPrefixSpace: return "missing-prefix-space";
  }
  return "unknown";
}

bool Hunk::counts_consistent() const {
  auto c = count_body(lines);
  return c.old_lines == old_count && c.new_lines == new_count;
}

bool UnifiedDiff::fired(Tolerance t) const {
  return std::find(tolerances.begin(), tolerances.end(), t) != tolerances.end();
}

UnifiedDiff parse_diff(std::string_view text) {
  const auto lines = split_lines(text);
  UnifiedDiff diff;
  std::vector<std::string> preamble;
  FilePatch* current = nullptr;
  bool saw_hunk = false;

  std::size_t i = 0;
  while (i < lines.size()) {
    const std::string& line = lines[i];
    if (is_file_header_at(lines, i)) {
      FilePatch fp;
      fp.old_header = line;
      fp.new_header = lines[i + 1];
      fp.path = path_from_label(lines[i + 1]);
      if (fp.path == "/dev/null") fp.path = path_from_label(line);
      fp.preamble = std::move(preamble);
      preamble.clear();
      diff.file_patches.push_back(std::move(fp));
      current = &diff.file_patches.back();
      i += 2;
      continue;
    }
    if (!starts_with(line, "@@")) {
      if (starts_with(line, "diff ") || starts_with(line, "index ") ||
          starts_with(line, "new file mode") ||
          starts_with(line, "deleted file mode") ||
          starts_with(line, "similarity index") || starts_with(line, "rename ")) {
        preamble.push_back(line);
      }
      ++i;
      continue;
    }

    // Hunk header.
    saw_hunk = true;
    if (current == nullptr) {
      throw Error(ErrorCode::UnparseableDiff,
                  "hunk at line " + std::to_string(i + 1) +
                      " has no preceding ---/+++ file header");
    }
    Hunk hunk;
    bool counts_declared = true;
    std::smatch m;
    if (std::regex_match(line, m, hunk_header_regex())) {
      hunk.old_start = to_uint(m[1].str());
      hunk.old_count = m[2].matched ? to_uint(m[2].str()) : 1;
      hunk.new_start = to_uint(m[3].str());
      hunk.new_count = m[4].matched ? to_uint(m[4].str()) : 1;
      hunk.section = m[5].str();
    } else {
      // "@@ @@" or otherwise mangled numbers: positions unknown.
      note(diff, Tolerance::MissingCounts);
      counts_declared = false;
      auto close = line.find("@@", 2);
      if (close != std::string::npos) hunk.section = line.substr(close + 2);
    }
    ++i;

    auto satisfied = [&] {
      auto c = count_body(hunk.lines);
      return counts_declared && c.old_lines >= hunk.old_count &&
             c.new_lines >= hunk.new_count;
    };
    auto rest_is_blank = [&](std::size_t from) {
      for (std::size_t k = from; k < lines.size() && !ends_hunk(lines, k); ++k) {
        if (!trim(lines[k]).empty()) return false;
      }
      return true;
    };

    while (i < lines.size() && !ends_hunk(lines, i)) {
      const std::string& body = lines[i];
      if (trim(body).empty()) {
        if (rest_is_blank(i) && (!counts_declared || satisfied())) {
          while (i < lines.size() && !ends_hunk(lines, i)) ++i;
          note(diff, Tolerance::TrailingNoise);
          break;
        }
        if (body.empty()) {
          note(diff, Tolerance::BlankContextLine);
          hunk.lines.push_back({LineTag::Context, ""});
          ++i;
          continue;
        }
      }
      char tag = body[0];
      if (tag == ' ') {
        hunk.lines.push_back({LineTag::Context, body.substr(1)});
      } else if (tag == '-') {
        hunk.lines.push_back({LineTag::Delete, body.substr(1)});
      } else if (tag == '+') {
        hunk.lines.push_back({LineTag::Add, body.substr(1)});
      } else if (tag == '\\') {
        if (!hunk.lines.empty()) hunk.lines.back().no_newline = true;
      } else if (satisfied()) {
        break;  // trailing prose
      } else {
        note(diff, Tolerance::MissingPrefixSpace);
        hunk.lines.push_back({LineTag::Context, body});
      }
      ++i;
    }

    auto c = count_body(hunk.lines);
    if (!counts_declared) {
      hunk.old_count = c.old_lines;
      hunk.new_count = c.new_lines;
    } else if (c.old_lines != hunk.old_count || c.new_lines != hunk.new_count) {
      note(diff, Tolerance::CountMismatch);
    }
    if (!hunk.lines.empty()) current->hunks.push_back(std::move(hunk));
  }

  if (!saw_hunk) {
    throw Error(ErrorCode::UnparseableDiff, "no hunk header (@@) found");
  }
  std::erase_if(diff.file_patches,
                [](const FilePatch& fp) { return fp.hunks.empty(); });
  if (diff.file_patches.empty()) {
    throw Error(ErrorCode::UnparseableDiff, "diff contains no non-empty hunks");
  }
  return diff;
}

std::string render_diff(const UnifiedDiff& diff) {
  std::string out;
  for (const auto& fp : diff.file_patches) {
    for (const auto& p : fp.preamble) out += p + "\n";
    out += fp.old_header.empty() ? "--- a/" + fp.path : fp.old_header;
    out += "\n";
    out += fp.new_header.empty() ? "+++ b/" + fp.path : fp.new_header;
    out += "\n";
    for (const auto& h : fp.hunks) {
      out += "@@ -" + render_range(h.old_start, h.old_count) + " +" +
             render_range(h.new_start, h.new_count) + " @@" + h.section + "\n";
      for (const auto& l : h.lines) {
        out += l.tag == LineTag::Context ? ' ' : l.tag == LineTag::Delete ? '-' : '+';
        out += l.text;
        out += "\n";
        if (l.no_newline) out += "\\ No newline at end of file\n";
      }
    }
  }
  return out;
}

std::vector<std::string> reconstruct_target(const Hunk& hunk) {
  std::vector<std::string> target;
  for (const auto& l : hunk.lines) {
    if (l.tag != LineTag::Add) target.push_back(l.text);
  }
  if (target.empty()) {
    throw Error(ErrorCode::EmptyTarget,
                "hunk has no context or deleted lines to anchor on");
  }
  return target;
}

namespace {

double normalized_cost(const std::string& na, const std::string& nb) {
  if (na == nb) return 0.0;
  auto longest = std::max(na.size(), nb.size());
  return static_cast<double>(edit_distance(na, nb)) / static_cast<double>(longest);
}

}  // namespace

double line_cost(std::string_view a, std::string_view b) {
  if (a == b) return 0.0;
  return normalized_cost(normalize_whitespace(a), normalize_whitespace(b));
}

Location locate_hunk(const std::vector<std::string>& target,
                     const std::vector<std::string>& file_lines,
                     unsigned declared_start, const LocateOptions& options) {
  if (target.empty()) throw Error(ErrorCode::EmptyTarget, "empty target");
  const std::size_t t = target.size();
  const std::size_t n = file_lines.size();
  unsigned lo = std::max(1u, options.min_position);
  long long hi = static_cast<long long>(n) - static_cast<long long>(t) + 1;
  if (options.max_position) hi = std::min<long long>(hi, *options.max_position);
  if (n == 0 || hi < static_cast<long long>(lo)) {
    throw Error(ErrorCode::NoPlausibleLocation,
                "no window of " + std::to_string(t) +
                    " lines fits in the file at or after line " +
                    std::to_string(lo));
  }

  std::vector<std::string> norm_target;
  norm_target.reserve(t);
  for (const auto& s : target) norm_target.push_back(normalize_whitespace(s));
  std::vector<std::string> norm_file(n);
  std::vector<bool> normalized(n, false);
  auto file_norm = [&](std::size_t j) -> const std::string& {
    if (!normalized[j]) {
      norm_file[j] = normalize_whitespace(file_lines[j]);
      normalized[j] = true;
    }
    return norm_file[j];
  };

  std::optional<Location> best;
  auto distance = [&](unsigned p) {
    return p > declared_start ? p - declared_start : declared_start - p;
  };
  auto better = [&](const Location& cand) {
    if (!best) return true;
    if (cand.cost < best->cost - kCostTieEpsilon) return true;
    if (cand.cost > best->cost + kCostTieEpsilon) return false;
    auto dc = distance(cand.position), db = distance(best->position);
    if (dc != db) return dc < db;
    return cand.position < best->position;
  };

  for (unsigned p = lo; p <= static_cast<unsigned>(hi); ++p) {
    double cost = 0.0;
    bool pruned = false;
    for (std::size_t i = 0; i < t; ++i) {
      const std::string& raw = file_lines[p - 1 + i];
      if (raw != target[i]) cost += normalized_cost(norm_target[i], file_norm(p - 1 + i));
      if (best && cost > best->cost + kCostTieEpsilon) {
        pruned = true;
        break;
      }
    }
    if (pruned) continue;
    Location cand{p, cost};
    if (better(cand)) best = cand;
  }

  const double mean = best->cost / static_cast<double>(t);
  if (mean > options.rejection_threshold + kCostTieEpsilon) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "no plausible location: best candidate at line %u with cost "
                  "%.3f (mean %.3f per line > threshold %.2f)",
                  best->position, best->cost, mean, options.rejection_threshold);
    throw Error(ErrorCode::NoPlausibleLocation, buf);
  }
  return *best;
}

FileText split_file_text(std::string_view content) {
  FileText ft;
  ft.lines = split_lines(content);
  ft.trailing_newline = content.empty() || content.back() == '\n';
  return ft;
}

std::string join_file_text(const FileText& text) {
  return join_lines(text.lines, text.trailing_newline && !text.lines.empty());
}

FilePatch correct_file_patch(const FilePatch& fp, const FileText& file,
                             const CorrectOptions& options) {
  FilePatch out = fp;
  out.hunks.clear();
  const auto& lines = file.lines;
  const unsigned n = static_cast<unsigned>(lines.size());
  unsigned lo = 1;
  long long delta = 0;

  auto fail = [&](std::size_t idx, const std::string& why) -> Error {
    return Error(ErrorCode::CorrectionFailed,
                 fp.path + ": hunk " + std::to_string(idx + 1) + ": " + why);
  };
  auto eof_flag = [&](unsigned line_no) {
    return line_no == n && !file.trailing_newline;
  };

  for (std::size_t idx = 0; idx < fp.hunks.size(); ++idx) {
    const Hunk& h = fp.hunks[idx];
    Hunk fixed;
    fixed.section = h.section;
    unsigned position = 0;

    bool pure_insertion = std::none_of(
        h.lines.begin(), h.lines.end(),
        [](const HunkLine& l) { return l.tag != LineTag::Add; });

    if (!pure_insertion) {
      auto target = reconstruct_target(h);
      Location loc;
      try {
        loc = locate_hunk(target, lines, h.old_position(),
                          {options.rejection_threshold, lo, std::nullopt});
      } catch (const Error& e) {
        throw fail(idx, e.what());
      }
      position = loc.position;
      unsigned k = 0;
      for (const auto& l : h.lines) {
        if (l.tag == LineTag::Add) {
          fixed.lines.push_back(l);
          continue;
        }
        unsigned line_no = position + k;
        fixed.lines.push_back({l.tag, lines[line_no - 1], eof_flag(line_no)});
        ++k;
      }
    } else {
      // Anchor on the declared line, clamped, and borrow surrounding lines
      // from the file as context.
      unsigned insert_before = std::clamp(h.old_position(), lo, n + 1);
      unsigned ctx_begin = insert_before > lo + options.anchor_context
                               ? insert_before - options.anchor_context
                               : lo;
      unsigned ctx_end = std::min(n, insert_before - 1 + options.anchor_context);
      for (unsigned ln = ctx_begin; ln < insert_before; ++ln) {
        fixed.lines.push_back({LineTag::Context, lines[ln - 1], eof_flag(ln)});
      }
      for (const auto& l : h.lines) fixed.lines.push_back(l);
      for (unsigned ln = insert_before; ln <= ctx_end; ++ln) {
        fixed.lines.push_back({LineTag::Context, lines[ln - 1], eof_flag(ln)});
      }
      position = ctx_begin;
    }

    auto counts = count_body(fixed.lines);
    fixed.old_count = counts.old_lines;
    fixed.new_count = counts.new_lines;
    fixed.old_start = fixed.old_count == 0 ? position - 1 : position;
    long long new_position = static_cast<long long>(position) + delta;
    fixed.new_start = static_cast<unsigned>(
        fixed.new_count == 0 ? new_position - 1 : new_position);
    delta += static_cast<long long>(fixed.new_count) -
             static_cast<long long>(fixed.old_count);
    lo = position + fixed.old_count;
    out.hunks.push_back(std::move(fixed));
  }
  return out;
}

namespace {

fs::path resolve_inside(const fs::path& root, const std::string& rel,
                        ErrorCode code) {
  auto inside = relative_under(fs::path(rel), root);
  if (!inside || *inside == ".") {
    throw Error(code, "patch path escapes the project root: " + rel);
  }
  return root / *inside;
}

}  // namespace

UnifiedDiff correct_diff(const UnifiedDiff& diff, const fs::path& root,
                         const CorrectOptions& options) {
  UnifiedDiff out;
  out.tolerances = diff.tolerances;
  for (const auto& fp : diff.file_patches) {
    auto path = resolve_inside(root, fp.path, ErrorCode::CorrectionFailed);
    auto content = try_read_file(path);
    if (!content) {
      throw Error(ErrorCode::CorrectionFailed,
                  fp.path + ": file does not exist in the project");
    }
    out.file_patches.push_back(
        correct_file_patch(fp, split_file_text(*content), options));
  }
  return out;
}

FileText apply_file_patch(const FileText& original, const FilePatch& fp) {
  const auto& src = original.lines;
  const std::size_t n = src.size();
  FileText result;
  result.trailing_newline = original.trailing_newline;
  std::size_t cursor = 1;  // next original line to copy (1-based)
  for (std::size_t idx = 0; idx < fp.hunks.size(); ++idx) {
    const Hunk& h = fp.hunks[idx];
    auto conflict = [&](const std::string& why) {
      return Error(ErrorCode::ApplyConflict,
                   fp.path + ": hunk " + std::to_string(idx + 1) + ": " + why);
    };
    if (!h.counts_consistent()) throw conflict("header counts do not match body");
    std::size_t pos = h.old_position();
    if (pos < cursor) throw conflict("overlaps the previous hunk");
    if (pos > n + 1) throw conflict("starts beyond end of file");
    for (; cursor < pos; ++cursor) result.lines.push_back(src[cursor - 1]);
    std::size_t k = pos;
    const HunkLine* last_new = nullptr;
    for (const auto& l : h.lines) {
      if (l.tag == LineTag::Add) {
        result.lines.push_back(l.text);
        last_new = &l;
        continue;
      }
      if (k > n) throw conflict("extends beyond end of file");
      if (src[k - 1] != l.text) {
        throw conflict("line " + std::to_string(k) + " does not match: expected '" +
                       l.text + "', found '" + src[k - 1] + "'");
      }
      if (l.tag == LineTag::Context) {
        result.lines.push_back(l.text);
        last_new = &l;
      }
      ++k;
    }
    cursor = k;
    if (cursor > n && last_new != nullptr) {
      result.trailing_newline = !last_new->no_newline;
    }
  }
  for (; cursor <= n; ++cursor) result.lines.push_back(src[cursor - 1]);
  return result;
}

PatchedProject apply_patch(const fs::path& root, const UnifiedDiff& diff) {
  if (diff.file_patches.empty()) {
    throw Error(ErrorCode::ApplyConflict, "diff has no file patches");
  }
  std::map<std::string, std::pair<fs::path, FileText>> staged;
  std::vector<std::string> order;
  for (const auto& fp : diff.file_patches) {
    auto path = resolve_inside(root, fp.path, ErrorCode::ApplyConflict);
    auto key = path.lexically_normal().string();
    auto it = staged.find(key);
    if (it == staged.end()) {
      auto content = try_read_file(path);
      if (!content) {
        throw Error(ErrorCode::ApplyConflict, fp.path + ": file does not exist");
      }
      it = staged.emplace(key, std::make_pair(path, split_file_text(*content))).first;
      order.push_back(key);
    }
    it->second.second = apply_file_patch(it->second.second, fp);
  }
  PatchedProject result{root, {}};
  for (const auto& key : order) {
    const auto& [path, text] = staged.at(key);
    write_file_atomic(path, join_file_text(text));
    result.touched_files.push_back(
        relative_under(path, root).value_or(path).generic_string());
  }
  return result;
}

UnifiedDiff reverse_diff(const UnifiedDiff& diff) {
  UnifiedDiff out = diff;
  for (auto& fp : out.file_patches) {
    std::string old_label = fp.old_header.size() > 4 ? fp.old_header.substr(4) : fp.path;
    std::string new_label = fp.new_header.size() > 4 ? fp.new_header.substr(4) : fp.path;
    fp.old_header = "--- " + new_label;
    fp.new_header = "+++ " + old_label;
    for (auto& h : fp.hunks) {
      std::swap(h.old_start, h.new_start);
      std::swap(h.old_count, h.new_count);
      for (auto& l : h.lines) {
        if (l.tag == LineTag::Add) l.tag = LineTag::Delete;
        else if (l.tag == LineTag::Delete) l.tag = LineTag::Add;
      }
    }
  }
  return out;
}

}  // namespace tracefix::patch
