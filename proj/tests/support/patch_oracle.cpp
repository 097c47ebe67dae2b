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

#include "patch_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace tracefix::testing {

namespace {

std::string squash(const std::string& s) {
  std::istringstream in(s);
  std::string word, out;
  while (in >> word) {
    if (!out.empty()) out += ' ';
    out += word;
  }
  return out;
}

std::size_t levenshtein(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1,
                                          std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t sub = d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, sub});
    }
  }
  return d[a.size()][b.size()];
}

template <typename T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& v) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

int uniform(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> v = {
      "int x = 0;", "  x += 1;", "return x;", "}", "{", "", "  if (p == NULL)",
      "    return -1;", "  free(p);", "  p = NULL;", "for (i = 0; i < n; i++)",
      "  buf[i] = src[i];", "  len = strlen(s);", "  memcpy(dst, src, len);",
      "static int helper(void)", "  /* comment */", "  x = y;", "  y = x;",
  };
  return v;
}

std::string random_line(std::mt19937_64& rng) {
  if (uniform(rng, 0, 3) == 0) return pick(rng, vocabulary());
  static const char* kinds[] = {"int", "long", "char*", "size_t", "void*"};
  std::ostringstream os;
  os << std::string(uniform(rng, 0, 3) * 2, ' ') << kinds[uniform(rng, 0, 4)]
     << " v" << uniform(rng, 0, 60) << " = f" << uniform(rng, 0, 30) << "(a"
     << uniform(rng, 0, 9) << ");";
  return os.str();
}

std::string mutate_chars(std::mt19937_64& rng, std::string s) {
  int edits = uniform(rng, 1, 4);
  for (int e = 0; e < edits; ++e) {
    int op = uniform(rng, 0, 2);
    char c = static_cast<char>('a' + uniform(rng, 0, 25));
    if (s.empty() || op == 0) {
      s.insert(s.begin() + uniform(rng, 0, static_cast<int>(s.size())), c);
    } else if (op == 1) {
      s.erase(s.begin() + uniform(rng, 0, static_cast<int>(s.size()) - 1));
    } else {
      s[uniform(rng, 0, static_cast<int>(s.size()) - 1)] = c;
    }
  }
  return s;
}

std::string mutate_whitespace(std::mt19937_64& rng, std::string s) {
  switch (uniform(rng, 0, 3)) {
    case 0:
      return std::string(uniform(rng, 1, 4), uniform(rng, 0, 1) ? ' ' : '\t') + s;
    case 1:
      return s + std::string(uniform(rng, 1, 3), ' ');
    case 2: {
      auto pos = s.find(' ', s.find_first_not_of(' ') == std::string::npos
                                 ? 0
                                 : s.find_first_not_of(' '));
      if (pos == std::string::npos) return s + " ";
      s.insert(pos, " ");
      return s;
    }
    default: {
      auto first = s.find_first_not_of(" \t");
      return first == std::string::npos ? s : "\t" + s.substr(first);
    }
  }
}

}  // namespace

double oracle_line_cost(const std::string& a, const std::string& b) {
  std::string na = squash(a), nb = squash(b);
  if (na == nb) return 0.0;
  return static_cast<double>(levenshtein(na, nb)) /
         static_cast<double>(std::max(na.size(), nb.size()));
}

std::optional<OracleLocation> oracle_locate(const std::vector<std::string>& target,
                                            const std::vector<std::string>& file,
                                            unsigned declared_start, double tau,
                                            unsigned min_position) {
  if (target.empty() || file.size() < target.size()) return std::nullopt;
  std::vector<std::pair<unsigned, double>> all;
  for (unsigned p = std::max(1u, min_position);
       p + target.size() - 1 <= file.size(); ++p) {
    double c = 0;
    for (std::size_t i = 0; i < target.size(); ++i) {
      c += oracle_line_cost(target[i], file[p - 1 + i]);
    }
    all.emplace_back(p, c);
  }
  if (all.empty()) return std::nullopt;
  double min_cost = all.front().second;
  for (const auto& [p, c] : all) min_cost = std::min(min_cost, c);
  std::vector<unsigned> tied;
  for (const auto& [p, c] : all) {
    if (std::fabs(c - min_cost) <= 1e-9) tied.push_back(p);
  }
  auto dist = [&](unsigned p) {
    return std::abs(static_cast<long>(p) - static_cast<long>(declared_start));
  };
  unsigned best = tied.front();
  for (unsigned p : tied) {
    if (dist(p) < dist(best) || (dist(p) == dist(best) && p < best)) best = p;
  }
  if (min_cost / static_cast<double>(target.size()) > tau + 1e-9) return std::nullopt;
  return OracleLocation{best, min_cost};
}

LocateInstance random_locate_instance(std::mt19937_64& rng) {
  LocateInstance inst;
  int n = uniform(rng, 1, 200);
  for (int i = 0; i < n; ++i) inst.file.push_back(random_line(rng));
  int t = uniform(rng, 1, std::min(20, n));
  int mode = uniform(rng, 0, 4);
  if (mode == 4) {
    // Unrelated target: usually rejected.
    for (int i = 0; i < t; ++i) inst.target.push_back(mutate_chars(rng, random_line(rng)));
  } else {
    int start = uniform(rng, 0, n - t);
    for (int i = 0; i < t; ++i) {
      std::string line = inst.file[start + i];
      int r = uniform(rng, 0, 9);
      if (mode >= 1 && r < 3) line = mutate_chars(rng, line);
      else if (mode >= 2 && r < 6) line = mutate_whitespace(rng, line);
      inst.target.push_back(line);
    }
    if (mode == 3 && uniform(rng, 0, 1)) {
      // Plant a duplicate window to exercise tie-breaking.
      int other = uniform(rng, 0, n - t);
      for (int i = 0; i < t; ++i) inst.file[other + i] = inst.file[start + i];
    }
  }
  inst.declared_start = static_cast<unsigned>(uniform(rng, 1, n + 30));
  return inst;
}

std::string render_synthetic(const std::string& path,
                             const std::vector<SyntheticCase::HunkSpec>& hunks) {
  std::ostringstream os;
  os << "--- a/" << path << "\n+++ b/" << path << "\n";
  for (const auto& h : hunks) {
    os << "@@ -" << h.old_start;
    if (h.old_count != 1) os << "," << h.old_count;
    os << " +" << h.new_start;
    if (h.new_count != 1) os << "," << h.new_count;
    os << " @@\n";
    for (const auto& l : h.body) os << l << "\n";
  }
  return os.str();
}

SyntheticCase random_synthetic_case(std::mt19937_64& rng) {
  SyntheticCase c;
  c.path = "src/file" + std::to_string(uniform(rng, 0, 99)) + ".c";
  int n = uniform(rng, 60, 200);
  std::vector<std::string> lines;
  std::set<std::string> seen;
  while (static_cast<int>(lines.size()) < n) {
    std::ostringstream os;
    os << std::string(uniform(rng, 0, 2) * 4, ' ') << "stmt_" << lines.size()
       << "(ctx, " << uniform(rng, 0, 999) << ", \"k" << uniform(rng, 0, 99) << "\");";
    if (seen.insert(os.str()).second) lines.push_back(os.str());
  }
  for (const auto& l : lines) c.original += l + "\n";

  // Non-overlapping change regions with 3 lines of context on each side.
  int nhunks = uniform(rng, 1, 4);
  std::vector<std::string> out_lines;
  int cursor = 0;  // 0-based next original line not yet copied
  long delta = 0;
  int slot = n / nhunks;
  for (int k = 0; k < nhunks; ++k) {
    int region_lo = k * slot + 4;
    int region_hi = (k + 1) * slot - 8;
    if (region_hi <= region_lo) break;
    int del_start = uniform(rng, region_lo, region_hi);
    int del_count = uniform(rng, 0, 3);
    int add_count = uniform(rng, del_count == 0 ? 1 : 0, 3);
    int ctx_before = 3, ctx_after = 3;
    int hunk_begin = del_start - ctx_before;  // 0-based
    int hunk_end = del_start + del_count + ctx_after;  // exclusive
    if (hunk_end > n) break;
    SyntheticCase::HunkSpec h;
    for (; cursor < hunk_begin; ++cursor) out_lines.push_back(lines[cursor]);
    for (int i = hunk_begin; i < del_start; ++i) h.body.push_back(" " + lines[i]);
    for (int i = 0; i < del_count; ++i) h.body.push_back("-" + lines[del_start + i]);
    std::vector<std::string> added;
    for (int i = 0; i < add_count; ++i) {
      added.push_back("    fixed_" + std::to_string(k) + "_" + std::to_string(i) + "(ctx);");
      h.body.push_back("+" + added.back());
    }
    for (int i = del_start + del_count; i < hunk_end; ++i) h.body.push_back(" " + lines[i]);
    for (int i = hunk_begin; i < del_start; ++i) out_lines.push_back(lines[i]);
    for (const auto& a : added) out_lines.push_back(a);
    for (int i = del_start + del_count; i < hunk_end; ++i) out_lines.push_back(lines[i]);
    cursor = hunk_end;
    h.old_start = static_cast<unsigned>(hunk_begin + 1);
    h.old_count = static_cast<unsigned>(hunk_end - hunk_begin);
    h.new_count = static_cast<unsigned>(h.old_count - del_count + add_count);
    h.new_start = static_cast<unsigned>(hunk_begin + 1 + delta);
    delta += add_count - del_count;
    c.hunks.push_back(std::move(h));
  }
  for (; cursor < n; ++cursor) out_lines.push_back(lines[cursor]);
  for (const auto& l : out_lines) c.expected += l + "\n";
  c.diff_text = render_synthetic(c.path, c.hunks);
  return c;
}

std::string perturb_line_numbers(const SyntheticCase& c, std::mt19937_64& rng,
                                 int max_shift) {
  auto hunks = c.hunks;
  for (auto& h : hunks) {
    int shift = uniform(rng, 1, max_shift) * (uniform(rng, 0, 1) ? 1 : -1);
    h.old_start = static_cast<unsigned>(std::max(1, static_cast<int>(h.old_start) + shift));
    h.new_start = static_cast<unsigned>(std::max(1, static_cast<int>(h.new_start) + shift));
  }
  return render_synthetic(c.path, hunks);
}

std::string mutate_context_whitespace(const SyntheticCase& c, std::mt19937_64& rng) {
  auto hunks = c.hunks;
  for (auto& h : hunks) {
    for (auto& l : h.body) {
      if (l[0] == ' ' && uniform(rng, 0, 1)) l = " " + mutate_whitespace(rng, l.substr(1));
    }
  }
  return render_synthetic(c.path, hunks);
}

}  // namespace tracefix::testing
