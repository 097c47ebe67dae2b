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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tracefix {

namespace fs = std::filesystem;

// Lines of a text buffer without their terminators. A trailing newline does
// not produce an empty final element.
std::vector<std::string> split_lines(std::string_view text);
std::string join_lines(const std::vector<std::string>& lines,
                       bool trailing_newline = true);

std::string_view trim(std::string_view s);
std::string_view rtrim(std::string_view s);
// Collapses internal whitespace runs to one space and strips both ends.
std::string normalize_whitespace(std::string_view s);

bool starts_with(std::string_view s, std::string_view prefix);
bool contains(std::string_view haystack, std::string_view needle);

// Character-level Levenshtein distance.
std::size_t edit_distance(std::string_view a, std::string_view b);

// Replaces bytes that do not form valid UTF-8 with U+FFFD.
std::string sanitize_utf8(std::string_view s);

// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view data);

std::string read_file(const fs::path& path);
std::optional<std::string> try_read_file(const fs::path& path);
// Writes through a temporary sibling and renames it over `path`.
void write_file_atomic(const fs::path& path, std::string_view data);

// Keeps at most `cap` bytes; appends a marker naming the dropped count.
std::string cap_bytes(std::string_view text, std::size_t cap);

// Returns the path of `p` relative to `root` when `p` lies under it.
std::optional<fs::path> relative_under(const fs::path& p, const fs::path& root);

}  // namespace tracefix
