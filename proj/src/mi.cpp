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

#include "tracefix/mi.hpp"

#include <cctype>

namespace tracefix::mi {

using nlohmann::json;

std::optional<std::string> parse_c_string(std::string_view s, std::size_t& pos) {
  if (pos >= s.size() || s[pos] != '"') return std::nullopt;
  std::string out;
  for (std::size_t i = pos + 1; i < s.size(); ++i) {
    char c = s[i];
    if (c == '"') {
      pos = i + 1;
      return out;
    }
    if (c != '\\') {
      out += c;
      continue;
    }
    if (++i >= s.size()) return std::nullopt;
    switch (char e = s[i]) {
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case 'r': out += '\r'; break;
      case 'a': out += '\a'; break;
      case 'b': out += '\b'; break;
      case 'f': out += '\f'; break;
      case 'v': out += '\v'; break;
      case 'e': out += '\x1b'; break;
      default:
        if (e >= '0' && e <= '7') {
          int value = 0, digits = 0;
          while (digits < 3 && i < s.size() && s[i] >= '0' && s[i] <= '7') {
            value = value * 8 + (s[i] - '0');
            ++i;
            ++digits;
          }
          --i;
          out += static_cast<char>(value);
        } else {
          out += e;  // \" \\ and unknown escapes
        }
    }
  }
  return std::nullopt;
}

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

namespace {

std::optional<json> parse_value(std::string_view s, std::size_t& pos);

std::optional<std::string> parse_variable(std::string_view s, std::size_t& pos) {
  std::size_t start = pos;
  while (pos < s.size() && s[pos] != '=' && s[pos] != ',' && s[pos] != '}' &&
         s[pos] != ']') {
    ++pos;
  }
  if (pos >= s.size() || s[pos] != '=' || pos == start) return std::nullopt;
  std::string name(s.substr(start, pos - start));
  ++pos;  // '='
  return name;
}

// Adds `value` under `name`; repeated keys (as in some list-of-results
// forms) are collected into an array.
void add_result(json& obj, const std::string& name, json value) {
  if (!obj.contains(name)) {
    obj[name] = std::move(value);
  } else {
    if (!obj[name].is_array() || !obj[name].contains("__repeated")) {
      json arr = json::array({obj[name]});
      obj[name] = json::object({{"__repeated", true}, {"items", arr}});
    }
    obj[name]["items"].push_back(std::move(value));
  }
}

std::optional<json> parse_tuple(std::string_view s, std::size_t& pos) {
  ++pos;  // '{'
  json obj = json::object();
  if (pos < s.size() && s[pos] == '}') {
    ++pos;
    return obj;
  }
  while (pos < s.size()) {
    auto name = parse_variable(s, pos);
    if (!name) return std::nullopt;
    auto v = parse_value(s, pos);
    if (!v) return std::nullopt;
    add_result(obj, *name, std::move(*v));
    if (pos < s.size() && s[pos] == ',') {
      ++pos;
      continue;
    }
    if (pos < s.size() && s[pos] == '}') {
      ++pos;
      return obj;
    }
    return std::nullopt;
  }
  return std::nullopt;
}

std::optional<json> parse_list(std::string_view s, std::size_t& pos) {
  ++pos;  // '['
  json arr = json::array();
  if (pos < s.size() && s[pos] == ']') {
    ++pos;
    return arr;
  }
  while (pos < s.size()) {
    // Either a value or a result (name=value); results keep their value.
    std::size_t save = pos;
    if (s[pos] != '"' && s[pos] != '{' && s[pos] != '[') {
      auto name = parse_variable(s, pos);
      if (!name) {
        pos = save;
        return std::nullopt;
      }
      auto v = parse_value(s, pos);
      if (!v) return std::nullopt;
      arr.push_back(json::object({{*name, std::move(*v)}}));
    } else {
      auto v = parse_value(s, pos);
      if (!v) return std::nullopt;
      arr.push_back(std::move(*v));
    }
    if (pos < s.size() && s[pos] == ',') {
      ++pos;
      continue;
    }
    if (pos < s.size() && s[pos] == ']') {
      ++pos;
      return arr;
    }
    return std::nullopt;
  }
  return std::nullopt;
}

std::optional<json> parse_value(std::string_view s, std::size_t& pos) {
  if (pos >= s.size()) return std::nullopt;
  if (s[pos] == '"') {
    auto str = parse_c_string(s, pos);
    if (!str) return std::nullopt;
    return json(*str);
  }
  if (s[pos] == '{') return parse_tuple(s, pos);
  if (s[pos] == '[') return parse_list(s, pos);
  return std::nullopt;
}

}  // namespace

Record parse_record(std::string_view line) {
  Record r;
  r.text = std::string(line);
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) {
    line.remove_suffix(1);
  }
  if (line == "(gdb)" || line == "(gdb) ") {
    r.type = RecordType::Prompt;
    return r;
  }
  std::size_t pos = 0;
  while (pos < line.size() && std::isdigit(static_cast<unsigned char>(line[pos]))) ++pos;
  std::optional<unsigned long> token;
  if (pos > 0) {
    try {
      token = std::stoul(std::string(line.substr(0, pos)));
    } catch (...) {
      return r;
    }
  }
  if (pos >= line.size()) return r;
  char marker = line[pos];

  if (marker == '~' || marker == '@' || marker == '&') {
    if (token) return r;
    std::size_t p = pos + 1;
    auto text = parse_c_string(line, p);
    if (!text || p != line.size()) return r;
    r.type = marker == '~' ? RecordType::Console
             : marker == '@' ? RecordType::Target
                             : RecordType::Log;
    r.text = *text;
    return r;
  }

  RecordType type;
  switch (marker) {
    case '^': type = RecordType::Result; break;
    case '*': type = RecordType::Exec; break;
    case '+': type = RecordType::Status; break;
    case '=': type = RecordType::Notify; break;
    default: return r;
  }
  std::size_t p = pos + 1;
  std::size_t start = p;
  while (p < line.size() && line[p] != ',') ++p;
  std::string klass(line.substr(start, p - start));
  if (klass.empty() ||
      !std::all_of(klass.begin(), klass.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
      })) {
    return r;
  }
  json results = json::object();
  while (p < line.size() && line[p] == ',') {
    ++p;
    auto name = parse_variable(line, p);
    if (!name) return r;
    auto v = parse_value(line, p);
    if (!v) return r;
    add_result(results, *name, std::move(*v));
  }
  if (p != line.size()) return r;
  r.type = type;
  r.token = token;
  r.klass = std::move(klass);
  r.results = std::move(results);
  r.text.clear();
  return r;
}

}  // namespace tracefix::mi
