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

#include <httplib.h>

#include <json.hpp>
#include <thread>

#include "tracefix/error.hpp"
#include "tracefix/oracle.hpp"

namespace tracefix {

using nlohmann::json;

namespace {

// Splits "http://host:port/base" into ("http://host:port", "/base").
std::pair<std::string, std::string> split_endpoint(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::InvalidConfig, "endpoint must be an http(s) URL: " + url);
  }
  auto path_begin = url.find('/', scheme_end + 3);
  if (path_begin == std::string::npos) return {url, ""};
  std::string base = url.substr(path_begin);
  while (!base.empty() && base.back() == '/') base.pop_back();
  return {url.substr(0, path_begin), base};
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendOptions options) : options_(std::move(options)) {
  split_endpoint(options_.endpoint);
}

Completion HttpBackend::complete(const std::vector<ChatTurn>& history, double temperature) {
  auto [origin, base] = split_endpoint(options_.endpoint);
  json body;
  body["model"] = options_.model;
  body["temperature"] = temperature;
  if (options_.max_tokens) body["max_tokens"] = *options_.max_tokens;
  body["messages"] = json::array();
  for (const auto& t : history) {
    // Tool observations travel as user messages; the envelope protocol does
    // not depend on native tool calling.
    std::string role(t.role == Role::Tool ? "user" : to_string(t.role));
    body["messages"].push_back({{"role", role}, {"content", t.content}});
  }
  const std::string payload = body.dump();

  std::string last_error;
  auto delay = options_.backoff;
  for (unsigned attempt = 0; attempt <= options_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    httplib::Client client(origin);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    client.set_write_timeout(options_.timeout);
    if (!options_.api_key.empty()) client.set_bearer_token_auth(options_.api_key);
    auto res = client.Post(base + "/chat/completions", payload, "application/json");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 512);
      continue;
    }
    try {
      auto j = json::parse(res->body);
      Completion c;
      const auto& msg = j.at("choices").at(0).at("message");
      c.text = msg.at("content").is_null() ? "" : msg.at("content").get<std::string>();
      if (j.contains("usage")) {
        c.usage.prompt_tokens = j["usage"].value("prompt_tokens", std::size_t{0});
        c.usage.completion_tokens = j["usage"].value("completion_tokens", std::size_t{0});
      } else {
        for (const auto& t : history) c.usage.prompt_tokens += t.token_estimate;
        c.usage.completion_tokens = estimate_tokens(c.text);
      }
      c.usage.cost_usd = cost_for(options_.prices, options_.model, c.usage);
      return c;
    } catch (const json::exception& e) {
      last_error = std::string("malformed response: ") + e.what();
    }
  }
  throw Error(ErrorCode::BackendError,
              "chat backend failed after " + std::to_string(options_.max_retries + 1) +
                  " attempts: " + last_error);
}

}  // namespace tracefix
