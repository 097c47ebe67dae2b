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

#include "tracefix/config.hpp"

#include <set>

#include "tracefix/error.hpp"
#include "tracefix/process.hpp"
#include "tracefix/util.hpp"

namespace tracefix {

namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::InvalidConfig, "config field '" + field + "': " + why);
}

// Typed access to one object level; rejects keys nobody asked about.
class Section {
 public:
  Section(const json& doc, std::string path, std::set<std::string> known)
      : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) invalid(path_.empty() ? "<root>" : path_, "expected an object");
    for (const auto& [key, value] : doc_.items()) {
      if (!known.count(key)) invalid(field(key), "unknown key");
    }
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return doc_.contains(key) && !doc_[key].is_null(); }
  const json& at(const std::string& key) const { return doc_[key]; }

  std::string string(const std::string& key) const {
    if (!doc_[key].is_string()) invalid(field(key), "expected a string");
    return doc_[key].get<std::string>();
  }
  double number(const std::string& key, double min) const {
    if (!doc_[key].is_number()) invalid(field(key), "expected a number");
    double v = doc_[key].get<double>();
    if (v < min) invalid(field(key), "must be >= " + std::to_string(min));
    return v;
  }
  std::uint64_t count(const std::string& key, std::uint64_t min = 0) const {
    if (!doc_[key].is_number_unsigned()) invalid(field(key), "expected a non-negative integer");
    auto v = doc_[key].get<std::uint64_t>();
    if (v < min) invalid(field(key), "must be >= " + std::to_string(min));
    return v;
  }
  std::vector<std::string> strings(const std::string& key) const {
    const auto& v = doc_[key];
    if (!v.is_array()) invalid(field(key), "expected a list of strings");
    std::vector<std::string> out;
    for (const auto& s : v) {
      if (!s.is_string()) invalid(field(key), "expected a list of strings");
      out.push_back(s.get<std::string>());
    }
    return out;
  }
  std::chrono::milliseconds seconds(const std::string& key) const {
    return std::chrono::milliseconds(static_cast<long long>(number(key, 0.001) * 1000.0));
  }

 private:
  const json& doc_;
  std::string path_;
};

fs::path anchored(const fs::path& p, const fs::path& base) {
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

}  // namespace

Config config_from_json(const json& doc, const fs::path& base_dir) {
  Config c;
  Section root(doc, "", {"backend", "budget", "debugger", "timeouts", "distill", "patch", "lsp",
                         "playbook_dir", "output_dir"});

  if (root.has("backend")) {
    Section b(root.at("backend"), "backend",
              {"kind", "transcript", "endpoint", "model", "api_key", "prices", "timeout_s",
               "max_retries", "max_tokens"});
    std::string kind = b.has("kind") ? b.string("kind") : "scripted";
    if (kind == "scripted") {
      c.backend = BackendChoice::Scripted;
    } else if (kind == "http") {
      c.backend = BackendChoice::Http;
    } else {
      invalid("backend.kind", "expected \"scripted\" or \"http\"");
    }
    if (b.has("transcript")) c.transcript = anchored(b.string("transcript"), base_dir);
    if (b.has("endpoint")) c.http.endpoint = b.string("endpoint");
    if (b.has("model")) c.http.model = b.string("model");
    if (b.has("api_key")) c.http.api_key = b.string("api_key");
    if (b.has("timeout_s")) c.http.timeout = b.seconds("timeout_s");
    if (b.has("max_retries")) c.http.max_retries = static_cast<unsigned>(b.count("max_retries"));
    if (b.has("max_tokens")) c.http.max_tokens = b.count("max_tokens", 1);
    if (b.has("prices")) {
      const auto& prices = b.at("prices");
      if (!prices.is_object()) invalid("backend.prices", "expected an object keyed by model");
      for (const auto& [model, entry] : prices.items()) {
        Section p(entry, "backend.prices." + model, {"input_per_mtok", "output_per_mtok"});
        ModelPrice price;
        if (p.has("input_per_mtok")) price.input_per_mtok = p.number("input_per_mtok", 0);
        if (p.has("output_per_mtok")) price.output_per_mtok = p.number("output_per_mtok", 0);
        c.http.prices[model] = price;
      }
    }
  }

  if (root.has("budget")) {
    Section b(root.at("budget"), "budget", {"max_iterations", "temperature", "max_cost_usd"});
    if (b.has("max_iterations")) {
      c.budget.max_iterations = static_cast<unsigned>(b.count("max_iterations", 1));
    }
    if (b.has("temperature")) c.budget.temperature = b.number("temperature", 0);
    if (b.has("max_cost_usd")) c.budget.max_cost_usd = b.number("max_cost_usd", 0);
  }

  if (root.has("debugger")) {
    Section d(root.at("debugger"), "debugger",
              {"kind", "fake_transcript", "passthrough_verbs", "output_cap", "gdb", "rr",
               "recording_cache"});
    if (d.has("kind")) {
      auto kind = d.string("kind");
      if (kind == "forward") {
        c.debugger = BackendKind::Forward;
      } else if (kind == "replay") {
        c.debugger = BackendKind::Replay;
      } else if (kind == "fake") {
        c.debugger = BackendKind::Fake;
      } else {
        invalid("debugger.kind", "expected \"forward\", \"replay\" or \"fake\"");
      }
    }
    if (d.has("fake_transcript")) c.fake_transcript = anchored(d.string("fake_transcript"), base_dir);
    if (d.has("passthrough_verbs")) {
      for (auto& v : d.strings("passthrough_verbs")) c.passthrough_verbs.insert(v);
    }
    if (d.has("output_cap")) c.debugger_output_cap = d.count("output_cap", 1);
    if (d.has("gdb")) c.gdb = d.string("gdb");
    if (d.has("rr")) c.rr = d.string("rr");
    if (d.has("recording_cache")) c.recording_cache = anchored(d.string("recording_cache"), base_dir);
  }

  if (root.has("timeouts")) {
    Section t(root.at("timeouts"), "timeouts",
              {"build_s", "poc_s", "tests_s", "debugger_run_s", "debugger_command_s", "lsp_s"});
    if (t.has("build_s")) c.gates.build = t.seconds("build_s");
    if (t.has("poc_s")) c.gates.poc = t.seconds("poc_s");
    if (t.has("tests_s")) c.gates.tests = t.seconds("tests_s");
    if (t.has("debugger_run_s")) c.debugger_run_timeout = t.seconds("debugger_run_s");
    if (t.has("debugger_command_s")) c.debugger_command_timeout = t.seconds("debugger_command_s");
    if (t.has("lsp_s")) c.lsp_timeout = t.seconds("lsp_s");
  }

  if (root.has("distill")) {
    Section d(root.at("distill"), "distill", {"inline_cap", "feedback", "feedback_script"});
    if (d.has("inline_cap")) c.inline_cap = d.count("inline_cap", 64);
    if (d.has("feedback")) {
      auto mode = d.string("feedback");
      if (mode == "mechanical") {
        c.feedback_mode = FeedbackMode::Mechanical;
      } else if (mode == "script") {
        c.feedback_mode = FeedbackMode::Script;
      } else {
        invalid("distill.feedback", "expected \"mechanical\" or \"script\"");
      }
    }
    if (d.has("feedback_script")) c.feedback_script = d.string("feedback_script");
  }

  if (root.has("patch")) {
    Section p(root.at("patch"), "patch", {"rejection_threshold"});
    if (p.has("rejection_threshold")) c.rejection_threshold = p.number("rejection_threshold", 0);
  }

  if (root.has("lsp")) {
    Section l(root.at("lsp"), "lsp", {"server"});
    if (l.has("server")) {
      c.lsp_server = l.strings("server");
      if (c.lsp_server.empty()) invalid("lsp.server", "must not be empty");
    }
  }

  if (root.has("playbook_dir")) c.playbook_dir = anchored(root.string("playbook_dir"), base_dir);
  if (root.has("output_dir")) c.output_dir = anchored(root.string("output_dir"), base_dir);
  return c;
}

Config load_config(const fs::path& path) {
  auto text = try_read_file(path);
  if (!text) throw Error(ErrorCode::InvalidConfig, "config file not readable: " + path.string());
  json doc;
  try {
    doc = json::parse(*text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig,
                "config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(doc, fs::absolute(path).parent_path());
}

void apply_env_overrides(Config& config, const std::vector<std::string>& env) {
  if (auto v = env_lookup(env, "TRACEFIX_API_KEY")) config.http.api_key = *v;
  if (auto v = env_lookup(env, "TRACEFIX_ENDPOINT")) config.http.endpoint = *v;
  if (auto v = env_lookup(env, "TRACEFIX_MODEL")) config.http.model = *v;
}

void check_config(const Config& c) {
  if (c.backend == BackendChoice::Scripted) {
    if (c.transcript.empty()) invalid("backend.transcript", "required for the scripted backend");
    if (!fs::is_regular_file(c.transcript)) {
      invalid("backend.transcript", "no such file: " + c.transcript.string());
    }
  } else {
    if (c.http.endpoint.empty()) invalid("backend.endpoint", "required for the http backend");
    if (c.http.model.empty()) invalid("backend.model", "required for the http backend");
  }
  if (c.debugger == BackendKind::Fake) {
    if (c.fake_transcript.empty()) invalid("debugger.fake_transcript", "required for kind \"fake\"");
    if (!fs::is_regular_file(c.fake_transcript)) {
      invalid("debugger.fake_transcript", "no such file: " + c.fake_transcript.string());
    }
  }
  if (c.feedback_mode == FeedbackMode::Script && c.feedback_script.empty()) {
    invalid("distill.feedback_script", "required when distill.feedback is \"script\"");
  }
}

AgentConfig agent_config(const Config& c) {
  AgentConfig a;
  a.budget = c.budget;
  a.session.backend = c.debugger;
  a.session.policy.passthrough_verbs = c.passthrough_verbs;
  a.session.output_cap = c.debugger_output_cap;
  a.session.run_timeout = c.debugger_run_timeout;
  a.session.command_timeout = c.debugger_command_timeout;
  a.session.gdb.gdb = c.gdb;
  a.session.gdb.rr = c.rr;
  a.session.gdb.passthrough_verbs = c.passthrough_verbs;
  a.session.recording_cache =
      c.recording_cache.empty() ? c.output_dir / "recordings" : c.recording_cache;
  a.session.fake_transcript = c.fake_transcript;
  a.distill.inline_cap = c.inline_cap;
  a.correct.rejection_threshold = c.rejection_threshold;
  a.lsp.server_argv = c.lsp_server;
  a.lsp.timeout = c.lsp_timeout;
  a.playbook_dir = c.playbook_dir;
  a.output_dir = c.output_dir;
  a.feedback_mode = c.feedback_mode;
  a.feedback_script = c.feedback_script;
  return a;
}

std::unique_ptr<ChatBackend> make_backend(const Config& c) {
  check_config(c);
  if (c.backend == BackendChoice::Scripted) {
    return std::make_unique<ScriptedBackend>(ScriptedBackend::from_file(c.transcript));
  }
  return std::make_unique<HttpBackend>(c.http);
}

}  // namespace tracefix
