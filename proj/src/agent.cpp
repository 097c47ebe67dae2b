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

#include "tracefix/agent.hpp"

#include <fstream>

#include "tracefix/error.hpp"
#include "tracefix/util.hpp"

namespace tracefix {

std::string_view to_string(OutcomeStatus s) {
  switch (s) {
    case OutcomeStatus::Resolved: return "Resolved";
    case OutcomeStatus::BudgetExhausted: return "BudgetExhausted";
    case OutcomeStatus::GaveUp: return "GaveUp";
    case OutcomeStatus::Irreproducible: return "Irreproducible";
  }
  return "GaveUp";
}

std::optional<OutcomeStatus> outcome_status_from_string(std::string_view s) {
  for (auto v : {OutcomeStatus::Resolved, OutcomeStatus::BudgetExhausted, OutcomeStatus::GaveUp,
                 OutcomeStatus::Irreproducible}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

nlohmann::json to_json(const Outcome& o) {
  nlohmann::json doc;
  doc["schema_version"] = kOutcomeSchemaVersion;
  doc["status"] = std::string(to_string(o.status));
  doc["final_patch"] = o.final_patch ? nlohmann::json(patch::render_diff(*o.final_patch))
                                     : nlohmann::json(nullptr);
  doc["iterations"] = o.iterations;
  doc["cost_usd"] = o.cost_usd;
  doc["transcript_path"] = o.transcript_path.generic_string();
  doc["detail"] = o.detail;
  return doc;
}

Outcome outcome_from_json(const nlohmann::json& doc) {
  auto bad = [](const std::string& field) {
    return Error(ErrorCode::InvalidConfig, "outcome document: invalid or missing '" + field + "'");
  };
  if (!doc.is_object()) throw bad("document");
  if (doc.value("schema_version", 0) != kOutcomeSchemaVersion) throw bad("schema_version");
  Outcome o;
  auto status = doc.contains("status") && doc["status"].is_string()
                    ? outcome_status_from_string(doc["status"].get<std::string>())
                    : std::nullopt;
  if (!status) throw bad("status");
  o.status = *status;
  if (doc.contains("final_patch") && doc["final_patch"].is_string()) {
    o.final_patch = patch::parse_diff(doc["final_patch"].get<std::string>());
  }
  if (!doc.contains("iterations") || !doc["iterations"].is_number_unsigned()) throw bad("iterations");
  o.iterations = doc["iterations"].get<unsigned>();
  if (!doc.contains("cost_usd") || !doc["cost_usd"].is_number()) throw bad("cost_usd");
  o.cost_usd = doc["cost_usd"].get<double>();
  o.transcript_path = doc.value("transcript_path", "");
  o.detail = doc.value("detail", "");
  return o;
}

void make_working_copy(const fs::path& source, const fs::path& dest,
                       const std::vector<fs::path>& exclude) {
  std::error_code ec;
  const auto src = fs::weakly_canonical(source);
  const auto dst = fs::weakly_canonical(dest);
  if (!fs::is_directory(src)) {
    throw Error(ErrorCode::Io, "project root is not a directory: " + source.string());
  }
  fs::remove_all(dst, ec);
  fs::create_directories(dst);

  std::vector<fs::path> skip{dst};
  for (const auto& e : exclude) skip.push_back(fs::weakly_canonical(e));
  auto skipped = [&](const fs::path& p) {
    for (const auto& s : skip) {
      if (relative_under(p, s)) return true;
    }
    return false;
  };

  for (auto it = fs::recursive_directory_iterator(src); it != fs::recursive_directory_iterator();
       ++it) {
    const auto& p = it->path();
    if (skipped(p)) {
      if (it->is_directory() && !it->is_symlink()) it.disable_recursion_pending();
      continue;
    }
    const auto target = dst / p.lexically_relative(src);
    if (it->is_symlink()) {
      fs::copy_symlink(p, target);
    } else if (it->is_directory()) {
      fs::create_directories(target);
    } else {
      fs::copy_file(p, target, fs::copy_options::overwrite_existing);
    }
  }
}

namespace {

class TranscriptLog {
 public:
  explicit TranscriptLog(const fs::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error(ErrorCode::Io, "cannot write transcript: " + path.string());
  }

  void write(nlohmann::json record) {
    record["seq"] = seq_++;
    out_ << record.dump() << "\n";
    out_.flush();
  }

 private:
  std::ofstream out_;
  unsigned seq_ = 0;
};

std::string history_digest(const std::vector<ChatTurn>& turns) {
  std::string material;
  for (const auto& t : turns) {
    material += to_string(t.role);
    material += '\0';
    material += t.content;
    material += '\0';
  }
  return fnv1a_hex(material);
}

class RepairLoop {
 public:
  RepairLoop(const RepairTask& task, const AgentConfig& config, AgentDeps deps)
      : task_(task), config_(config), deps_(std::move(deps)) {}

  Outcome run();

 private:
  Outcome finish(OutcomeStatus status, std::string detail);
  void tool(const std::string& kind, const std::string& text, std::string_view raw = {});
  std::string relativize(std::string text) const;

  void on_hypothesis(const HypothesisAction& a);
  void on_view(const ViewSourceAction& a);
  void on_debug(const DebugAction& a);
  void on_script(const ScriptAction& a);
  bool on_patch(const PatchAction& a);  // true when resolved

  std::string open_debugger();
  std::string rules_of_engagement_feedback() const;

  const RepairTask& task_;
  const AgentConfig& config_;
  AgentDeps deps_;

  fs::path out_dir_;
  fs::path workdir_;
  std::unique_ptr<TranscriptLog> log_;
  AgentContext ctx_;
  Budget budget_;
  Guideline guideline_;
  std::optional<patch::UnifiedDiff> final_patch_;
  std::string last_raw_;
  std::string pending_note_;  // prefixed to the next tool turn
  unsigned iteration_ = 0;

  std::optional<DebugSession> session_;
  unsigned restarts_ = 0;
  bool debugger_disabled_ = false;
  std::string debugger_disabled_reason_;
};

Outcome RepairLoop::finish(OutcomeStatus status, std::string detail) {
  Outcome o;
  o.status = status;
  o.iterations = budget_.iterations_used;
  o.cost_usd = budget_.cost_used_usd;
  o.transcript_path = "transcript.jsonl";
  o.detail = relativize(std::move(detail));
  if (status == OutcomeStatus::Resolved) o.final_patch = final_patch_;
  log_->write({{"event", "outcome"}, {"outcome", to_json(o)}});
  return o;
}

std::string RepairLoop::relativize(std::string text) const {
  // The agent and the archive see project-relative paths only.
  const std::string prefix = workdir_.string() + "/";
  for (std::size_t at; (at = text.find(prefix)) != std::string::npos;) text.erase(at, prefix.size());
  return text;
}

void RepairLoop::tool(const std::string& kind, const std::string& text, std::string_view raw) {
  auto content = relativize(pending_note_ + text);
  pending_note_.clear();
  ctx_.append(make_turn(Role::Tool, content));
  nlohmann::json rec = {{"event", "tool_output"},
                        {"iteration", iteration_},
                        {"kind", kind},
                        {"content", content}};
  if (!raw.empty()) {
    const auto rel = relativize(std::string(raw));
    rec["raw_bytes"] = rel.size();
    rec["raw_digest"] = fnv1a_hex(rel);
  }
  log_->write(std::move(rec));
}

std::string RepairLoop::rules_of_engagement_feedback() const {
  std::string out =
      "Patch rejected: state a concrete root-cause hypothesis (hypothesis action) and gather at "
      "least one observation (view_source or debug action) before proposing a patch.\n";
  out += std::string("Hypothesis stated: ") + (ctx_.hypothesis_stated() ? "yes" : "no") +
         "; observations: " + std::to_string(ctx_.debug_evidence_count()) + ".\n";
  if (!guideline_.rules_of_engagement.empty()) {
    out += "Rules of engagement:\n";
    for (const auto& r : guideline_.rules_of_engagement) out += "- " + r + "\n";
  }
  return out;
}

void RepairLoop::on_hypothesis(const HypothesisAction& a) {
  ctx_.mark_hypothesis();
  ctx_.add_note("hypothesis: " + a.text);
  tool("hypothesis",
       "Hypothesis recorded. Confirm it with view_source or debug actions before patching.");
}

void RepairLoop::on_view(const ViewSourceAction& a) {
  try {
    std::string header;
    SourceView view;
    const unsigned radius = a.radius.value_or(kDefaultViewRadius);
    if (!a.symbol.empty()) {
      auto locations = resolve_symbol(workdir_, a.symbol, config_.lsp);
      if (locations.empty()) {
        tool("view_source", "Symbol not found: " + a.symbol);
        return;
      }
      const SymbolLocation* shown = &locations.front();
      for (const auto& l : locations) {
        if (l.kind == LocationKind::Definition) {
          shown = &l;
          break;
        }
      }
      header = "Symbol " + a.symbol + (shown->kind == LocationKind::Definition ? ": definition at "
                                                                               : ": reference at ") +
               shown->path.generic_string() + ":" + std::to_string(shown->line) +
               (shown->low_confidence ? " (low confidence: textual match)" : "") + "\n";
      std::size_t listed = 0;
      for (const auto& l : locations) {
        if (&l == shown) continue;
        if (++listed > 10) {
          header += "  ... " + std::to_string(locations.size() - 11) + " more\n";
          break;
        }
        header += std::string("  ") +
                  (l.kind == LocationKind::Definition ? "definition " : "reference ") +
                  l.path.generic_string() + ":" + std::to_string(l.line) + "\n";
      }
      view = view_source(workdir_, shown->path, shown->line, radius);
    } else {
      view = view_source(workdir_, a.path, a.line, radius);
    }
    std::string raw = header + "== " + view.path.generic_string() + " lines " +
                      std::to_string(view.first_line) + "-" + std::to_string(view.last_line) +
                      " ==\n" + view.text;
    if (view.elided) raw += "[radius clamped to " + std::to_string(kMaxViewRadius) + "]\n";
    ctx_.record_evidence();
    last_raw_ = raw;
    tool("view_source", distill_output(raw, std::nullopt, config_.distill).summary, raw);
  } catch (const Error& e) {
    tool("view_source", "view_source failed: " + std::string(e.what()));
  }
}

std::string RepairLoop::open_debugger() {
  auto target = debug_target_for(task_, workdir_);
  if (deps_.open_session) {
    session_.emplace(deps_.open_session(target, config_.session));
  } else {
    bool fell_back = false;
    session_.emplace(open_session(target, config_.session, &fell_back));
    if (fell_back) ctx_.add_note("replay backend unavailable; using forward execution");
  }
  auto out = session_->run_to_trap();
  std::string text = "[session started: " + std::string(to_string(session_->backend_kind())) +
                     " backend; stopped: " +
                     (out.stop_reason ? std::string(to_string(*out.stop_reason)) : "unknown") +
                     "]\n" + out.raw;
  if (!text.empty() && text.back() != '\n') text += "\n";
  return text;
}

void RepairLoop::on_debug(const DebugAction& a) {
  if (debugger_disabled_) {
    tool("debug", "Debugger unavailable: " + debugger_disabled_reason_);
    return;
  }
  std::string raw;
  std::string notes;
  if (!session_) {
    try {
      raw += open_debugger();
    } catch (const Error& e) {
      session_.reset();
      debugger_disabled_ = true;
      debugger_disabled_reason_ = e.what();
      tool("debug", "Debugger unavailable: " + std::string(e.what()));
      return;
    }
  }

  unsigned executed = 0;
  for (std::size_t i = 0; i < a.commands.size(); ++i) {
    const auto& text = a.commands[i];
    const auto skipped = a.commands.size() - i - 1;
    const std::string not_run =
        skipped ? " " + std::to_string(skipped) + " later command(s) not executed." : "";
    DebugCommand command;
    try {
      command = session_->validate(text);
    } catch (const Error& e) {
      notes += "Command rejected: `" + text + "`: " + e.what() + "." + not_run + "\n";
      break;
    }
    try {
      auto out = session_->execute(command);
      ++executed;
      raw += "(gdb) " + text + "\n" + out.raw;
      if (!raw.empty() && raw.back() != '\n') raw += "\n";
      if (out.timed_out) raw += "[command timed out]\n";
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SessionDead) {
        notes += "Command rejected: `" + text + "`: " + e.what() + "." + not_run + "\n";
        break;
      }
      raw += "(gdb) " + text + "\n[debugger session died: " + e.what() + "]\n";
      session_.reset();
      if (restarts_ >= config_.max_session_restarts) {
        debugger_disabled_ = true;
        debugger_disabled_reason_ = "session died after " + std::to_string(restarts_) +
                                    " restart(s)";
        notes += "Debugger session died; restart limit reached, debugging disabled.\n";
        break;
      }
      ++restarts_;
      notes += "Debugger session died and was restarted (" + std::to_string(restarts_) + "/" +
               std::to_string(config_.max_session_restarts) +
               "); program state was reset to the trap." + not_run + "\n";
      try {
        raw += open_debugger();
      } catch (const Error& restart) {
        session_.reset();
        debugger_disabled_ = true;
        debugger_disabled_reason_ = restart.what();
        notes += "Restart failed: " + std::string(restart.what()) + "\n";
      }
      break;
    }
  }
  if (executed > 0) ctx_.record_evidence();
  last_raw_ = raw;
  // One distilled observation per envelope bounds per-iteration growth.
  auto summary = distill_output(raw, std::nullopt, config_.distill).summary;
  tool("debug", notes.empty() ? summary : summary + notes, raw);
}

void RepairLoop::on_script(const ScriptAction& a) {
  if (a.target != "last") {
    tool("script", "Unsupported script target '" + a.target + "'; only \"last\" is available.");
    return;
  }
  if (last_raw_.empty()) {
    tool("script", std::string(kNoRawOutput));
    return;
  }
  auto result = distill_output(last_raw_, a.code, config_.distill);
  tool("script", result.summary);
}

bool RepairLoop::on_patch(const PatchAction& a) {
  if (!(ctx_.hypothesis_stated() && ctx_.debug_evidence_count() >= 1)) {
    log_->write({{"event", "patch_rejected"},
                 {"iteration", iteration_},
                 {"hypothesis_stated", ctx_.hypothesis_stated()},
                 {"evidence", ctx_.debug_evidence_count()}});
    tool("patch", rules_of_engagement_feedback());
    return false;
  }
  patch::UnifiedDiff corrected;
  try {
    corrected = patch::correct_diff(patch::parse_diff(a.diff), workdir_, config_.correct);
    patch::apply_patch(workdir_, corrected);
  } catch (const Error& e) {
    log_->write({{"event", "patch_failed"},
                 {"iteration", iteration_},
                 {"error", std::string(to_string(e.code()))},
                 {"message", relativize(e.what())}});
    tool("patch", "Patch not applied (" + std::string(to_string(e.code())) + "): " + e.what());
    return false;
  }

  auto result = deps_.validator->validate(task_, workdir_);
  const auto rendered = patch::render_diff(corrected);
  log_->write({{"event", "validation"},
               {"iteration", iteration_},
               {"status", std::string(to_string(result.status))},
               {"feedback", relativize(result.feedback)},
               {"corrected_diff", rendered},
               {"diff_digest", fnv1a_hex(rendered)}});
  if (result.status == ValidationStatus::Pass) {
    final_patch_ = corrected;
    return true;
  }

  // Back to the unpatched sources so the next attempt starts clean.
  try {
    patch::apply_patch(workdir_, patch::reverse_diff(corrected));
  } catch (const Error&) {
    make_working_copy(task_.project_root, workdir_, {out_dir_});
  }
  std::string feedback = result.feedback;
  if (config_.feedback_mode == FeedbackMode::Script && !config_.feedback_script.empty() &&
      !result.raw_log.empty()) {
    feedback = distill_output(result.raw_log, config_.feedback_script, config_.distill).summary;
  }
  tool("validation",
       "Validation failed: " + std::string(to_string(result.status)) + "\n" + feedback);
  return false;
}

Outcome RepairLoop::run() {
  if (!deps_.backend || !deps_.validator) {
    throw Error(ErrorCode::InvalidConfig, "run_repair needs a chat backend and a validator");
  }
  out_dir_ = fs::absolute(config_.output_dir).lexically_normal();
  fs::create_directories(out_dir_);
  workdir_ = out_dir_ / "workdir";
  log_ = std::make_unique<TranscriptLog>(out_dir_ / "transcript.jsonl");
  budget_ = config_.budget;
  budget_.iterations_used = 0;
  budget_.cost_used_usd = 0.0;

  log_->write({{"event", "start"},
               {"schema_version", kOutcomeSchemaVersion},
               {"max_iterations", budget_.max_iterations},
               {"max_cost_usd", budget_.max_cost_usd},
               {"temperature", budget_.temperature}});

  make_working_copy(task_.project_root, workdir_, {out_dir_});

  PreflightResult pf = deps_.preflight ? deps_.preflight(task_, workdir_)
                                       : preflight(task_, workdir_, ValidateOptions{});
  log_->write({{"event", "preflight"},
               {"reproduced", pf.reproduced},
               {"detail", relativize(pf.detail)},
               {"observed_class", pf.observed ? nlohmann::json(std::string(
                                                    display_name(pf.observed->vuln_class)))
                                              : nlohmann::json(nullptr)}});
  if (!pf.reproduced) return finish(OutcomeStatus::Irreproducible, "preflight: " + pf.detail);

  std::optional<SanitizerReport> report;
  try {
    ParseOptions opt;
    opt.project_root = task_.project_root;
    report = parse_report(read_file(task_.resolve(task_.report_path)), opt);
  } catch (const Error&) {
    report = pf.observed;
  }
  if (!report) return finish(OutcomeStatus::Irreproducible, "no parsable sanitizer report");

  const Playbook playbook = config_.playbook_dir ? Playbook::from_directory(*config_.playbook_dir)
                                                 : Playbook::builtin();
  guideline_ = playbook.guidelines_for(report->vuln_class);
  auto bundle = assemble_prompt(task_, *report, guideline_, config_.prompt);
  ctx_.append(make_turn(Role::System, bundle.system_prompt));
  ctx_.append(make_turn(Role::User, bundle.initial_user_message));
  log_->write({{"event", "prompt"},
               {"class", std::string(display_name(report->vuln_class))},
               {"system_digest", fnv1a_hex(bundle.system_prompt)},
               {"user_message", relativize(bundle.initial_user_message)}});

  for (;;) {
    if (!has_budget(budget_)) {
      return finish(OutcomeStatus::BudgetExhausted,
                    "budget exhausted after " + std::to_string(budget_.iterations_used) +
                        " iteration(s)");
    }
    const auto digest = history_digest(ctx_.turns());
    const auto turns = ctx_.turns().size();
    Completion completion;
    try {
      completion = query(*deps_.backend, ctx_.turns(), budget_);
    } catch (const Error& e) {
      switch (e.code()) {
        case ErrorCode::BudgetExhausted:
          return finish(OutcomeStatus::BudgetExhausted, e.what());
        case ErrorCode::TranscriptExhausted:
          return finish(OutcomeStatus::GaveUp, "scripted transcript exhausted");
        default:
          return finish(OutcomeStatus::GaveUp, "backend failure: " + std::string(e.what()));
      }
    }
    iteration_ = budget_.iterations_used;
    log_->write({{"event", "query"},
                 {"iteration", iteration_},
                 {"history_turns", turns},
                 {"history_digest", digest},
                 {"response", completion.text},
                 {"prompt_tokens", completion.usage.prompt_tokens},
                 {"completion_tokens", completion.usage.completion_tokens},
                 {"cost_usd", completion.usage.cost_usd}});
    ctx_.append(make_turn(Role::Assistant, completion.text));

    ParsedAction parsed;
    try {
      parsed = parse_action(completion.text);
    } catch (const Error& e) {
      tool("protocol", std::string(e.what()) +
                           "\nReply with exactly one ```action block holding a JSON object.");
      continue;
    }
    const auto& env = parsed.envelope;
    log_->write({{"event", "action"},
                 {"iteration", iteration_},
                 {"kind", std::string(to_string(env.kind()))},
                 {"envelope", render_action(env)},
                 {"ignored_envelopes", parsed.ignored_envelopes}});
    if (parsed.ignored_envelopes > 0) {
      pending_note_ = "Note: " + std::to_string(parsed.ignored_envelopes) +
                      " additional action block(s) ignored; only the first is executed.\n";
    }

    switch (env.kind()) {
      case ActionKind::Hypothesis:
        on_hypothesis(std::get<HypothesisAction>(env.payload));
        break;
      case ActionKind::ViewSource:
        on_view(std::get<ViewSourceAction>(env.payload));
        break;
      case ActionKind::Debug:
        on_debug(std::get<DebugAction>(env.payload));
        break;
      case ActionKind::Script:
        on_script(std::get<ScriptAction>(env.payload));
        break;
      case ActionKind::Patch:
        if (on_patch(std::get<PatchAction>(env.payload))) {
          return finish(OutcomeStatus::Resolved, "patch validated");
        }
        break;
      case ActionKind::Conclude:
        return finish(OutcomeStatus::GaveUp,
                      "agent concluded: " + std::get<ConcludeAction>(env.payload).rationale);
    }
  }
}

}  // namespace

Outcome run_repair(const RepairTask& task, const AgentConfig& config, AgentDeps deps) {
  RepairLoop loop(task, config, std::move(deps));
  return loop.run();
}

}  // namespace tracefix
