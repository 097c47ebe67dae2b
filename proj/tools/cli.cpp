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

#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>

#include "tracefix/agent.hpp"
#include "tracefix/config.hpp"
#include "tracefix/error.hpp"
#include "tracefix/patch.hpp"
#include "tracefix/process.hpp"
#include "tracefix/report.hpp"
#include "tracefix/task.hpp"
#include "tracefix/util.hpp"
#include "tracefix/validate.hpp"

namespace tracefix::cli {

namespace {

struct RunArgs {
  std::vector<std::string> manifests;
  std::string config;
  std::string output_dir;
  unsigned jobs = 1;
};

bool is_input_error(const Error& e) {
  switch (e.code()) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidManifest:
      return true;
    default:
      return false;
  }
}

Config resolve_config(const RunArgs& a, const std::vector<std::string>& env) {
  Config c = a.config.empty() ? Config{} : load_config(a.config);
  apply_env_overrides(c, env);
  if (!a.output_dir.empty()) c.output_dir = fs::absolute(a.output_dir);
  return c;
}

RepairTask resolve_task(const std::string& manifest) {
  auto task = load_task_manifest(manifest);
  check_task_paths(task);
  return task;
}

std::string money(double usd) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "$%.4f", usd);
  return buf;
}

int run_one(const RunArgs& a, const Invocation& inv, std::ostream& out, std::ostream& err) {
  Config config;
  RepairTask task;
  std::unique_ptr<ChatBackend> backend;
  try {
    config = resolve_config(a, inv.env);
    task = resolve_task(a.manifests.front());
    backend = make_backend(config);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    auto agent = agent_config(config);
    fs::create_directories(agent.output_dir);

    ValidateOptions vopts;
    vopts.gates = config.gates;
    vopts.log_dir = agent.output_dir / "validation";
    try {
      vopts.original_class = parse_report(read_file(task.resolve(task.report_path))).vuln_class;
    } catch (const Error&) {
    }
    CommandValidator validator(vopts);

    AgentDeps deps;
    deps.backend = backend.get();
    deps.validator = &validator;
    Outcome o = run_repair(task, agent, deps);

    write_file_atomic(agent.output_dir / "outcome.json", to_json(o).dump(2) + "\n");
    out << to_string(o.status) << ": " << o.iterations << " iteration(s), " << money(o.cost_usd);
    if (o.status == OutcomeStatus::Resolved && o.final_patch) {
      auto diff_path = agent.output_dir / "fix.diff";
      write_file_atomic(diff_path, patch::render_diff(*o.final_patch));
      out << "; patch: " << diff_path.string();
    }
    out << "\n";
    if (!o.detail.empty() && o.status != OutcomeStatus::Resolved) out << "detail: " << o.detail << "\n";
    return o.status == OutcomeStatus::Resolved ? kExitOk : kExitFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_input_error(e) ? kExitUsage : kExitFailure;
  }
}

// One child process per manifest, at most `jobs` at a time.
int run_batch(const RunArgs& a, const Invocation& inv, std::ostream& out, std::ostream& err) {
  Config config;
  try {
    config = resolve_config(a, inv.env);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  const fs::path root = fs::absolute(config.output_dir);
  const std::size_t n = a.manifests.size();
  std::vector<int> codes(n, kExitFailure);
  std::vector<std::string> lines(n);
  std::vector<fs::path> dirs(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto stem = fs::absolute(a.manifests[i]).parent_path().filename().string();
    dirs[i] = root / (std::to_string(i + 1) + "-" + (stem.empty() ? "task" : stem));
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      ProcessSpec spec;
      spec.argv = {inv.self_exe.string(), "run", fs::absolute(a.manifests[i]).string(),
                   "--output-dir", dirs[i].string()};
      if (!a.config.empty()) {
        spec.argv.push_back("--config");
        spec.argv.push_back(fs::absolute(a.config).string());
      }
      spec.merge_stderr = true;
      std::error_code ec;
      fs::create_directories(dirs[i], ec);
      auto r = run_process(spec);
      write_file_atomic(dirs[i] / "cli.log", r.out);
      codes[i] = r.term_signal ? kExitFailure : r.exit_code;
      auto first = split_lines(r.out);
      lines[i] = a.manifests[i] + ": " +
                 (first.empty() ? std::string("(no output)") : first.front()) +
                 " [exit " + std::to_string(codes[i]) + "]";
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < std::max(1u, std::min<unsigned>(a.jobs, n)); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  for (const auto& l : lines) out << l << "\n";
  if (std::find(codes.begin(), codes.end(), kExitUsage) != codes.end()) return kExitUsage;
  return std::all_of(codes.begin(), codes.end(), [](int c) { return c == kExitOk; })
             ? kExitOk
             : kExitFailure;
}

int cmd_classify(const std::string& report_path, const std::string& project_root,
                 std::ostream& out, std::ostream& err) {
  auto text = try_read_file(report_path);
  if (!text) {
    err << "error: cannot read report " << report_path << "\n";
    return kExitUsage;
  }
  try {
    ParseOptions opt;
    if (!project_root.empty()) opt.project_root = fs::absolute(project_root);
    auto report = parse_report(*text, opt);
    out << display_name(report.vuln_class) << "\n";
    out << "trapping frame: " << render_frame(trapping_frame(report, opt.project_root)) << "\n";
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return kExitUsage;
  }
}

int cmd_fix_diff(const std::string& diff_path, const std::string& project, double threshold,
                 std::ostream& out, std::ostream& err) {
  auto text = try_read_file(diff_path);
  if (!text) {
    err << "error: cannot read diff " << diff_path << "\n";
    return kExitUsage;
  }
  if (!fs::is_directory(project)) {
    err << "error: --project is not a directory: " << project << "\n";
    return kExitUsage;
  }
  patch::UnifiedDiff parsed;
  try {
    parsed = patch::parse_diff(*text);
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    patch::CorrectOptions opt;
    opt.rejection_threshold = threshold;
    auto corrected = patch::correct_diff(parsed, project, opt);
    auto rendered = patch::render_diff(corrected);
    // Nothing to fix: hand back the input untouched.
    out << (rendered == patch::render_diff(parsed) ? *text : rendered);
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return kExitFailure;
  }
}

int cmd_reproduce(const RunArgs& a, const Invocation& inv, std::ostream& out, std::ostream& err) {
  Config config;
  RepairTask task;
  try {
    config = resolve_config(a, inv.env);
    task = resolve_task(a.manifests.front());
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    auto workdir = fs::absolute(config.output_dir) / "reproduce";
    make_working_copy(task.project_root, workdir, {fs::absolute(config.output_dir)});
    ValidateOptions vopts;
    vopts.gates = config.gates;
    auto p = preflight(task, workdir, vopts);
    if (!p.reproduced) {
      out << "not reproduced: " << p.detail << "\n";
      return kExitFailure;
    }
    out << "reproduced";
    if (p.observed) {
      out << ": " << display_name(p.observed->vuln_class);
      try {
        out << " at " << render_frame(trapping_frame(*p.observed, workdir));
      } catch (const Error&) {
      }
    }
    out << "\n";
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_input_error(e) ? kExitUsage : kExitFailure;
  }
}

}  // namespace

int run(const Invocation& inv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sanitizer-driven repair harness", "tracefix"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "Run the repair loop on task manifests");
  run_cmd->add_option("manifest", run_args.manifests, "Task manifest(s)")->required();
  run_cmd->add_option("--config", run_args.config, "Config file (JSON)");
  run_cmd->add_option("--output-dir", run_args.output_dir, "Overrides output_dir");
  run_cmd->add_option("--jobs", run_args.jobs, "Parallel child processes for batches")
      ->check(CLI::PositiveNumber);

  std::string report_path, report_root;
  auto* classify_cmd = app.add_subcommand("classify", "Classify a sanitizer report");
  classify_cmd->add_option("report", report_path, "Report file")->required();
  classify_cmd->add_option("--project-root", report_root, "Rewrite frame paths relative to it");

  std::string diff_path, project;
  double threshold = 0.35;
  auto* fix_cmd = app.add_subcommand("fix-diff", "Re-align a unified diff against a project");
  fix_cmd->add_option("diff", diff_path, "Diff file")->required();
  fix_cmd->add_option("--project", project, "Project root")->required();
  fix_cmd->add_option("--threshold", threshold, "Mean per-line rejection threshold");

  RunArgs repro_args;
  auto* repro_cmd = app.add_subcommand("reproduce", "Build and run the PoC once (preflight)");
  repro_cmd->add_option("manifest", repro_args.manifests, "Task manifest")->required()->expected(1);
  repro_cmd->add_option("--config", repro_args.config, "Config file (JSON)");
  repro_cmd->add_option("--output-dir", repro_args.output_dir, "Overrides output_dir");

  try {
    std::vector<std::string> reversed(inv.args.rbegin(), inv.args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  if (run_cmd->parsed()) {
    if (run_args.manifests.size() > 1 || run_args.jobs > 1) return run_batch(run_args, inv, out, err);
    return run_one(run_args, inv, out, err);
  }
  if (classify_cmd->parsed()) return cmd_classify(report_path, report_root, out, err);
  if (fix_cmd->parsed()) return cmd_fix_diff(diff_path, project, threshold, out, err);
  return cmd_reproduce(repro_args, inv, out, err);
}

}  // namespace tracefix::cli
