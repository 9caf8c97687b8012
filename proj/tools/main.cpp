// Copyright 2026 The M2CMAB Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "m2cmab/experiment.hpp"
#include "m2cmab/lp.hpp"
#include "m2cmab/pooling.hpp"
#include "m2cmab/scheduler.hpp"
#include "m2cmab/trace_gen.hpp"

namespace {

namespace fs = std::filesystem;
using m2cmab::Error;
using nlohmann::json;

constexpr int kExitSuccess = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitRuntimeError = 3;
constexpr const char* kVersion = "0.1.0";
constexpr const char* kOutputDirEnv = "M2CMAB_OUTPUT_DIR";

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("schema-error", "cannot open config file '" + path + "'");
  json config;
  try {
    in >> config;
  } catch (const json::parse_error& e) {
    throw Error("schema-error", std::string("config is not valid JSON: ") + e.what());
  }
  if (!config.is_object()) throw Error("schema-error", "config root must be an object");
  if (config.value("schema_version", 0) != 1) {
    throw Error("schema-error", "config needs \"schema_version\": 1");
  }
  return config;
}

void reject_unknown_keys(const json& config, const std::set<std::string>& known,
                         const std::string& where) {
  for (const auto& [key, value] : config.items()) {
    (void)value;
    if (!known.count(key)) {
      throw Error("schema-error", "unknown key '" + key + "' in " + where);
    }
  }
}

// Output directory priority: flag, then environment override, then config.
fs::path resolve_output_dir(const std::string& flag_value, const json& config) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') return env;
  return config.value("output_dir", std::string("."));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("io", "write failure on '" + path.string() + "'");
}

// Wall-clock only ever lands in sidecar metadata, never in results.
void write_sidecar(const fs::path& path, const json& extra) {
  json meta = extra;
  meta["tool_version"] = kVersion;
  const auto now = std::chrono::system_clock::now();
  meta["written_at_unix_ms"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count();
  write_text(path, meta.dump(2) + "\n");
}

m2cmab::sched::SchedulerFlags flags_from_json(const json& j) {
  m2cmab::sched::SchedulerFlags flags;
  if (!j.is_object()) throw Error("schema-error", "\"flags\" must be an object");
  reject_unknown_keys(j,
                      {"phi_min_literal", "normalize_attention", "predicted_cost_gradient",
                       "reanchor_prior_after_initial", "charge_initial_phase"},
                      "flags");
  flags.phi_min_literal = j.value("phi_min_literal", false);
  flags.normalize_attention = j.value("normalize_attention", false);
  flags.predicted_cost_gradient = j.value("predicted_cost_gradient", false);
  flags.reanchor_prior_after_initial = j.value("reanchor_prior_after_initial", false);
  flags.charge_initial_phase = j.value("charge_initial_phase", true);
  return flags;
}

std::int64_t t0_from_ratio(double ratio, std::int64_t horizon, int actions) {
  return std::max<std::int64_t>(
      1, std::llround(ratio * static_cast<double>(horizon) / static_cast<double>(actions + 1)));
}

m2cmab::BudgetVector budget_from_config(const json& budget, const m2cmab::Trace& trace) {
  if (!budget.is_object()) throw Error("schema-error", "\"budget\" must be an object");
  if (budget.contains("regime")) {
    const std::string name = budget["regime"].get<std::string>();
    for (const auto& regime : m2cmab::bench::derive_budget_regimes(trace)) {
      if (regime.name == name) return regime.budget;
    }
    throw Error("schema-error", "unknown budget regime '" + name + "'");
  }
  if (!budget.contains("latency") || !budget.contains("money")) {
    throw Error("schema-error", "\"budget\" needs either a regime or latency+money totals");
  }
  return m2cmab::BudgetVector(
      (Eigen::VectorXd(2) << budget["latency"].get<double>(), budget["money"].get<double>())
          .finished());
}

int cmd_gen_trace(const std::string& config_path, const std::string& out_flag,
                  std::optional<std::uint64_t> seed_flag, std::optional<std::int64_t> tasks_flag) {
  const json config = load_config(config_path);
  reject_unknown_keys(config,
                      {"schema_version", "tasks", "context_dim", "families", "noise_sigma",
                       "mode", "emit_matrices", "backends", "seed", "out", "output_dir"},
                      "gen-trace config");
  m2cmab::bench::GeneratorSpec spec = m2cmab::bench::generator_spec_from_json(config);
  if (tasks_flag) spec.tasks = *tasks_flag;
  const std::uint64_t seed = seed_flag.value_or(config.value("seed", 0ULL));

  std::string out = out_flag.empty() ? config.value("out", std::string()) : out_flag;
  if (out.empty()) throw Error("schema-error", "gen-trace needs an output path");

  const m2cmab::Trace trace = m2cmab::bench::generate_synthetic_trace(spec, seed);
  m2cmab::save_trace(trace, out);
  if (spec.backends.empty()) {
    spec.backends = m2cmab::bench::default_backend_profiles(spec.families);
  }
  write_sidecar(out + ".meta.json",
                json{{"generator", m2cmab::bench::to_json(spec)}, {"seed", seed}});
  std::cout << "wrote " << trace.size() << " tasks to " << out << "\n";
  return kExitSuccess;
}

int cmd_run(const std::string& config_path, const std::string& trace_flag,
            std::optional<std::uint64_t> seed_flag, const std::string& out_flag) {
  const json config = load_config(config_path);
  reject_unknown_keys(config,
                      {"schema_version", "trace", "horizon", "t0", "initial_ratio", "rho", "eta",
                       "refit_every", "seed", "policy", "ablation", "budget", "flags",
                       "record_trajectory", "dump_lp", "checkpoint", "output_dir"},
                      "run config");

  const std::string trace_path =
      trace_flag.empty() ? config.value("trace", std::string()) : trace_flag;
  if (trace_path.empty()) throw Error("schema-error", "run needs a trace path");
  const m2cmab::Trace full_trace = m2cmab::load_trace(trace_path);
  if (full_trace.size() == 0) throw Error("missing-trace", "trace '" + trace_path + "' is empty");

  const std::int64_t horizon = config.value("horizon", std::int64_t{0});
  const m2cmab::Trace trace = horizon > 0 && horizon < full_trace.size()
                                  ? m2cmab::bench::truncate(full_trace, horizon)
                                  : full_trace;

  m2cmab::sched::SchedulerConfig run_config;
  run_config.horizon = trace.size();
  if (config.contains("initial_ratio")) {
    run_config.t0 = t0_from_ratio(config["initial_ratio"].get<double>(), run_config.horizon,
                                  trace.num_actions);
  } else {
    run_config.t0 = config.value("t0", std::int64_t{0});
  }
  if (run_config.t0 < 1) throw Error("schema-error", "run needs \"t0\" or \"initial_ratio\"");
  run_config.rho = config.value("rho", 0.0);
  run_config.eta = config.value("eta", 1.0);
  run_config.refit_every = config.value("refit_every", std::int64_t{1});
  run_config.seed = seed_flag.value_or(config.value("seed", 0ULL));
  run_config.record_trajectory = config.value("record_trajectory", false);
  if (config.contains("flags")) run_config.flags = flags_from_json(config["flags"]);
  if (!config.contains("budget")) throw Error("schema-error", "run config needs \"budget\"");
  run_config.budget = budget_from_config(config["budget"], trace);

  const std::string policy_name = config.value("policy", std::string("M2CMAB"));
  const auto policy = m2cmab::bench::policy_from_name(policy_name);
  const auto ablation =
      m2cmab::bench::ablation_from_name(config.value("ablation", std::string("none")));

  const fs::path out_dir = resolve_output_dir(out_flag, config);
  fs::create_directories(out_dir);
  if (config.value("dump_lp", false)) {
    run_config.dump_lp_path = (out_dir / "initial_lp.json").string();
  }

  const m2cmab::sched::TraceEnvironment env(trace);
  m2cmab::sched::RunResult result;
  const bool wants_checkpoint = config.value("checkpoint", false);
  if (wants_checkpoint && policy == m2cmab::bench::PolicyKind::kM2CMAB && !ablation.active()) {
    // Keep the model in hand so its fitted heads can be checkpointed.
    m2cmab::sched::AdapterValueModel model(
        env.actions(),
        m2cmab::embed::pooled_context(trace.tasks.front().context,
                                      run_config.flags.normalize_attention)
            .size(),
        env.cost_dims(), run_config.eta, run_config.flags.normalize_attention);
    result = m2cmab::sched::run_full(env, run_config, model);
    write_text(out_dir / "checkpoint.json", model.bank().checkpoint().dump(2) + "\n");
  } else {
    result = m2cmab::bench::run_baseline(policy, env, run_config, ablation);
  }

  json summary = m2cmab::sched::run_summary(run_config, result);
  summary["policy"] = policy_name;
  summary["trace"] = trace_path;
  write_text(out_dir / "run_summary.json", summary.dump(2) + "\n");
  if (run_config.record_trajectory) {
    m2cmab::sched::write_trajectory_csv(result, (out_dir / "trajectory.csv").string());
    m2cmab::sched::write_dual_csv(result, (out_dir / "dual.csv").string());
  }
  write_sidecar(out_dir / "run_meta.json", json{{"config_file", config_path}});
  std::cout << summary.dump(2) << "\n";
  return kExitSuccess;
}

int cmd_matrix(const std::string& config_path, const std::string& out_flag, int threads_flag) {
  const json config = load_config(config_path);
  reject_unknown_keys(config,
                      {"schema_version", "traces", "regimes", "policies", "seeds", "ablations",
                       "initial_ratios", "horizon", "t0", "eta", "rho", "refit_every", "flags",
                       "threads", "record_regret_curves", "output_dir"},
                      "matrix config");

  m2cmab::bench::MatrixSpec spec;
  if (!config.contains("traces") || !config["traces"].is_array() || config["traces"].empty()) {
    throw Error("schema-error", "matrix config needs a nonempty \"traces\" array");
  }
  for (const auto& entry : config["traces"]) {
    reject_unknown_keys(entry, {"name", "path", "generate", "gen_seed"}, "trace entry");
    m2cmab::bench::MatrixSpec::TraceEntry trace_entry;
    trace_entry.name = entry.value("name", std::string("trace"));
    if (entry.contains("path")) {
      trace_entry.trace = m2cmab::load_trace(entry["path"].get<std::string>());
    } else if (entry.contains("generate")) {
      const auto gen_spec = m2cmab::bench::generator_spec_from_json(entry["generate"]);
      trace_entry.trace =
          m2cmab::bench::generate_synthetic_trace(gen_spec, entry.value("gen_seed", 0ULL));
    } else {
      throw Error("schema-error", "each trace entry needs \"path\" or \"generate\"");
    }
    spec.traces.push_back(std::move(trace_entry));
  }
  if (config.contains("regimes")) {
    spec.regimes = config["regimes"].get<std::vector<std::string>>();
  }
  if (config.contains("policies")) {
    spec.policies.clear();
    for (const auto& name : config["policies"]) {
      spec.policies.push_back(m2cmab::bench::policy_from_name(name.get<std::string>()));
    }
  }
  if (config.contains("seeds")) spec.seeds = config["seeds"].get<std::vector<std::uint64_t>>();
  if (config.contains("ablations")) {
    spec.ablations = config["ablations"].get<std::vector<std::string>>();
    for (const auto& name : spec.ablations) m2cmab::bench::ablation_from_name(name);  // validate
  }
  if (config.contains("initial_ratios")) {
    spec.initial_ratios = config["initial_ratios"].get<std::vector<double>>();
  }
  spec.horizon = config.value("horizon", std::int64_t{0});
  spec.t0 = config.value("t0", std::int64_t{0});
  spec.eta = config.value("eta", 1.0);
  spec.rho = config.value("rho", 0.0);
  spec.refit_every = config.value("refit_every", std::int64_t{1});
  if (config.contains("flags")) spec.flags = flags_from_json(config["flags"]);
  spec.threads = threads_flag > 0 ? threads_flag : config.value("threads", 0);
  spec.record_regret_curves = config.value("record_regret_curves", false);

  const fs::path out_dir = resolve_output_dir(out_flag, config);
  fs::create_directories(out_dir);

  const auto report = m2cmab::bench::run_matrix(spec);
  write_text(out_dir / "report.json", m2cmab::bench::report_to_json(report).dump(2) + "\n");
  m2cmab::bench::write_report_csv(report, (out_dir / "report.csv").string());
  write_sidecar(out_dir / "matrix_meta.json", json{{"config_file", config_path}});

  std::size_t failed = 0;
  for (const auto& cell : report.cells) failed += cell.failed ? 1 : 0;
  std::cout << "matrix: " << report.cells.size() << " cells, " << failed << " failed, "
            << report.aggregates.size() << " aggregates -> " << (out_dir / "report.json").string()
            << "\n";
  return failed == report.cells.size() && !report.cells.empty() ? kExitRuntimeError
                                                                : kExitSuccess;
}

int cmd_regimes(const std::string& trace_path, std::int64_t horizon, const std::string& out_path) {
  const m2cmab::Trace full_trace = m2cmab::load_trace(trace_path);
  const m2cmab::Trace trace = horizon > 0 && horizon < full_trace.size()
                                  ? m2cmab::bench::truncate(full_trace, horizon)
                                  : full_trace;
  json out = json::object();
  for (const auto& regime : m2cmab::bench::derive_budget_regimes(trace)) {
    out[regime.name] = json{{"latency", regime.budget.totals(m2cmab::kLatencyDim)},
                            {"money", regime.budget.totals(m2cmab::kMoneyDim)}};
  }
  const std::string text = out.dump(2) + "\n";
  if (!out_path.empty()) write_text(out_path, text);
  std::cout << text;
  return kExitSuccess;
}

int cmd_export_plots(const std::string& report_path, const std::string& out_path) {
  std::ifstream in(report_path);
  if (!in) throw Error("missing-report", "cannot open report '" + report_path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw Error("missing-report", std::string("report is not valid JSON: ") + e.what());
  }
  const auto report = m2cmab::bench::report_from_json(j);
  m2cmab::bench::write_tidy_csv(report, out_path);
  std::cout << "wrote tidy CSV with " << report.cells.size() << " cells to " << out_path << "\n";
  return kExitSuccess;
}

int exit_code_for(const Error& error) {
  return error.code() == "schema-error" || error.code() == "invalid-spec" ? kExitConfigError
                                                                          : kExitRuntimeError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"M2-CMAB scheduler: trace generation, runs, experiment matrices"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path, out_flag, trace_flag, report_flag;
  std::int64_t horizon_flag = 0;
  int threads_flag = 0;
  std::optional<std::uint64_t> seed_flag;
  std::optional<std::int64_t> tasks_flag;

  auto* gen = app.add_subcommand("gen-trace", "Generate a synthetic JSONL trace");
  gen->add_option("--config", config_path, "Generator config (JSON)")->required();
  gen->add_option("--out", out_flag, "Output trace path");
  gen->add_option("--seed", seed_flag, "Generator seed (overrides config)");
  gen->add_option("--tasks", tasks_flag, "Task count (overrides config)");

  auto* run = app.add_subcommand("run", "Run one policy on a trace");
  run->add_option("--config", config_path, "Run config (JSON)")->required();
  run->add_option("--trace", trace_flag, "Trace path (overrides config)");
  run->add_option("--seed", seed_flag, "Seed (overrides config)");
  run->add_option("--out", out_flag, "Output directory");

  auto* matrix = app.add_subcommand("matrix", "Run a (trace x regime x policy x seed) matrix");
  matrix->add_option("--config", config_path, "Matrix config (JSON)")->required();
  matrix->add_option("--out", out_flag, "Output directory");
  matrix->add_option("--threads", threads_flag, "Worker threads");

  auto* regimes = app.add_subcommand("regimes", "Derive budget regimes from a trace");
  regimes->add_option("--trace", trace_flag, "Trace path")->required();
  regimes->add_option("--horizon", horizon_flag, "Truncate the trace first");
  regimes->add_option("--out", out_flag, "Also write the JSON here");

  auto* export_plots = app.add_subcommand("export-plots", "Flatten a report into a tidy CSV");
  export_plots->add_option("--report", report_flag, "report.json from `matrix`")->required();
  export_plots->add_option("--out", out_flag, "Output CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_trace(config_path, out_flag, seed_flag, tasks_flag);
    if (run->parsed()) return cmd_run(config_path, trace_flag, seed_flag, out_flag);
    if (matrix->parsed()) return cmd_matrix(config_path, out_flag, threads_flag);
    if (regimes->parsed()) return cmd_regimes(trace_flag, horizon_flag, out_flag);
    if (export_plots->parsed()) return cmd_export_plots(report_flag, out_flag);
  } catch (const Error& error) {
    std::cerr << "error: " << error.what() << "\n";
    return exit_code_for(error);
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << "\n";
    return kExitRuntimeError;
  }
  return kExitSuccess;
}
