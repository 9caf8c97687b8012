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

#ifndef M2CMAB_EXPERIMENT_HPP_
#define M2CMAB_EXPERIMENT_HPP_

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "m2cmab/scheduler.hpp"
#include "m2cmab/trace.hpp"
#include "m2cmab/types.hpp"

namespace m2cmab::bench {

enum class PolicyKind {
  kRandom,
  kLatencyFirst,
  kMoneyFirst,
  kThresholdBased,
  kOptimal,
  kM2CMAB,
};

std::string policy_name(PolicyKind policy);
PolicyKind policy_from_name(const std::string& name);
const std::vector<PolicyKind>& all_policies();

// Which predictor head, if any, is replaced by a uniform-random one.
// "none", "reward", or "cost_<dim>" ("latency"/"money" accepted for the
// two trace dimensions).
struct AblationSpec {
  bool reward = false;
  int cost_dim = -1;

  bool active() const { return reward || cost_dim >= 0; }
};

AblationSpec ablation_from_name(const std::string& name);
std::string ablation_name(const AblationSpec& ablation);

struct BudgetRegime {
  std::string name;  // Restricted | Normal | Generous
  BudgetVector budget;
};

// Order statistics of per-action aggregated cost, per dimension:
// Restricted = smallest, Normal = second smallest, Generous = median.
std::vector<BudgetRegime> derive_budget_regimes(const Trace& trace);

Trace truncate(const Trace& trace, std::int64_t rounds);

// Runs one policy under the shared hard-stop semantics. Predictor-based
// baselines (latency-first, money-first, threshold-based) get the same
// initial-phase training window as the main policy; Random never consults
// a predictor. Optimal is the main loop fed with true per-round values.
sched::RunResult run_baseline(PolicyKind policy, const sched::TraceEnvironment& env,
                              const sched::SchedulerConfig& config,
                              const AblationSpec& ablation = {});

// External policies (the plug-in slot for methods not built in) run under
// the same environment, config, and hard-stop semantics as the built-ins.
using PolicyFn =
    std::function<sched::RunResult(const sched::TraceEnvironment&, const sched::SchedulerConfig&)>;

struct MatrixSpec {
  struct TraceEntry {
    std::string name;
    Trace trace;
  };
  std::vector<TraceEntry> traces;
  std::vector<std::pair<std::string, PolicyFn>> custom_policies;
  std::vector<std::string> regimes = {"Restricted", "Normal", "Generous"};
  std::vector<PolicyKind> policies = all_policies();
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  // Ablations beyond "none" apply to the main policy only.
  std::vector<std::string> ablations = {"none"};
  // Initial-phase ratios (A+1)*T0 / T; empty uses `t0` directly.
  std::vector<double> initial_ratios;
  std::int64_t horizon = 0;  // 0 means full trace length
  std::int64_t t0 = 0;
  double eta = 1.0;
  double rho = 0.0;
  std::int64_t refit_every = 1;
  sched::SchedulerFlags flags;
  int threads = 0;  // 0 picks hardware concurrency
  bool record_regret_curves = false;
};

struct MatrixCell {
  std::string trace_name;
  std::string regime;
  std::string policy;
  std::string ablation;
  double initial_ratio = 0.0;  // 0 when t0 was given directly
  std::int64_t t0 = 0;
  std::uint64_t seed = 0;

  bool failed = false;
  std::string error;
  double avg_reward = 0.0;
  double reward_sum = 0.0;
  std::int64_t rounds_executed = 0;
  Eigen::VectorXd consumed;
  Eigen::VectorXd utilization;  // consumed / budget
  std::string stop_reason;
  double Lambda = 0.0;
  std::vector<std::pair<std::int64_t, double>> reward_curve;  // (round, cumulative)
};

struct Aggregate {
  std::string trace_name;
  std::string regime;
  std::string policy;
  std::string ablation;
  double initial_ratio = 0.0;
  int seeds = 0;
  double mean_avg_reward = 0.0;
  double std_avg_reward = 0.0;
  double mean_rounds = 0.0;
  Eigen::VectorXd mean_utilization;
};

struct ExperimentReport {
  std::vector<MatrixCell> cells;
  std::vector<Aggregate> aggregates;
};

// Fans independent cells out over worker threads; one failing run is
// isolated in its cell. The reduce is ordered by cell key, so reports are
// deterministic given the seed list.
ExperimentReport run_matrix(const MatrixSpec& spec);

nlohmann::json report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::json& j);
void write_report_csv(const ExperimentReport& report, const std::string& path);
// One tidy row per cell per metric: dataset, regime, policy, ablation,
// ratio, seed, metric, value.
void write_tidy_csv(const ExperimentReport& report, const std::string& path);

}  // namespace m2cmab::bench

#endif  // M2CMAB_EXPERIMENT_HPP_
