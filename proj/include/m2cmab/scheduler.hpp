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

#ifndef M2CMAB_SCHEDULER_HPP_
#define M2CMAB_SCHEDULER_HPP_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "m2cmab/adapters.hpp"
#include "m2cmab/dual.hpp"
#include "m2cmab/rng.hpp"
#include "m2cmab/trace.hpp"
#include "m2cmab/types.hpp"

namespace m2cmab::sched {

struct SchedulerFlags {
  // Literal Phi_min = |Phi^{-1}|_inf instead of the min-budget reading.
  bool phi_min_literal = false;
  bool normalize_attention = false;
  // Dual gradients from predicted instead of realized costs (ablation).
  bool predicted_cost_gradient = false;
  // Re-anchor ridge priors at the post-initial-phase weights.
  bool reanchor_prior_after_initial = false;
  // Count initial-phase consumption against the budget (default) or not.
  bool charge_initial_phase = true;
};

struct SchedulerConfig {
  std::int64_t horizon = 0;   // T
  std::int64_t t0 = 0;        // per-action plays in stage I; stage II length
  double rho = 0.0;           // exploitation strength; <= 0 picks sqrt(A * T_ee)
  std::uint64_t seed = 0;
  std::int64_t refit_every = 1;
  BudgetVector budget;
  double eta = 1.0;           // ridge regularization
  double step_size_override = 0.0;      // > 0 replaces the derived OMD step
  double gradient_bound_override = 0.0; // > 0 replaces the estimated bound
  double uncertainty_dims = -1.0;       // d in the M(T0) formula; < 0 means C
  SchedulerFlags flags;
  bool record_trajectory = false;
  std::string dump_lp_path;  // when set, the estimated-optimum LP is dumped here
};

// Read-only adapter over a loaded trace: contexts revealed in order, true
// per-action outcomes looked up on execution. Safe to share across threads.
class TraceEnvironment {
 public:
  TraceEnvironment(const Trace& trace, std::vector<ActionSpec> actions);
  // Convenience constructor with one-hot action embeddings.
  explicit TraceEnvironment(const Trace& trace);

  int num_actions() const { return trace_->num_actions; }
  Eigen::Index cost_dims() const { return trace_->cost_dims; }
  std::int64_t rounds() const { return trace_->size(); }
  const std::vector<ActionSpec>& actions() const { return actions_; }
  const Trace& trace() const { return *trace_; }

  const TaskContext& context(std::int64_t round) const;
  double true_reward(std::int64_t round, int action) const;
  CostVector true_cost(std::int64_t round, int action) const;

 private:
  const Trace* trace_;
  std::vector<ActionSpec> actions_;
};

// Per-round estimates of reward and cost for every action. The scheduler
// is agnostic to where they come from: fitted adapters, the trace truth
// (oracle runs), or deliberately degraded heads (ablations).
class ValueModel {
 public:
  virtual ~ValueModel() = default;
  virtual Eigen::VectorXd rewards(const TaskContext& ctx) = 0;
  virtual Eigen::MatrixXd costs(const TaskContext& ctx) = 0;  // A x C, nonneg
  virtual void observe(const ObservationRecord& record) = 0;
  virtual void refit() = 0;
  virtual void reanchor() {}
  virtual std::pair<double, double> holdout(std::span<const ObservationRecord> validation) = 0;
};

// Ridge adapters behind the ValueModel interface.
class AdapterValueModel : public ValueModel {
 public:
  AdapterValueModel(const std::vector<ActionSpec>& actions, Eigen::Index context_dim,
                    Eigen::Index cost_dims, double eta, bool normalize_attention = false);

  Eigen::VectorXd rewards(const TaskContext& ctx) override;
  Eigen::MatrixXd costs(const TaskContext& ctx) override;
  void observe(const ObservationRecord& record) override;
  void refit() override { bank_.refit(); }
  void reanchor() override { bank_.reanchor_priors(); }
  std::pair<double, double> holdout(std::span<const ObservationRecord> validation) override;

  pred::PredictorBank& bank() { return bank_; }

 private:
  const std::vector<ActionSpec>* actions_;
  pred::PredictorBank bank_;
  bool normalize_attention_;
};

// Perfect per-round observations (the oracle-aided upper bound).
class OracleValueModel : public ValueModel {
 public:
  explicit OracleValueModel(const TraceEnvironment& env) : env_(&env) {}

  Eigen::VectorXd rewards(const TaskContext& ctx) override;
  Eigen::MatrixXd costs(const TaskContext& ctx) override;
  void observe(const ObservationRecord&) override {}
  void refit() override {}
  std::pair<double, double> holdout(std::span<const ObservationRecord>) override {
    return {0.0, 0.0};
  }

 private:
  const TraceEnvironment* env_;
};

struct InitialPhaseResult {
  double Lambda = 0.0;
  double opt_hat = 0.0;
  double M_T0 = 0.0;
  std::vector<ObservationRecord> history;  // (A+1)*T0 records when completed
  double gradient_bound = 0.0;             // max_c (1/T + max phi_c / Phi_c)
  bool completed = false;
  int stop_dimension = -1;                 // budget dimension that ended the run
};

struct ActionDistribution {
  Eigen::VectorXd probabilities;
  int argmax_action = 0;
};

// Inverse-gap-weighted sampling:
//   P(a)     = 1 / (A + rho * (S_max - S(a)))   for a != argmax,
//   P(a_max) = 1 - sum of the others.
// rho -> 0 recovers the uniform distribution. Ties for the maximum break
// toward the lowest action id.
ActionDistribution sampling_distribution(const Eigen::VectorXd& scores, double rho);

struct TrajectoryRow {
  std::int64_t round = 0;
  int action_id = 0;
  double reward = 0.0;
  Eigen::VectorXd cost;
  Eigen::VectorXd lambda;  // multiplier used for this round's scores
  double slack = 0.0;
  double score_max = 0.0;
};

struct RunResult {
  RunLedger ledger;
  std::string stop_reason;  // "horizon", "latency_budget", "money_budget", ...
  double Lambda = 0.0;
  double opt_hat = 0.0;
  double M_T0 = 0.0;
  bool initial_phase_completed = false;
  std::int64_t would_be_violations = 0;  // rounds rejected by the hard stop
  std::vector<TrajectoryRow> trajectory;

  double average_reward() const { return ledger.average_reward(); }
};

void validate_config(const SchedulerConfig& config, int num_actions, std::int64_t trace_rounds);

std::string stop_reason_for_dimension(int dimension);

// Aggregated estimation uncertainty
//   M(T0) = sqrt(A * (E_r + d * E_c) + 4 ln(T C) / T0).
double estimation_uncertainty(int num_actions, double e_r, double e_c, double d_dims,
                              std::int64_t horizon, Eigen::Index cost_dims, std::int64_t t0);

// Dual radius Lambda = (T / Phi_min) * (opt_hat + M(T0)). Phi_min is the
// smallest budget total by default; the literal flag uses |Phi^{-1}|_inf
// instead.
double dual_radius(double opt_hat, double m_t0, std::int64_t horizon, const BudgetVector& budget,
                   bool phi_min_literal = false);

// Stage I: T0 shuffled blocks over all actions (every action exactly T0
// times); fit on stage-I history. Stage II: T0 uniformly random actions,
// held out to measure (E_r, E_c); then M(T0), the estimated-optimum LP and
// the dual radius Lambda. `estimate_radius=false` plays and fits only
// (used by greedy baselines that share the warm-up for parity).
InitialPhaseResult run_initial_phase(const TraceEnvironment& env, const SchedulerConfig& config,
                                     ValueModel& model, Rng& rng, RunLedger& ledger,
                                     bool estimate_radius = true);

// The exploration-exploitation loop: score with the current multipliers,
// sample from the inverse-gap weights, commit only if the observed cost
// keeps every budget dimension within its total, refit on cadence, and
// mirror-descend the multipliers.
RunResult run_exploration_exploitation(const TraceEnvironment& env, const SchedulerConfig& config,
                                       const InitialPhaseResult& init, ValueModel& model,
                                       Rng& rng, RunLedger ledger);

// Both phases with one shared ledger; initial-phase consumption counts
// against the budget unless the config exempts it.
RunResult run_full(const TraceEnvironment& env, const SchedulerConfig& config, ValueModel& model);

// run_full with freshly constructed ridge adapters.
RunResult run_full(const TraceEnvironment& env, const SchedulerConfig& config);

// JSON summary {config, Lambda, opt_hat, M_T0, rounds_executed,
// avg_reward, consumed, stop_reason}.
nlohmann::json run_summary(const SchedulerConfig& config, const RunResult& result);

// Per-round CSV (round, action, reward, cost_*, lambda_*, score_max) and
// the dual trajectory CSV (round, lambda_*, slack).
void write_trajectory_csv(const RunResult& result, const std::string& path);
void write_dual_csv(const RunResult& result, const std::string& path);

}  // namespace m2cmab::sched

#endif  // M2CMAB_SCHEDULER_HPP_
