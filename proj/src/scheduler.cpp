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

#include "m2cmab/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "m2cmab/lp.hpp"
#include "m2cmab/pooling.hpp"

namespace m2cmab::sched {

namespace {

constexpr double kProbabilityTol = 1e-9;

Eigen::Index context_dim_of(const Trace& trace, bool normalize_attention) {
  if (trace.tasks.empty()) throw Error("malformed-field", "empty trace");
  return embed::pooled_context(trace.tasks.front().context, normalize_attention).size();
}

// Commits the round if it fits in the remaining budget; otherwise reports
// the first violated dimension. `enforce` off records without checking
// (exempted initial phase).
bool try_commit(RunLedger& ledger, const Eigen::VectorXd& charged_baseline,
                const BudgetVector& budget, std::int64_t round, int action, double reward,
                const CostVector& cost, int* violated_dim, bool enforce = true) {
  if (enforce) {
    const Eigen::VectorXd after = ledger.consumed.values - charged_baseline + cost.values;
    for (Eigen::Index c = 0; c < budget.dims(); ++c) {
      if (after(c) > budget.totals(c)) {
        *violated_dim = static_cast<int>(c);
        return false;
      }
    }
  }
  ledger.append(round, action, reward, cost);
  return true;
}

}  // namespace

TraceEnvironment::TraceEnvironment(const Trace& trace, std::vector<ActionSpec> actions)
    : trace_(&trace), actions_(std::move(actions)) {
  if (static_cast<int>(actions_.size()) != trace.num_actions) {
    throw Error("dimension-mismatch", "action set size does not match the trace");
  }
  m2cmab::validate(actions_);
}

TraceEnvironment::TraceEnvironment(const Trace& trace)
    : TraceEnvironment(trace, one_hot_actions(trace.num_actions)) {}

const TaskContext& TraceEnvironment::context(std::int64_t round) const {
  if (round < 0 || round >= rounds()) {
    throw Error("environment-exhausted", "round " + std::to_string(round) + " beyond trace end");
  }
  return trace_->tasks[static_cast<std::size_t>(round)].context;
}

double TraceEnvironment::true_reward(std::int64_t round, int action) const {
  return trace_->tasks.at(static_cast<std::size_t>(round)).rewards(action);
}

CostVector TraceEnvironment::true_cost(std::int64_t round, int action) const {
  return CostVector(trace_->tasks.at(static_cast<std::size_t>(round)).costs.row(action).transpose());
}

AdapterValueModel::AdapterValueModel(const std::vector<ActionSpec>& actions,
                                     Eigen::Index context_dim, Eigen::Index cost_dims, double eta,
                                     bool normalize_attention)
    : actions_(&actions),
      bank_(actions.front().action_embedding.size() + context_dim, cost_dims, eta),
      normalize_attention_(normalize_attention) {}

Eigen::VectorXd AdapterValueModel::rewards(const TaskContext& ctx) {
  Eigen::VectorXd out(actions_->size());
  for (const ActionSpec& a : *actions_) {
    out(a.action_id) = bank_.predict_reward(embed::joint_feature(ctx, a, normalize_attention_));
  }
  return out;
}

Eigen::MatrixXd AdapterValueModel::costs(const TaskContext& ctx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(actions_->size()), bank_.cost_dims());
  for (const ActionSpec& a : *actions_) {
    out.row(a.action_id) =
        bank_.predict_cost(embed::joint_feature(ctx, a, normalize_attention_)).values.transpose();
  }
  return out;
}

void AdapterValueModel::observe(const ObservationRecord& record) {
  const ActionSpec& action = actions_->at(static_cast<std::size_t>(record.action_id));
  bank_.observe(embed::joint_feature(record.context, action, normalize_attention_), record.reward,
                record.cost);
}

std::pair<double, double> AdapterValueModel::holdout(
    std::span<const ObservationRecord> validation) {
  return pred::holdout_error(bank_, validation, *actions_, normalize_attention_);
}

Eigen::VectorXd OracleValueModel::rewards(const TaskContext& ctx) {
  return env_->trace().tasks.at(static_cast<std::size_t>(ctx.round_index)).rewards;
}

Eigen::MatrixXd OracleValueModel::costs(const TaskContext& ctx) {
  return env_->trace().tasks.at(static_cast<std::size_t>(ctx.round_index)).costs;
}

void validate_config(const SchedulerConfig& config, int num_actions, std::int64_t trace_rounds) {
  if (num_actions < 2) throw Error("invalid-spec", "at least two actions are required");
  if (config.horizon < 1) throw Error("invalid-spec", "horizon must be positive");
  if (config.t0 < 1) throw Error("invalid-spec", "t0 must be positive");
  if ((num_actions + 1) * config.t0 >= config.horizon) {
    throw Error("invalid-spec", "(A+1)*T0 must be smaller than the horizon");
  }
  if (config.rho < 0.0) throw Error("invalid-spec", "rho must be nonnegative");
  if (config.refit_every < 1) throw Error("invalid-spec", "refit_every must be positive");
  if (config.eta <= 0.0) throw Error("invalid-spec", "eta must be positive");
  m2cmab::validate(config.budget);
  if (trace_rounds < config.horizon) {
    throw Error("environment-exhausted",
                "trace supplies " + std::to_string(trace_rounds) + " rounds, horizon is " +
                    std::to_string(config.horizon));
  }
}

double estimation_uncertainty(int num_actions, double e_r, double e_c, double d_dims,
                              std::int64_t horizon, Eigen::Index cost_dims, std::int64_t t0) {
  return std::sqrt(static_cast<double>(num_actions) * (e_r + d_dims * e_c) +
                   4.0 *
                       std::log(static_cast<double>(horizon) * static_cast<double>(cost_dims)) /
                       static_cast<double>(t0));
}

double dual_radius(double opt_hat, double m_t0, std::int64_t horizon, const BudgetVector& budget,
                   bool phi_min_literal) {
  const double phi_min = phi_min_literal ? (1.0 / budget.totals.array()).maxCoeff()
                                         : budget.totals.minCoeff();
  return static_cast<double>(horizon) / phi_min * (opt_hat + m_t0);
}

std::string stop_reason_for_dimension(int dimension) {
  if (dimension >= 0 && dimension < static_cast<int>(cost_dim_names().size())) {
    return cost_dim_names()[static_cast<std::size_t>(dimension)] + "_budget";
  }
  return "budget_" + std::to_string(dimension);
}

ActionDistribution sampling_distribution(const Eigen::VectorXd& scores, double rho) {
  const Eigen::Index actions = scores.size();
  if (actions < 2) throw Error("invalid-spec", "sampling needs at least two actions");
  if (!scores.allFinite()) throw Error("malformed-field", "non-finite action scores");
  if (rho < 0.0) throw Error("invalid-spec", "rho must be nonnegative");

  Eigen::Index best = 0;
  for (Eigen::Index a = 1; a < actions; ++a) {
    if (scores(a) > scores(best)) best = a;  // ties keep the lowest id
  }

  ActionDistribution dist;
  dist.argmax_action = static_cast<int>(best);
  dist.probabilities.resize(actions);
  double others = 0.0;
  for (Eigen::Index a = 0; a < actions; ++a) {
    if (a == best) continue;
    const double p = 1.0 / (static_cast<double>(actions) + rho * (scores(best) - scores(a)));
    dist.probabilities(a) = p;
    others += p;
  }
  dist.probabilities(best) = 1.0 - others;
  if (dist.probabilities(best) < -kProbabilityTol) {
    throw Error("internal", "negative probability mass on the argmax action");
  }
  dist.probabilities(best) = std::max(0.0, dist.probabilities(best));
  return dist;
}

InitialPhaseResult run_initial_phase(const TraceEnvironment& env, const SchedulerConfig& config,
                                     ValueModel& model, Rng& rng, RunLedger& ledger,
                                     bool estimate_radius) {
  const int actions = env.num_actions();
  const Eigen::Index dims = env.cost_dims();
  const std::int64_t t0 = config.t0;

  InitialPhaseResult result;
  result.history.reserve(static_cast<std::size_t>((actions + 1) * t0));

  const Eigen::VectorXd baseline = Eigen::VectorXd::Zero(dims);
  const bool enforce = config.flags.charge_initial_phase;

  // Stage I: T0 shuffled blocks of all A actions so every action reaches
  // its quota even if the budget dies early.
  std::vector<int> schedule;
  schedule.reserve(static_cast<std::size_t>(actions * t0));
  for (std::int64_t block = 0; block < t0; ++block) {
    std::vector<int> ids(static_cast<std::size_t>(actions));
    for (int a = 0; a < actions; ++a) ids[static_cast<std::size_t>(a)] = a;
    rng.shuffle(ids);
    schedule.insert(schedule.end(), ids.begin(), ids.end());
  }

  std::int64_t round = ledger.rounds_executed;
  for (int action : schedule) {
    const TaskContext& ctx = env.context(round);
    const double reward = env.true_reward(round, action);
    const CostVector cost = env.true_cost(round, action);
    int violated = -1;
    if (!try_commit(ledger, baseline, config.budget, round, action, reward, cost, &violated,
                    enforce)) {
      result.stop_dimension = violated;
      return result;
    }
    ObservationRecord record{reward, cost, action, ctx};
    model.observe(record);
    result.history.push_back(std::move(record));
    ++round;
  }
  model.refit();

  // Stage II: uniformly random actions, held out from the stage-I fit.
  std::vector<ObservationRecord> stage2;
  stage2.reserve(static_cast<std::size_t>(t0));
  for (std::int64_t i = 0; i < t0; ++i) {
    const int action = static_cast<int>(rng.uniform_int(actions));
    const TaskContext& ctx = env.context(round);
    const double reward = env.true_reward(round, action);
    const CostVector cost = env.true_cost(round, action);
    int violated = -1;
    if (!try_commit(ledger, baseline, config.budget, round, action, reward, cost, &violated,
                    enforce)) {
      result.stop_dimension = violated;
      return result;
    }
    ObservationRecord record{reward, cost, action, ctx};
    model.observe(record);
    stage2.push_back(record);
    result.history.push_back(std::move(record));
    ++round;
  }

  result.gradient_bound = 1.0 / static_cast<double>(config.horizon);
  for (const ObservationRecord& rec : result.history) {
    const Eigen::ArrayXd normalized = rec.cost.values.array() / config.budget.totals.array();
    result.gradient_bound = std::max(
        result.gradient_bound, 1.0 / static_cast<double>(config.horizon) + normalized.maxCoeff());
  }

  if (estimate_radius) {
    const auto [e_r, e_c] = model.holdout(stage2);
    const double d_dims =
        config.uncertainty_dims < 0.0 ? static_cast<double>(dims) : config.uncertainty_dims;
    const double horizon = static_cast<double>(config.horizon);
    result.M_T0 = estimation_uncertainty(actions, e_r, e_c, d_dims, config.horizon, dims, t0);

    // Estimated-optimum LP over the stage-II contexts with predicted
    // values, per-round normalization 1/T0 and the M(T0) slack on the rhs.
    lp::RoundwiseLP program;
    program.allow_skip = true;
    program.reward_matrix.resize(t0, actions);
    program.cost_per_dim.assign(static_cast<std::size_t>(dims),
                                Eigen::MatrixXd(t0, actions));
    for (std::int64_t i = 0; i < t0; ++i) {
      const TaskContext& ctx = stage2[static_cast<std::size_t>(i)].context;
      program.reward_matrix.row(i) =
          model.rewards(ctx).transpose() / static_cast<double>(t0);
      const Eigen::MatrixXd predicted = model.costs(ctx);
      for (Eigen::Index c = 0; c < dims; ++c) {
        program.cost_per_dim[static_cast<std::size_t>(c)].row(i) =
            predicted.col(c).transpose() /
            (static_cast<double>(t0) * config.budget.totals(c));
      }
    }
    program.rhs = (1.0 / horizon + 2.0 * result.M_T0 / config.budget.totals.array()).matrix();
    if (!config.dump_lp_path.empty()) lp::dump_instance(program, config.dump_lp_path);
    result.opt_hat = lp::solve(program).objective_value;

    result.Lambda = dual_radius(result.opt_hat, result.M_T0, config.horizon, config.budget,
                                config.flags.phi_min_literal);
  }

  result.completed = true;
  return result;
}

RunResult run_exploration_exploitation(const TraceEnvironment& env, const SchedulerConfig& config,
                                       const InitialPhaseResult& init, ValueModel& model,
                                       Rng& rng, RunLedger ledger) {
  const int actions = env.num_actions();
  const Eigen::Index dims = env.cost_dims();
  const std::int64_t ee_start = (actions + 1) * config.t0;
  const std::int64_t ee_horizon = config.horizon - ee_start;

  RunResult result;
  result.Lambda = init.Lambda;
  result.opt_hat = init.opt_hat;
  result.M_T0 = init.M_T0;
  result.initial_phase_completed = init.completed;

  const double rho = config.rho > 0.0
                         ? config.rho
                         : std::sqrt(static_cast<double>(actions) * static_cast<double>(ee_horizon));
  const double gradient_bound = config.gradient_bound_override > 0.0
                                    ? config.gradient_bound_override
                                    : init.gradient_bound;
  const double step = config.step_size_override > 0.0
                          ? config.step_size_override
                          : omd::default_step_size(dims, ee_horizon, gradient_bound);

  omd::DualState dual =
      omd::make_dual_state(dims, init.Lambda, [step](std::int64_t) { return step; });

  Eigen::VectorXd baseline = Eigen::VectorXd::Zero(dims);
  if (!config.flags.charge_initial_phase) baseline = ledger.consumed.values;

  result.stop_reason = "horizon";
  for (std::int64_t round = ee_start; round < config.horizon; ++round) {
    const TaskContext& ctx = env.context(round);
    const Eigen::VectorXd predicted_rewards = model.rewards(ctx);
    const Eigen::MatrixXd predicted_costs = model.costs(ctx);

    Eigen::VectorXd scores(actions);
    for (int a = 0; a < actions; ++a) {
      scores(a) = omd::lagrangian_score(predicted_rewards(a),
                                        CostVector(predicted_costs.row(a).transpose()), dual,
                                        config.budget, config.horizon);
    }
    const ActionDistribution dist = sampling_distribution(scores, rho);
    const int action = rng.sample_index(dist.probabilities);

    const double reward = env.true_reward(round, action);
    const CostVector cost = env.true_cost(round, action);
    int violated = -1;
    if (!try_commit(ledger, baseline, config.budget, round, action, reward, cost, &violated)) {
      ++result.would_be_violations;
      result.stop_reason = stop_reason_for_dimension(violated);
      break;
    }

    if (config.record_trajectory) {
      result.trajectory.push_back({round, action, reward, cost.values, dual.lambda, dual.slack,
                                   scores(dist.argmax_action)});
    }

    model.observe(ObservationRecord{reward, cost, action, ctx});
    if ((round - ee_start + 1) % config.refit_every == 0) model.refit();

    const CostVector gradient_cost =
        config.flags.predicted_cost_gradient
            ? CostVector(predicted_costs.row(action).transpose())
            : cost;
    dual = omd::omd_step(dual, omd::dual_gradient(gradient_cost, config.budget, config.horizon),
                         round);
    omd::validate(dual);
  }

  result.ledger = std::move(ledger);
  return result;
}

RunResult run_full(const TraceEnvironment& env, const SchedulerConfig& config, ValueModel& model) {
  validate_config(config, env.num_actions(), env.rounds());
  Rng rng(config.seed);
  RunLedger ledger(env.cost_dims());

  InitialPhaseResult init = run_initial_phase(env, config, model, rng, ledger);
  if (!init.completed) {
    RunResult result;
    result.stop_reason = stop_reason_for_dimension(init.stop_dimension);
    result.would_be_violations = 1;
    result.ledger = std::move(ledger);
    return result;
  }

  if (config.flags.reanchor_prior_after_initial) model.reanchor();
  model.refit();  // fold stage-II observations in before the loop starts

  return run_exploration_exploitation(env, config, init, model, rng, std::move(ledger));
}

RunResult run_full(const TraceEnvironment& env, const SchedulerConfig& config) {
  AdapterValueModel model(env.actions(),
                          context_dim_of(env.trace(), config.flags.normalize_attention),
                          env.cost_dims(), config.eta, config.flags.normalize_attention);
  return run_full(env, config, model);
}

nlohmann::json run_summary(const SchedulerConfig& config, const RunResult& result) {
  nlohmann::json consumed = nlohmann::json::array();
  for (Eigen::Index c = 0; c < result.ledger.consumed.values.size(); ++c) {
    consumed.push_back(result.ledger.consumed.values(c));
  }
  nlohmann::json budget = nlohmann::json::array();
  for (Eigen::Index c = 0; c < config.budget.dims(); ++c) {
    budget.push_back(config.budget.totals(c));
  }
  return nlohmann::json{
      {"config",
       {{"horizon", config.horizon},
        {"t0", config.t0},
        {"rho", config.rho},
        {"seed", config.seed},
        {"refit_every", config.refit_every},
        {"eta", config.eta},
        {"budget", budget},
        {"phi_min_literal", config.flags.phi_min_literal},
        {"normalize_attention", config.flags.normalize_attention},
        {"predicted_cost_gradient", config.flags.predicted_cost_gradient},
        {"reanchor_prior_after_initial", config.flags.reanchor_prior_after_initial},
        {"charge_initial_phase", config.flags.charge_initial_phase}}},
      {"Lambda", result.Lambda},
      {"opt_hat", result.opt_hat},
      {"M_T0", result.M_T0},
      {"rounds_executed", result.ledger.rounds_executed},
      {"avg_reward", result.average_reward()},
      {"reward_sum", result.ledger.reward_sum},
      {"consumed", consumed},
      {"stop_reason", result.stop_reason},
      {"would_be_violations", result.would_be_violations}};
}

void write_trajectory_csv(const RunResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write trajectory CSV '" + path + "'");
  out.precision(17);
  const Eigen::Index dims =
      result.trajectory.empty() ? 0 : result.trajectory.front().cost.size();
  out << "round,action,reward";
  for (Eigen::Index c = 0; c < dims; ++c) out << ",cost_" << (c + 1);
  for (Eigen::Index c = 0; c < dims; ++c) out << ",lambda_" << (c + 1);
  out << ",score_max\n";
  for (const TrajectoryRow& row : result.trajectory) {
    out << row.round << ',' << row.action_id << ',' << row.reward;
    for (Eigen::Index c = 0; c < dims; ++c) out << ',' << row.cost(c);
    for (Eigen::Index c = 0; c < dims; ++c) out << ',' << row.lambda(c);
    out << ',' << row.score_max << '\n';
  }
}

void write_dual_csv(const RunResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write dual CSV '" + path + "'");
  out.precision(17);
  const Eigen::Index dims =
      result.trajectory.empty() ? 0 : result.trajectory.front().lambda.size();
  out << "round";
  for (Eigen::Index c = 0; c < dims; ++c) out << ",lambda_" << (c + 1);
  out << ",slack\n";
  for (const TrajectoryRow& row : result.trajectory) {
    out << row.round;
    for (Eigen::Index c = 0; c < dims; ++c) out << ',' << row.lambda(c);
    out << ',' << row.slack << '\n';
  }
}

}  // namespace m2cmab::sched
