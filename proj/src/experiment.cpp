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

#include "m2cmab/experiment.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <thread>
#include <tuple>

#include "m2cmab/pooling.hpp"
#include "m2cmab/rng.hpp"

namespace m2cmab::bench {

namespace {

constexpr double kThresholdDenomFloor = 1e-12;

// Uniform-random predictions for masked heads, ranges tracked from the
// observations seen so far; everything else passes through to the ridge
// adapters.
class AblatedValueModel : public sched::ValueModel {
 public:
  AblatedValueModel(sched::AdapterValueModel inner, const AblationSpec& ablation,
                    Eigen::Index cost_dims, std::uint64_t seed)
      : inner_(std::move(inner)),
        ablation_(ablation),
        rng_(seed),
        reward_range_{0.0, 1.0},
        cost_lo_(Eigen::VectorXd::Zero(cost_dims)),
        cost_hi_(Eigen::VectorXd::Ones(cost_dims)) {}

  Eigen::VectorXd rewards(const TaskContext& ctx) override {
    Eigen::VectorXd out = inner_.rewards(ctx);
    if (ablation_.reward) {
      for (Eigen::Index a = 0; a < out.size(); ++a) {
        out(a) = rng_.uniform(reward_range_[0], reward_range_[1]);
      }
    }
    return out;
  }

  Eigen::MatrixXd costs(const TaskContext& ctx) override {
    Eigen::MatrixXd out = inner_.costs(ctx);
    if (ablation_.cost_dim >= 0 && ablation_.cost_dim < out.cols()) {
      const Eigen::Index c = ablation_.cost_dim;
      for (Eigen::Index a = 0; a < out.rows(); ++a) {
        out(a, c) = rng_.uniform(cost_lo_(c), cost_hi_(c));
      }
    }
    return out;
  }

  void observe(const ObservationRecord& record) override {
    if (!seen_) {
      reward_range_ = {record.reward, record.reward};
      cost_lo_ = record.cost.values;
      cost_hi_ = record.cost.values;
      seen_ = true;
    } else {
      reward_range_[0] = std::min(reward_range_[0], record.reward);
      reward_range_[1] = std::max(reward_range_[1], record.reward);
      cost_lo_ = cost_lo_.cwiseMin(record.cost.values);
      cost_hi_ = cost_hi_.cwiseMax(record.cost.values);
    }
    inner_.observe(record);
  }

  void refit() override { inner_.refit(); }
  void reanchor() override { inner_.reanchor(); }

  std::pair<double, double> holdout(std::span<const ObservationRecord> validation) override {
    // Measured on this model's own (partly random) predictions.
    double reward_sse = 0.0;
    Eigen::VectorXd cost_sse = Eigen::VectorXd::Zero(cost_lo_.size());
    for (const ObservationRecord& rec : validation) {
      const Eigen::VectorXd r = rewards(rec.context);
      const Eigen::MatrixXd c = costs(rec.context);
      const double dr = r(rec.action_id) - rec.reward;
      reward_sse += dr * dr;
      const Eigen::VectorXd dc = c.row(rec.action_id).transpose() - rec.cost.values;
      cost_sse += dc.cwiseProduct(dc);
    }
    const double n = static_cast<double>(validation.size());
    return {reward_sse / n, cost_sse.size() > 0 ? (cost_sse / n).mean() : 0.0};
  }

 private:
  sched::AdapterValueModel inner_;
  AblationSpec ablation_;
  Rng rng_;
  std::array<double, 2> reward_range_;
  Eigen::VectorXd cost_lo_, cost_hi_;
  bool seen_ = false;
};

Eigen::Index context_dim_of(const Trace& trace, bool normalize_attention) {
  return embed::pooled_context(trace.tasks.front().context, normalize_attention).size();
}

sched::RunResult run_uniform_random(const sched::TraceEnvironment& env,
                                    const sched::SchedulerConfig& config) {
  Rng rng(config.seed);
  RunLedger ledger(env.cost_dims());
  sched::RunResult result;
  result.stop_reason = "horizon";
  for (std::int64_t round = 0; round < config.horizon; ++round) {
    const int action = static_cast<int>(rng.uniform_int(env.num_actions()));
    const double reward = env.true_reward(round, action);
    const CostVector cost = env.true_cost(round, action);
    const Eigen::VectorXd after = ledger.consumed.values + cost.values;
    bool violated = false;
    for (Eigen::Index c = 0; c < config.budget.dims(); ++c) {
      if (after(c) > config.budget.totals(c)) {
        result.stop_reason = sched::stop_reason_for_dimension(static_cast<int>(c));
        ++result.would_be_violations;
        violated = true;
        break;
      }
    }
    if (violated) break;
    ledger.append(round, action, reward, cost);
  }
  result.ledger = std::move(ledger);
  return result;
}

// Latency-first, money-first, and threshold-based policies: identical
// initial phase (without the radius estimate), then a greedy rule on the
// fitted heads, refitting on the same cadence as the main policy.
sched::RunResult run_greedy(PolicyKind policy, const sched::TraceEnvironment& env,
                            const sched::SchedulerConfig& config) {
  sched::validate_config(config, env.num_actions(), env.rounds());
  Rng rng(config.seed);
  RunLedger ledger(env.cost_dims());
  sched::AdapterValueModel model(env.actions(),
                                 context_dim_of(env.trace(), config.flags.normalize_attention),
                                 env.cost_dims(), config.eta, config.flags.normalize_attention);

  sched::RunResult result;
  const sched::InitialPhaseResult init =
      sched::run_initial_phase(env, config, model, rng, ledger, /*estimate_radius=*/false);
  if (!init.completed) {
    result.stop_reason = sched::stop_reason_for_dimension(init.stop_dimension);
    result.would_be_violations = 1;
    result.ledger = std::move(ledger);
    return result;
  }
  model.refit();

  Eigen::VectorXd baseline = Eigen::VectorXd::Zero(env.cost_dims());
  if (!config.flags.charge_initial_phase) baseline = ledger.consumed.values;

  const std::int64_t ee_start = (env.num_actions() + 1) * config.t0;
  result.stop_reason = "horizon";
  for (std::int64_t round = ee_start; round < config.horizon; ++round) {
    const TaskContext& ctx = env.context(round);
    const Eigen::MatrixXd predicted_costs = model.costs(ctx);

    int action = 0;
    if (policy == PolicyKind::kLatencyFirst || policy == PolicyKind::kMoneyFirst) {
      const Eigen::Index dim = policy == PolicyKind::kLatencyFirst ? kLatencyDim : kMoneyDim;
      predicted_costs.col(dim).minCoeff(&action);
    } else {
      const Eigen::VectorXd predicted_rewards = model.rewards(ctx);
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < env.num_actions(); ++a) {
        const double denom = std::max(
            kThresholdDenomFloor,
            (predicted_costs.row(a).transpose().array() / config.budget.totals.array()).mean());
        const double ratio = predicted_rewards(a) / denom;
        if (ratio > best) {
          best = ratio;
          action = a;
        }
      }
    }

    const double reward = env.true_reward(round, action);
    const CostVector cost = env.true_cost(round, action);
    const Eigen::VectorXd after = ledger.consumed.values - baseline + cost.values;
    bool violated = false;
    for (Eigen::Index c = 0; c < config.budget.dims(); ++c) {
      if (after(c) > config.budget.totals(c)) {
        result.stop_reason = sched::stop_reason_for_dimension(static_cast<int>(c));
        ++result.would_be_violations;
        violated = true;
        break;
      }
    }
    if (violated) break;
    ledger.append(round, action, reward, cost);
    model.observe(ObservationRecord{reward, cost, action, ctx});
    if ((round - ee_start + 1) % config.refit_every == 0) model.refit();
  }
  result.ledger = std::move(ledger);
  return result;
}

double median_of_sorted(const std::vector<double>& sorted) {
  const std::size_t n = sorted.size();
  return n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

}  // namespace

std::string policy_name(PolicyKind policy) {
  switch (policy) {
    case PolicyKind::kRandom: return "Random";
    case PolicyKind::kLatencyFirst: return "LatencyFirst";
    case PolicyKind::kMoneyFirst: return "MoneyFirst";
    case PolicyKind::kThresholdBased: return "ThresholdBased";
    case PolicyKind::kOptimal: return "Optimal";
    case PolicyKind::kM2CMAB: return "M2CMAB";
  }
  throw Error("internal", "unknown policy");
}

PolicyKind policy_from_name(const std::string& name) {
  for (PolicyKind p : all_policies()) {
    if (policy_name(p) == name) return p;
  }
  throw Error("invalid-spec", "unknown policy '" + name + "'");
}

const std::vector<PolicyKind>& all_policies() {
  static const std::vector<PolicyKind> kAll = {
      PolicyKind::kRandom,     PolicyKind::kLatencyFirst,   PolicyKind::kMoneyFirst,
      PolicyKind::kThresholdBased, PolicyKind::kOptimal, PolicyKind::kM2CMAB};
  return kAll;
}

AblationSpec ablation_from_name(const std::string& name) {
  AblationSpec spec;
  if (name.empty() || name == "none") return spec;
  if (name == "reward") {
    spec.reward = true;
    return spec;
  }
  if (name == "latency") {
    spec.cost_dim = kLatencyDim;
    return spec;
  }
  if (name == "money") {
    spec.cost_dim = kMoneyDim;
    return spec;
  }
  if (name.rfind("cost_", 0) == 0) {
    spec.cost_dim = std::stoi(name.substr(5));
    return spec;
  }
  throw Error("invalid-spec", "unknown ablation '" + name + "'");
}

std::string ablation_name(const AblationSpec& ablation) {
  if (ablation.reward) return "reward";
  if (ablation.cost_dim == kLatencyDim) return "latency";
  if (ablation.cost_dim == kMoneyDim) return "money";
  if (ablation.cost_dim >= 0) return "cost_" + std::to_string(ablation.cost_dim);
  return "none";
}

std::vector<BudgetRegime> derive_budget_regimes(const Trace& trace) {
  const int actions = trace.num_actions;
  if (actions < 3) throw Error("invalid-spec", "budget regimes need at least 3 actions");
  const Eigen::Index dims = trace.cost_dims;

  Eigen::MatrixXd totals = Eigen::MatrixXd::Zero(actions, dims);
  for (const TraceTask& task : trace.tasks) totals += task.costs;

  Eigen::VectorXd restricted(dims), normal(dims), generous(dims);
  for (Eigen::Index c = 0; c < dims; ++c) {
    std::vector<double> sorted(static_cast<std::size_t>(actions));
    for (int a = 0; a < actions; ++a) sorted[static_cast<std::size_t>(a)] = totals(a, c);
    std::sort(sorted.begin(), sorted.end());
    restricted(c) = sorted[0];
    normal(c) = sorted[1];
    generous(c) = median_of_sorted(sorted);
  }
  return {{"Restricted", BudgetVector(restricted)},
          {"Normal", BudgetVector(normal)},
          {"Generous", BudgetVector(generous)}};
}

Trace truncate(const Trace& trace, std::int64_t rounds) {
  if (rounds >= trace.size()) return trace;
  Trace out;
  out.num_actions = trace.num_actions;
  out.cost_dims = trace.cost_dims;
  out.tasks.assign(trace.tasks.begin(), trace.tasks.begin() + rounds);
  return out;
}

sched::RunResult run_baseline(PolicyKind policy, const sched::TraceEnvironment& env,
                              const sched::SchedulerConfig& config,
                              const AblationSpec& ablation) {
  if (ablation.active() && policy != PolicyKind::kM2CMAB) {
    throw Error("invalid-spec", "ablations apply to the main policy only");
  }
  switch (policy) {
    case PolicyKind::kRandom:
      sched::validate_config(config, env.num_actions(), env.rounds());
      return run_uniform_random(env, config);
    case PolicyKind::kLatencyFirst:
    case PolicyKind::kMoneyFirst:
    case PolicyKind::kThresholdBased:
      return run_greedy(policy, env, config);
    case PolicyKind::kOptimal: {
      sched::OracleValueModel oracle(env);
      return sched::run_full(env, config, oracle);
    }
    case PolicyKind::kM2CMAB: {
      if (!ablation.active()) return sched::run_full(env, config);
      sched::AdapterValueModel inner(
          env.actions(), context_dim_of(env.trace(), config.flags.normalize_attention),
          env.cost_dims(), config.eta, config.flags.normalize_attention);
      AblatedValueModel model(std::move(inner), ablation, env.cost_dims(),
                              mix_seed(config.seed ^ 0xab1a7edULL));
      return sched::run_full(env, config, model);
    }
  }
  throw Error("internal", "unknown policy");
}

ExperimentReport run_matrix(const MatrixSpec& spec) {
  if (spec.traces.empty()) throw Error("invalid-spec", "matrix needs at least one trace");
  if (spec.seeds.empty()) throw Error("invalid-spec", "matrix needs at least one seed");
  if (spec.policies.empty()) throw Error("invalid-spec", "matrix needs at least one policy");
  if (spec.initial_ratios.empty() && spec.t0 < 1) {
    throw Error("invalid-spec", "matrix needs t0 or initial_ratios");
  }

  struct PreparedTrace {
    const MatrixSpec::TraceEntry* entry;
    Trace truncated;
    const Trace* trace;
    std::int64_t horizon;
    std::map<std::string, BudgetVector> budgets;
  };
  std::vector<PreparedTrace> prepared;
  for (const auto& entry : spec.traces) {
    PreparedTrace p;
    p.entry = &entry;
    p.horizon = spec.horizon > 0 ? std::min<std::int64_t>(spec.horizon, entry.trace.size())
                                 : entry.trace.size();
    if (p.horizon < entry.trace.size()) {
      p.truncated = truncate(entry.trace, p.horizon);
      p.trace = &p.truncated;
    } else {
      p.trace = &entry.trace;
    }
    for (const BudgetRegime& regime : derive_budget_regimes(*p.trace)) {
      p.budgets.emplace(regime.name, regime.budget);
    }
    prepared.push_back(std::move(p));
  }

  struct Job {
    const PreparedTrace* trace;
    std::string regime;
    PolicyKind policy;
    const std::pair<std::string, PolicyFn>* custom = nullptr;
    std::string ablation;
    double ratio;
    std::int64_t t0;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  std::vector<double> ratios = spec.initial_ratios;
  if (ratios.empty()) ratios.push_back(0.0);
  for (const PreparedTrace& p : prepared) {
    const int actions = p.trace->num_actions;
    for (const std::string& regime : spec.regimes) {
      if (!p.budgets.count(regime)) throw Error("invalid-spec", "unknown regime '" + regime + "'");
      const auto push_jobs = [&](PolicyKind policy,
                                 const std::pair<std::string, PolicyFn>* custom) {
        for (const std::string& ablation : spec.ablations) {
          if (ablation != "none" && (custom != nullptr || policy != PolicyKind::kM2CMAB)) {
            continue;
          }
          for (double ratio : ratios) {
            std::int64_t t0 = spec.t0;
            if (ratio > 0.0) {
              t0 = std::max<std::int64_t>(
                  1, std::llround(ratio * static_cast<double>(p.horizon) /
                                  static_cast<double>(actions + 1)));
            }
            for (std::uint64_t seed : spec.seeds) {
              jobs.push_back({&p, regime, policy, custom, ablation, ratio, t0, seed});
            }
          }
        }
      };
      for (PolicyKind policy : spec.policies) push_jobs(policy, nullptr);
      for (const auto& custom : spec.custom_policies) {
        push_jobs(PolicyKind::kM2CMAB, &custom);
      }
    }
  }

  ExperimentReport report;
  report.cells.resize(jobs.size());

  std::atomic<std::size_t> next{0};
  const unsigned hardware = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers = std::min<unsigned>(
      spec.threads > 0 ? static_cast<unsigned>(spec.threads) : hardware,
      static_cast<unsigned>(jobs.size()));

  const auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      const Job& job = jobs[i];
      MatrixCell& cell = report.cells[i];
      cell.trace_name = job.trace->entry->name;
      cell.regime = job.regime;
      cell.policy = job.custom != nullptr ? job.custom->first : policy_name(job.policy);
      cell.ablation = job.ablation;
      cell.initial_ratio = job.ratio;
      cell.t0 = job.t0;
      cell.seed = job.seed;
      try {
        sched::TraceEnvironment env(*job.trace->trace);
        sched::SchedulerConfig config;
        config.horizon = job.trace->horizon;
        config.t0 = job.t0;
        config.rho = spec.rho;
        config.seed = job.seed;
        config.refit_every = spec.refit_every;
        config.budget = job.trace->budgets.at(job.regime);
        config.eta = spec.eta;
        config.flags = spec.flags;

        const sched::RunResult result =
            job.custom != nullptr
                ? job.custom->second(env, config)
                : run_baseline(job.policy, env, config, ablation_from_name(job.ablation));
        cell.avg_reward = result.average_reward();
        cell.reward_sum = result.ledger.reward_sum;
        cell.rounds_executed = result.ledger.rounds_executed;
        cell.consumed = result.ledger.consumed.values;
        cell.utilization =
            (result.ledger.consumed.values.array() / config.budget.totals.array()).matrix();
        cell.stop_reason = result.stop_reason;
        cell.Lambda = result.Lambda;
        if (spec.record_regret_curves) {
          const std::int64_t stride =
              std::max<std::int64_t>(1, job.trace->horizon / 50);
          double cumulative = 0.0;
          std::int64_t index = 0;
          for (const DecisionEntry& e : result.ledger.decision_log) {
            cumulative += e.reward;
            if (++index % stride == 0) cell.reward_curve.emplace_back(e.round, cumulative);
          }
        }
      } catch (const std::exception& e) {
        cell.failed = true;
        cell.error = e.what();
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();

  // Deterministic reduce over seeds, keyed by everything else in job order.
  std::map<std::tuple<std::string, std::string, std::string, std::string, double>,
           std::vector<const MatrixCell*>>
      groups;
  for (const MatrixCell& cell : report.cells) {
    if (cell.failed) continue;
    groups[{cell.trace_name, cell.regime, cell.policy, cell.ablation, cell.initial_ratio}]
        .push_back(&cell);
  }
  for (const auto& [key, cells] : groups) {
    Aggregate agg;
    agg.trace_name = std::get<0>(key);
    agg.regime = std::get<1>(key);
    agg.policy = std::get<2>(key);
    agg.ablation = std::get<3>(key);
    agg.initial_ratio = std::get<4>(key);
    agg.seeds = static_cast<int>(cells.size());
    double sum = 0.0, sum_rounds = 0.0;
    Eigen::VectorXd util = Eigen::VectorXd::Zero(cells.front()->utilization.size());
    for (const MatrixCell* c : cells) {
      sum += c->avg_reward;
      sum_rounds += static_cast<double>(c->rounds_executed);
      util += c->utilization;
    }
    agg.mean_avg_reward = sum / agg.seeds;
    agg.mean_rounds = sum_rounds / agg.seeds;
    agg.mean_utilization = util / agg.seeds;
    if (agg.seeds > 1) {
      double ss = 0.0;
      for (const MatrixCell* c : cells) {
        const double d = c->avg_reward - agg.mean_avg_reward;
        ss += d * d;
      }
      agg.std_avg_reward = std::sqrt(ss / (agg.seeds - 1));
    }
    report.aggregates.push_back(std::move(agg));
  }
  return report;
}

nlohmann::json report_to_json(const ExperimentReport& report) {
  auto vec = [](const Eigen::VectorXd& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
  };
  nlohmann::json cells = nlohmann::json::array();
  for (const MatrixCell& c : report.cells) {
    nlohmann::json j{{"trace", c.trace_name},
                     {"regime", c.regime},
                     {"policy", c.policy},
                     {"ablation", c.ablation},
                     {"initial_ratio", c.initial_ratio},
                     {"t0", c.t0},
                     {"seed", c.seed},
                     {"failed", c.failed},
                     {"avg_reward", c.avg_reward},
                     {"reward_sum", c.reward_sum},
                     {"rounds_executed", c.rounds_executed},
                     {"consumed", vec(c.consumed)},
                     {"utilization", vec(c.utilization)},
                     {"stop_reason", c.stop_reason},
                     {"Lambda", c.Lambda}};
    if (c.failed) j["error"] = c.error;
    if (!c.reward_curve.empty()) {
      nlohmann::json curve = nlohmann::json::array();
      for (const auto& [round, cumulative] : c.reward_curve) {
        curve.push_back(nlohmann::json::array({round, cumulative}));
      }
      j["reward_curve"] = std::move(curve);
    }
    cells.push_back(std::move(j));
  }
  nlohmann::json aggregates = nlohmann::json::array();
  for (const Aggregate& a : report.aggregates) {
    aggregates.push_back(nlohmann::json{{"trace", a.trace_name},
                                        {"regime", a.regime},
                                        {"policy", a.policy},
                                        {"ablation", a.ablation},
                                        {"initial_ratio", a.initial_ratio},
                                        {"seeds", a.seeds},
                                        {"mean_avg_reward", a.mean_avg_reward},
                                        {"std_avg_reward", a.std_avg_reward},
                                        {"mean_rounds", a.mean_rounds},
                                        {"mean_utilization", vec(a.mean_utilization)}});
  }
  return nlohmann::json{{"cells", std::move(cells)}, {"aggregates", std::move(aggregates)}};
}

ExperimentReport report_from_json(const nlohmann::json& j) {
  auto vec = [](const nlohmann::json& arr) {
    Eigen::VectorXd v(arr.size());
    Eigen::Index i = 0;
    for (const auto& x : arr) v(i++) = x.get<double>();
    return v;
  };
  ExperimentReport report;
  for (const auto& c : j.at("cells")) {
    MatrixCell cell;
    cell.trace_name = c.at("trace").get<std::string>();
    cell.regime = c.at("regime").get<std::string>();
    cell.policy = c.at("policy").get<std::string>();
    cell.ablation = c.value("ablation", std::string("none"));
    cell.initial_ratio = c.value("initial_ratio", 0.0);
    cell.t0 = c.value("t0", std::int64_t{0});
    cell.seed = c.at("seed").get<std::uint64_t>();
    cell.failed = c.value("failed", false);
    cell.error = c.value("error", std::string());
    cell.avg_reward = c.value("avg_reward", 0.0);
    cell.reward_sum = c.value("reward_sum", 0.0);
    cell.rounds_executed = c.value("rounds_executed", std::int64_t{0});
    if (c.contains("consumed")) cell.consumed = vec(c["consumed"]);
    if (c.contains("utilization")) cell.utilization = vec(c["utilization"]);
    cell.stop_reason = c.value("stop_reason", std::string());
    cell.Lambda = c.value("Lambda", 0.0);
    if (c.contains("reward_curve")) {
      for (const auto& point : c["reward_curve"]) {
        cell.reward_curve.emplace_back(point[0].get<std::int64_t>(), point[1].get<double>());
      }
    }
    report.cells.push_back(std::move(cell));
  }
  for (const auto& a : j.at("aggregates")) {
    Aggregate agg;
    agg.trace_name = a.at("trace").get<std::string>();
    agg.regime = a.at("regime").get<std::string>();
    agg.policy = a.at("policy").get<std::string>();
    agg.ablation = a.value("ablation", std::string("none"));
    agg.initial_ratio = a.value("initial_ratio", 0.0);
    agg.seeds = a.value("seeds", 0);
    agg.mean_avg_reward = a.value("mean_avg_reward", 0.0);
    agg.std_avg_reward = a.value("std_avg_reward", 0.0);
    agg.mean_rounds = a.value("mean_rounds", 0.0);
    if (a.contains("mean_utilization")) agg.mean_utilization = vec(a["mean_utilization"]);
    report.aggregates.push_back(std::move(agg));
  }
  return report;
}

void write_report_csv(const ExperimentReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write report CSV '" + path + "'");
  out.precision(17);
  out << "trace,regime,policy,ablation,initial_ratio,seeds,mean_avg_reward,std_avg_reward,"
         "mean_rounds\n";
  for (const Aggregate& a : report.aggregates) {
    out << a.trace_name << ',' << a.regime << ',' << a.policy << ',' << a.ablation << ','
        << a.initial_ratio << ',' << a.seeds << ',' << a.mean_avg_reward << ','
        << a.std_avg_reward << ',' << a.mean_rounds << '\n';
  }
}

void write_tidy_csv(const ExperimentReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write tidy CSV '" + path + "'");
  out.precision(17);
  out << "dataset,regime,policy,ablation,initial_ratio,seed,metric,value\n";
  for (const MatrixCell& c : report.cells) {
    if (c.failed) continue;
    const auto row = [&](const std::string& metric, double value) {
      out << c.trace_name << ',' << c.regime << ',' << c.policy << ',' << c.ablation << ','
          << c.initial_ratio << ',' << c.seed << ',' << metric << ',' << value << '\n';
    };
    row("avg_reward", c.avg_reward);
    row("reward_sum", c.reward_sum);
    row("rounds_executed", static_cast<double>(c.rounds_executed));
    for (Eigen::Index d = 0; d < c.utilization.size(); ++d) {
      const std::string dim_name =
          d < static_cast<Eigen::Index>(cost_dim_names().size())
              ? cost_dim_names()[static_cast<std::size_t>(d)]
              : std::to_string(d);
      row("utilization_" + dim_name, c.utilization(d));
    }
  }
}

}  // namespace m2cmab::bench
