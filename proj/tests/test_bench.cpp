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

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "m2cmab/experiment.hpp"
#include "m2cmab/pooling.hpp"
#include "m2cmab/trace_gen.hpp"

using namespace m2cmab;
using bench::GeneratorSpec;

TEST_CASE("local latency follows (t_in + t_out) / flops") {
  CHECK(bench::local_latency(0, 0, 1e3) == 0.0);
  CHECK(bench::local_latency(100, 50, 1e3) == doctest::Approx(0.15).epsilon(1e-12));
  CHECK(bench::local_latency(200, 100, 1e3) ==
        doctest::Approx(2.0 * bench::local_latency(100, 50, 1e3)).epsilon(1e-12));
  CHECK_THROWS_WITH_AS(bench::local_latency(1, 1, 0.0), doctest::Contains("nonpositive-flops"),
                       Error);
}

TEST_CASE("local cost is latency times power times price") {
  CHECK(bench::local_cost(0.0) == 0.0);
  CHECK(bench::local_cost(1.0) == doctest::Approx(1.236e-5).epsilon(1e-9));
  CHECK(bench::local_cost(1.0) == 600.0 * 2.06e-8);
  CHECK(bench::local_cost(2.0) == 2.0 * bench::local_cost(1.0));
}

TEST_CASE("cloud cost sums token and image charges") {
  const bench::CloudRates rates{1e-6, 2e-6, 1e-3};
  CHECK(bench::cloud_cost(0, 0, 0, rates) == 0.0);
  CHECK(bench::cloud_cost(1000, 500, 1, rates) == doctest::Approx(0.003).epsilon(1e-12));
  CHECK(bench::cloud_cost(123, 456, 7, bench::CloudRates{}) == 0.0);
}

TEST_CASE("rouge mapping reproduces every interval and boundary") {
  CHECK(bench::rouge_to_reward(0.0) == 1);
  CHECK(bench::rouge_to_reward(1e-9) == 2);
  CHECK(bench::rouge_to_reward(0.07) == 2);
  CHECK(bench::rouge_to_reward(0.15) == 3);
  CHECK(bench::rouge_to_reward(0.2) == 3);
  CHECK(bench::rouge_to_reward(0.3) == 4);
  CHECK(bench::rouge_to_reward(0.35) == 4);
  CHECK(bench::rouge_to_reward(0.4) == 4);
  CHECK(bench::rouge_to_reward(0.45) == 5);
  CHECK(bench::rouge_to_reward(0.5) == 5);
  CHECK(bench::rouge_to_reward(1.0) == 5);
  CHECK_THROWS_WITH_AS(bench::rouge_to_reward(-0.1), doctest::Contains("out-of-range"), Error);
  CHECK_THROWS_WITH_AS(bench::rouge_to_reward(1.1), doctest::Contains("out-of-range"), Error);
}

TEST_CASE("exact match rewards are 5 or 1 and stable") {
  CHECK(bench::exact_match_reward(true) == 5);
  CHECK(bench::exact_match_reward(false) == 1);
  CHECK(bench::exact_match_reward(true) == bench::exact_match_reward(true));
}

namespace {

Trace trace_with_aggregates(const std::vector<double>& per_action_totals, std::int64_t rounds) {
  Trace trace;
  trace.num_actions = static_cast<int>(per_action_totals.size());
  for (std::int64_t t = 0; t < rounds; ++t) {
    TraceTask task;
    task.context.pooled_embedding = Eigen::VectorXd::Zero(1);
    task.context.round_index = t;
    task.rewards = Eigen::VectorXd::Ones(trace.num_actions);
    task.costs.resize(trace.num_actions, 2);
    for (int a = 0; a < trace.num_actions; ++a) {
      const double per_round = per_action_totals[static_cast<std::size_t>(a)] / rounds;
      task.costs(a, 0) = per_round;
      task.costs(a, 1) = 2.0 * per_round;
    }
    trace.tasks.push_back(std::move(task));
  }
  return trace;
}

}  // namespace

TEST_CASE("budget regimes follow the order statistics of aggregated costs") {
  const Trace trace = trace_with_aggregates({30, 10, 50, 20, 40}, 10);
  const auto regimes = bench::derive_budget_regimes(trace);
  REQUIRE(regimes.size() == 3);
  CHECK(regimes[0].name == "Restricted");
  CHECK(regimes[0].budget.totals(0) == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(regimes[1].name == "Normal");
  CHECK(regimes[1].budget.totals(0) == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(regimes[2].name == "Generous");
  CHECK(regimes[2].budget.totals(0) == doctest::Approx(30.0).epsilon(1e-9));
  CHECK(regimes[2].budget.totals(1) == doctest::Approx(60.0).epsilon(1e-9));
}

TEST_CASE("identical actions collapse the three regimes") {
  const Trace trace = trace_with_aggregates({25, 25, 25}, 5);
  const auto regimes = bench::derive_budget_regimes(trace);
  CHECK(regimes[0].budget.totals == regimes[1].budget.totals);
  CHECK(regimes[1].budget.totals == regimes[2].budget.totals);
}

TEST_CASE("tied order statistics resolve as sorted values") {
  const Trace trace = trace_with_aggregates({5, 5, 7, 9, 11}, 5);
  const auto regimes = bench::derive_budget_regimes(trace);
  CHECK(regimes[0].budget.totals(0) == doctest::Approx(5.0));
  CHECK(regimes[1].budget.totals(0) == doctest::Approx(5.0));
  CHECK(regimes[2].budget.totals(0) == doctest::Approx(7.0));
}

TEST_CASE("regimes need at least three actions") {
  const Trace trace = trace_with_aggregates({5, 6}, 4);
  CHECK_THROWS_WITH_AS(bench::derive_budget_regimes(trace), doctest::Contains("invalid-spec"),
                       Error);
}

TEST_CASE("noiseless linear traces are realizable by the adapters") {
  GeneratorSpec spec;
  spec.tasks = 400;
  spec.context_dim = 6;
  spec.noise_sigma = 0.0;
  const Trace trace = bench::generate_synthetic_trace(spec, 17);

  const auto actions = one_hot_actions(trace.num_actions);
  std::vector<ObservationRecord> records;
  Rng rng(5);
  for (const TraceTask& task : trace.tasks) {
    ObservationRecord rec;
    rec.action_id = static_cast<int>(rng.uniform_int(trace.num_actions));
    rec.context = task.context;
    rec.reward = task.rewards(rec.action_id);
    rec.cost = CostVector(task.costs.row(rec.action_id).transpose());
    records.push_back(std::move(rec));
  }
  pred::PredictorBank bank(trace.num_actions + spec.context_dim, 2, 1e-8);
  pred::fit(bank, records, actions);
  const auto [e_r, e_c] = pred::holdout_error(bank, records, actions);
  CHECK(e_r <= 1e-10);
  CHECK(e_c <= 1e-10);
}

TEST_CASE("generated traces validate and stay deterministic per seed") {
  GeneratorSpec spec;
  spec.tasks = 50;
  const Trace a = bench::generate_synthetic_trace(spec, 7);
  const Trace b = bench::generate_synthetic_trace(spec, 7);
  REQUIRE(a.size() == 50);
  CHECK(a.num_actions == 5);
  std::string dump_a, dump_b;
  for (int t = 0; t < 50; ++t) {
    dump_a += trace_row_to_json(a.tasks[t]).dump();
    dump_b += trace_row_to_json(b.tasks[t]).dump();
  }
  CHECK(dump_a == dump_b);

  const Trace c = bench::generate_synthetic_trace(spec, 8);
  std::string dump_c;
  for (int t = 0; t < 50; ++t) dump_c += trace_row_to_json(c.tasks[t]).dump();
  CHECK(dump_a != dump_c);
}

TEST_CASE("seed changes preserve marginal means within Monte Carlo error") {
  GeneratorSpec spec;
  spec.tasks = 10000;
  spec.noise_sigma = 0.1;
  const Trace a = bench::generate_synthetic_trace(spec, 100);
  const Trace b = bench::generate_synthetic_trace(spec, 200);

  for (int action = 0; action < a.num_actions; ++action) {
    double mean_a = 0.0, mean_b = 0.0, sq_a = 0.0;
    for (std::int64_t t = 0; t < spec.tasks; ++t) {
      mean_a += a.tasks[t].rewards(action);
      mean_b += b.tasks[t].rewards(action);
      sq_a += a.tasks[t].rewards(action) * a.tasks[t].rewards(action);
    }
    mean_a /= spec.tasks;
    mean_b /= spec.tasks;
    const double var = sq_a / spec.tasks - mean_a * mean_a;
    const double se = std::sqrt(2.0 * var / spec.tasks);  // difference of two means
    CHECK(std::abs(mean_a - mean_b) <= 3.0 * se + 1e-9);
  }
}

TEST_CASE("identical backends yield identical reward columns when noiseless") {
  GeneratorSpec spec;
  spec.tasks = 30;
  spec.noise_sigma = 0.0;
  auto profiles = bench::default_backend_profiles(2);
  profiles[1] = profiles[0];
  profiles[1].label = "copy";
  spec.backends = {profiles[0], profiles[1], profiles[2]};
  const Trace trace = bench::generate_synthetic_trace(spec, 3);
  for (const TraceTask& task : trace.tasks) {
    CHECK(task.rewards(0) == doctest::Approx(task.rewards(1)).epsilon(1e-12));
    CHECK(task.costs(0, 0) == doctest::Approx(task.costs(1, 0)).epsilon(1e-12));
  }
}

TEST_CASE("matrix-context traces pool back to the generating embedding") {
  GeneratorSpec plain;
  plain.tasks = 25;
  plain.context_dim = 5;
  plain.noise_sigma = 0.0;
  GeneratorSpec matrices = plain;
  matrices.emit_matrices = true;

  const Trace with_matrices = bench::generate_synthetic_trace(matrices, 4);
  for (const TraceTask& task : with_matrices.tasks) {
    CHECK(!task.context.pooled_embedding.has_value());
    const Eigen::VectorXd pooled = embed::pooled_context(task.context);
    CHECK(pooled.size() == 5);
    CHECK(pooled.allFinite());
  }
  // The pooled vector participates in a realizable trace exactly like a
  // plain embedding does.
  const auto actions = one_hot_actions(with_matrices.num_actions);
  std::vector<ObservationRecord> records;
  for (const TraceTask& task : with_matrices.tasks) {
    ObservationRecord rec;
    rec.action_id = 2;
    rec.context = task.context;
    rec.reward = task.rewards(2);
    rec.cost = CostVector(task.costs.row(2).transpose());
    records.push_back(std::move(rec));
  }
  pred::PredictorBank bank(with_matrices.num_actions + 5, 2, 1e-8);
  pred::fit(bank, records, actions);
  const auto [e_r, e_c] = pred::holdout_error(bank, records, actions);
  CHECK(e_r <= 1e-10);
}

TEST_CASE("heavy-tail traces stay on the five-level reward scale with positive costs") {
  GeneratorSpec spec;
  spec.tasks = 200;
  spec.mode = "heavy_tail";
  spec.context_dim = 6;
  const Trace trace = bench::generate_synthetic_trace(spec, 12);
  for (const TraceTask& task : trace.tasks) {
    CHECK(task.rewards.minCoeff() >= 1.0);
    CHECK(task.rewards.maxCoeff() <= 5.0);
    CHECK(task.costs.minCoeff() > 0.0);
  }
}

TEST_CASE("generator rejects invalid specs") {
  GeneratorSpec spec;
  spec.tasks = 0;
  CHECK_THROWS_WITH_AS(bench::generate_synthetic_trace(spec, 1), doctest::Contains("invalid-spec"),
                       Error);
  spec.tasks = 10;
  spec.mode = "quadratic";
  CHECK_THROWS_AS(bench::generate_synthetic_trace(spec, 1), Error);
  spec.mode = "linear";
  spec.families = 1;
  CHECK_THROWS_AS(bench::generate_synthetic_trace(spec, 1), Error);
}

TEST_CASE("generator spec JSON round-trips") {
  GeneratorSpec spec;
  spec.tasks = 99;
  spec.mode = "heavy_tail";
  spec.backends = bench::default_backend_profiles(2);
  const GeneratorSpec back = bench::generator_spec_from_json(bench::to_json(spec));
  CHECK(back.tasks == 99);
  CHECK(back.mode == "heavy_tail");
  REQUIRE(back.backends.size() == 5);
  CHECK(back.backends[0].label == spec.backends[0].label);
  CHECK(std::holds_alternative<bench::LocalCompute>(back.backends[0].compute));
  CHECK(std::holds_alternative<bench::CloudCompute>(back.backends[1].compute));
}

namespace {

// Linear trace where the cheapest backend pays reward 1 and the rest pay 5.
Trace cheap_is_bad_trace(std::int64_t rounds, std::uint64_t seed) {
  GeneratorSpec spec;
  spec.tasks = rounds;
  spec.context_dim = 3;
  spec.noise_sigma = 0.0;
  auto profiles = bench::default_backend_profiles(2);
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    profiles[i].reward_by_family.setConstant(i == 0 ? 1.0 : 5.0);
  }
  spec.backends = profiles;
  return bench::generate_synthetic_trace(spec, seed);
}

}  // namespace

TEST_CASE("money-first converges to the cheapest backend") {
  const Trace trace = cheap_is_bad_trace(120, 5);
  const sched::TraceEnvironment env(trace);
  sched::SchedulerConfig config;
  config.horizon = 120;
  config.t0 = 3;
  config.seed = 9;
  config.eta = 1e-4;
  config.budget = BudgetVector((Eigen::VectorXd(2) << 1e9, 1e9).finished());

  const auto result = bench::run_baseline(bench::PolicyKind::kMoneyFirst, env, config);
  const std::int64_t ee_start = (trace.num_actions + 1) * config.t0;
  REQUIRE(result.ledger.rounds_executed == 120);
  for (std::int64_t i = ee_start; i < 120; ++i) {
    const auto& entry = result.ledger.decision_log[static_cast<std::size_t>(i)];
    CHECK(entry.action_id == 0);  // the local backend is cheapest in money
    CHECK(entry.reward ==
          doctest::Approx(trace.tasks[static_cast<std::size_t>(entry.round)].rewards(0)));
  }
}

TEST_CASE("policies on identical-reward pairs tie exactly when noiseless") {
  GeneratorSpec spec;
  spec.tasks = 80;
  spec.context_dim = 3;
  spec.noise_sigma = 0.0;
  auto profiles = bench::default_backend_profiles(2);
  profiles.resize(3);
  profiles[1] = profiles[0];
  profiles[1].label = "twin";
  spec.backends = profiles;
  const Trace trace = bench::generate_synthetic_trace(spec, 2);
  const sched::TraceEnvironment env(trace);

  sched::SchedulerConfig config;
  config.horizon = 80;
  config.t0 = 2;
  config.seed = 4;
  config.eta = 1e-4;
  config.budget = BudgetVector((Eigen::VectorXd(2) << 1e9, 1e9).finished());

  // Rewards of the twin backends are identical per round, so Random's
  // average over any subset it executes matches the pure policies.
  const auto random_run = bench::run_baseline(bench::PolicyKind::kRandom, env, config);
  double pure0 = 0.0;
  for (const auto& e : random_run.ledger.decision_log) {
    pure0 += trace.tasks[static_cast<std::size_t>(e.round)].rewards(0);
  }
  pure0 /= static_cast<double>(random_run.ledger.rounds_executed);
  // twins dominate: reward columns 0 and 1 are equal
  bool twins_equal = true;
  for (const auto& task : trace.tasks) {
    if (std::abs(task.rewards(0) - task.rewards(1)) > 1e-12) twins_equal = false;
  }
  CHECK(twins_equal);
  // Random mixes twins and the third; with the third's mean differing the
  // averages differ, but restricted to twin pulls they match exactly.
  double twin_avg = 0.0;
  int twin_count = 0;
  for (const auto& e : random_run.ledger.decision_log) {
    if (e.action_id <= 1) {
      twin_avg += e.reward;
      ++twin_count;
    }
  }
  twin_avg /= twin_count;
  double expected = 0.0;
  int expected_count = 0;
  for (const auto& e : random_run.ledger.decision_log) {
    if (e.action_id <= 1) {
      expected += trace.tasks[static_cast<std::size_t>(e.round)].rewards(0);
      ++expected_count;
    }
  }
  expected /= expected_count;
  CHECK(twin_avg == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("ablation names parse both directions") {
  CHECK(bench::ablation_from_name("none").active() == false);
  CHECK(bench::ablation_from_name("reward").reward);
  CHECK(bench::ablation_from_name("latency").cost_dim == kLatencyDim);
  CHECK(bench::ablation_from_name("money").cost_dim == kMoneyDim);
  CHECK(bench::ablation_from_name("cost_1").cost_dim == 1);
  CHECK(bench::ablation_name(bench::ablation_from_name("money")) == "money");
  CHECK_THROWS_AS(bench::ablation_from_name("weights"), Error);
}

TEST_CASE("run matrix produces one cell per combination and aggregates over seeds") {
  bench::MatrixSpec spec;
  bench::GeneratorSpec gen;
  gen.tasks = 80;
  gen.context_dim = 3;
  spec.traces.push_back({"tiny", bench::generate_synthetic_trace(gen, 6)});
  spec.regimes = {"Generous"};
  spec.policies = {bench::PolicyKind::kRandom};
  spec.seeds = {11};
  spec.t0 = 2;
  const auto single = bench::run_matrix(spec);
  CHECK(single.cells.size() == 1);
  CHECK(single.aggregates.size() == 1);
  CHECK(single.aggregates[0].seeds == 1);
  CHECK(single.aggregates[0].std_avg_reward == 0.0);

  spec.seeds = {1, 2, 3, 4, 5};
  const auto multi = bench::run_matrix(spec);
  CHECK(multi.cells.size() == 5);
  REQUIRE(multi.aggregates.size() == 1);
  const auto& agg = multi.aggregates[0];
  CHECK(agg.seeds == 5);
  double lo = 1e300, hi = -1e300;
  for (const auto& cell : multi.cells) {
    lo = std::min(lo, cell.avg_reward);
    hi = std::max(hi, cell.avg_reward);
    CHECK_FALSE(cell.failed);
  }
  CHECK(agg.mean_avg_reward >= lo);
  CHECK(agg.mean_avg_reward <= hi);
  CHECK(agg.std_avg_reward >= 0.0);
}

TEST_CASE("a failing cell is isolated without aborting the matrix") {
  bench::MatrixSpec spec;
  bench::GeneratorSpec gen;
  gen.tasks = 40;
  gen.context_dim = 3;
  spec.traces.push_back({"tiny", bench::generate_synthetic_trace(gen, 6)});
  spec.regimes = {"Generous"};
  spec.policies = {bench::PolicyKind::kRandom};
  spec.seeds = {1};
  spec.initial_ratios = {0.05, 2.0};  // the second ratio is impossible
  const auto report = bench::run_matrix(spec);
  REQUIRE(report.cells.size() == 2);
  CHECK_FALSE(report.cells[0].failed);
  CHECK(report.cells[1].failed);
  CHECK(report.cells[1].error.find("invalid-spec") != std::string::npos);
  CHECK(report.aggregates.size() == 1);  // only the healthy ratio aggregates
}

TEST_CASE("custom plug-in policies run through the matrix") {
  bench::MatrixSpec spec;
  bench::GeneratorSpec gen;
  gen.tasks = 60;
  gen.context_dim = 3;
  spec.traces.push_back({"tiny", bench::generate_synthetic_trace(gen, 6)});
  spec.regimes = {"Generous"};
  spec.policies = {bench::PolicyKind::kRandom};
  spec.seeds = {1, 2};
  spec.t0 = 2;
  // Always plays action 0 under the shared hard-stop semantics.
  spec.custom_policies.emplace_back(
      "AlwaysLocal",
      [](const sched::TraceEnvironment& env, const sched::SchedulerConfig& config) {
        RunLedger ledger(env.cost_dims());
        sched::RunResult result;
        result.stop_reason = "horizon";
        for (std::int64_t round = 0; round < config.horizon; ++round) {
          const CostVector cost = env.true_cost(round, 0);
          if (((ledger.consumed.values + cost.values).array() >
               config.budget.totals.array())
                  .any()) {
            result.stop_reason = "budget";
            break;
          }
          ledger.append(round, 0, env.true_reward(round, 0), cost);
        }
        result.ledger = std::move(ledger);
        return result;
      });
  const auto report = bench::run_matrix(spec);
  CHECK(report.cells.size() == 4);  // 2 policies x 2 seeds
  int custom_cells = 0;
  for (const auto& cell : report.cells) {
    if (cell.policy == "AlwaysLocal") {
      ++custom_cells;
      CHECK_FALSE(cell.failed);
      CHECK(cell.rounds_executed > 0);
    }
  }
  CHECK(custom_cells == 2);
}

TEST_CASE("report JSON and CSVs round-trip the cells") {
  bench::MatrixSpec spec;
  bench::GeneratorSpec gen;
  gen.tasks = 60;
  gen.context_dim = 3;
  spec.traces.push_back({"t", bench::generate_synthetic_trace(gen, 1)});
  spec.regimes = {"Restricted", "Generous"};
  spec.policies = {bench::PolicyKind::kRandom, bench::PolicyKind::kM2CMAB};
  spec.seeds = {3, 4};
  spec.t0 = 2;
  spec.eta = 1e-3;
  const auto report = bench::run_matrix(spec);
  CHECK(report.cells.size() == 8);

  const auto back = bench::report_from_json(bench::report_to_json(report));
  REQUIRE(back.cells.size() == report.cells.size());
  for (std::size_t i = 0; i < report.cells.size(); ++i) {
    CHECK(back.cells[i].avg_reward == report.cells[i].avg_reward);
    CHECK(back.cells[i].policy == report.cells[i].policy);
    CHECK(back.cells[i].stop_reason == report.cells[i].stop_reason);
  }

  bench::write_report_csv(report, "report_test.csv");
  bench::write_tidy_csv(report, "tidy_test.csv");
  std::ifstream tidy("tidy_test.csv");
  REQUIRE(tidy.good());
  std::string line;
  int rows = 0;
  while (std::getline(tidy, line)) ++rows;
  // header + 5 metrics per healthy cell (avg, sum, rounds, 2 utilizations)
  CHECK(rows == 1 + 8 * 5);
  std::remove("report_test.csv");
  std::remove("tidy_test.csv");
}

TEST_CASE("matrix reports replay identically for a fixed seed list") {
  bench::MatrixSpec spec;
  bench::GeneratorSpec gen;
  gen.tasks = 100;
  gen.context_dim = 4;
  spec.traces.push_back({"rep", bench::generate_synthetic_trace(gen, 55)});
  spec.policies = {bench::PolicyKind::kRandom, bench::PolicyKind::kM2CMAB,
                   bench::PolicyKind::kThresholdBased};
  spec.seeds = {7, 8, 9};
  spec.t0 = 3;
  spec.eta = 1e-3;
  spec.threads = 2;
  spec.record_regret_curves = true;
  const auto first = bench::run_matrix(spec);
  const auto second = bench::run_matrix(spec);
  CHECK(bench::report_to_json(first).dump() == bench::report_to_json(second).dump());
}

TEST_CASE("every policy respects the budget on every regime") {
  bench::MatrixSpec spec;
  bench::GeneratorSpec gen;
  gen.tasks = 120;
  gen.context_dim = 4;
  gen.noise_sigma = 0.1;
  spec.traces.push_back({"safety", bench::generate_synthetic_trace(gen, 77)});
  spec.policies = bench::all_policies();
  spec.seeds = {5, 6};
  spec.t0 = 2;
  spec.eta = 1e-3;
  const auto report = bench::run_matrix(spec);
  CHECK(report.cells.size() == 3 * 6 * 2);
  for (const auto& cell : report.cells) {
    REQUIRE_FALSE(cell.failed);
    for (Eigen::Index c = 0; c < cell.utilization.size(); ++c) {
      CHECK(cell.utilization(c) <= 1.0 + 1e-12);
    }
  }
}
