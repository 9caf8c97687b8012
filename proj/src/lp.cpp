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

#include "m2cmab/lp.hpp"

#include <fstream>
#include <limits>

#include <json.hpp>

namespace m2cmab::lp {

namespace {

constexpr double kFeasCheckTol = 1e-9;
constexpr double kDualGapRelTol = 1e-10;
constexpr int kMaxCuts = 2000;

}  // namespace

void validate(const RoundwiseLP& lp) {
  const Eigen::Index t_rows = lp.reward_matrix.rows();
  const Eigen::Index actions = lp.reward_matrix.cols();
  if (t_rows < 1 || actions < 1) throw Error("malformed-field", "empty LP");
  if (!lp.reward_matrix.allFinite()) throw Error("malformed-field", "non-finite rewards");
  if (static_cast<Eigen::Index>(lp.cost_per_dim.size()) != lp.rhs.size()) {
    throw Error("dimension-mismatch", "cost tensor dims do not match rhs length");
  }
  if (!lp.rhs.allFinite()) throw Error("malformed-field", "non-finite rhs");
  for (const Eigen::MatrixXd& slab : lp.cost_per_dim) {
    if (slab.rows() != t_rows || slab.cols() != actions) {
      throw Error("dimension-mismatch", "cost slab shape does not match reward matrix");
    }
    if (!slab.allFinite()) throw Error("malformed-field", "non-finite costs");
  }
}

LPSolution solve(const RoundwiseLP& lp) {
  validate(lp);
  const Eigen::Index t_rows = lp.reward_matrix.rows();
  const Eigen::Index actions = lp.reward_matrix.cols();
  const Eigen::Index dims = lp.rhs.size();
  const Eigen::Index n = t_rows * actions;

  DenseProgram program;
  program.objective.resize(n);
  for (Eigen::Index t = 0; t < t_rows; ++t) {
    for (Eigen::Index a = 0; a < actions; ++a) {
      program.objective(t * actions + a) = lp.reward_matrix(t, a);
    }
  }
  program.row_coeffs.setZero(t_rows + dims, n);
  program.rhs.resize(t_rows + dims);
  program.senses.assign(static_cast<std::size_t>(t_rows + dims),
                        lp.allow_skip ? RowSense::kLessEqual : RowSense::kEqual);
  for (Eigen::Index t = 0; t < t_rows; ++t) {
    program.row_coeffs.row(t).segment(t * actions, actions).setOnes();
    program.rhs(t) = 1.0;
  }
  for (Eigen::Index c = 0; c < dims; ++c) {
    const Eigen::Index row = t_rows + c;
    program.senses[static_cast<std::size_t>(row)] = RowSense::kLessEqual;
    for (Eigen::Index t = 0; t < t_rows; ++t) {
      for (Eigen::Index a = 0; a < actions; ++a) {
        program.row_coeffs(row, t * actions + a) = lp.cost(t, a, c);
      }
    }
    program.rhs(row) = lp.rhs(c);
  }

  const DenseSolution dense = maximize(program);
  LPSolution out;
  out.status = dense.status;
  if (dense.status != SolveStatus::kOptimal) {
    out.distribution = Eigen::MatrixXd::Zero(t_rows, actions);
    return out;
  }

  out.distribution.resize(t_rows, actions);
  for (Eigen::Index t = 0; t < t_rows; ++t) {
    for (Eigen::Index a = 0; a < actions; ++a) {
      out.distribution(t, a) = dense.x(t * actions + a);
    }
  }
  out.objective_value = dense.objective_value;

  // Feasibility contract on anything reported optimal.
  for (Eigen::Index t = 0; t < t_rows; ++t) {
    const double mass = out.distribution.row(t).sum();
    const double violation = lp.allow_skip ? mass - 1.0 : std::abs(mass - 1.0);
    if (violation > kFeasCheckTol || out.distribution.row(t).minCoeff() < -kFeasCheckTol) {
      throw Error("internal", "round distribution violates the simplex constraint");
    }
  }
  for (Eigen::Index c = 0; c < dims; ++c) {
    double used = 0.0;
    for (Eigen::Index t = 0; t < t_rows; ++t) {
      used += out.distribution.row(t).dot(lp.cost_per_dim[static_cast<std::size_t>(c)].row(t));
    }
    if (used > lp.rhs(c) + kFeasCheckTol * std::max(1.0, std::abs(lp.rhs(c)))) {
      throw Error("internal", "cost constraint violated by reported optimum");
    }
  }
  return out;
}

double hindsight_value(const Eigen::MatrixXd& rewards,
                       const std::vector<Eigen::MatrixXd>& cost_per_dim,
                       const Eigen::VectorXd& budget_totals) {
  const Eigen::Index t_rows = rewards.rows();
  const Eigen::Index dims = budget_totals.size();
  if (t_rows == 0) return 0.0;

  // F(mu) = budget . mu + sum_t max(0, max_a (r_ta - mu . c_ta)), the
  // Lagrangian dual of the skip-allowed program; min_{mu >= 0} F = OPT.
  // Evaluation also yields a subgradient from the per-round selections.
  const auto evaluate = [&](const Eigen::VectorXd& mu, Eigen::VectorXd* subgrad) {
    double total = budget_totals.dot(mu);
    if (subgrad) *subgrad = budget_totals;
    for (Eigen::Index t = 0; t < t_rows; ++t) {
      double best = 0.0;
      Eigen::Index best_a = -1;
      for (Eigen::Index a = 0; a < rewards.cols(); ++a) {
        double value = rewards(t, a);
        for (Eigen::Index c = 0; c < dims; ++c) {
          value -= mu(c) * cost_per_dim[static_cast<std::size_t>(c)](t, a);
        }
        if (value > best) {
          best = value;
          best_a = a;
        }
      }
      total += best;
      if (subgrad && best_a >= 0) {
        for (Eigen::Index c = 0; c < dims; ++c) {
          (*subgrad)(c) -= cost_per_dim[static_cast<std::size_t>(c)](t, best_a);
        }
      }
    }
    return total;
  };

  Eigen::VectorXd mu = Eigen::VectorXd::Zero(dims);
  Eigen::VectorXd subgrad(dims);
  double upper = evaluate(mu, &subgrad);
  if (upper <= 0.0) return 0.0;  // nothing profitable; skip everything

  // Any optimal mu satisfies budget . mu <= F(mu*) <= F(0).
  const Eigen::VectorXd box = (upper / budget_totals.array()).matrix() * 1.01 +
                              Eigen::VectorXd::Constant(dims, 1.0);

  // Cutting-plane model of G(mu) = F(mu) - budget . mu (convex, >= 0):
  // master variables (mu, v), cuts v >= alpha_k + beta_k . mu.
  std::vector<double> alpha;
  std::vector<Eigen::VectorXd> beta;
  const auto add_cut = [&](const Eigen::VectorXd& at, double value,
                           const Eigen::VectorXd& full_subgrad) {
    const Eigen::VectorXd g_part = full_subgrad - budget_totals;
    const double g_value = value - budget_totals.dot(at);
    beta.push_back(g_part);
    alpha.push_back(g_value - g_part.dot(at));
  };
  add_cut(mu, upper, subgrad);

  double lower = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < kMaxCuts; ++iter) {
    const Eigen::Index cuts = static_cast<Eigen::Index>(alpha.size());
    DenseProgram master;
    master.objective.setZero(dims + 1);
    master.objective.head(dims) = -budget_totals;
    master.objective(dims) = -1.0;  // maximize -(budget . mu + v)
    master.row_coeffs.setZero(cuts + dims, dims + 1);
    master.rhs.resize(cuts + dims);
    master.senses.assign(static_cast<std::size_t>(cuts + dims), RowSense::kGreaterEqual);
    for (Eigen::Index k = 0; k < cuts; ++k) {
      master.row_coeffs.row(k).head(dims) = -beta[static_cast<std::size_t>(k)].transpose();
      master.row_coeffs(k, dims) = 1.0;
      master.rhs(k) = alpha[static_cast<std::size_t>(k)];
    }
    for (Eigen::Index c = 0; c < dims; ++c) {
      master.senses[static_cast<std::size_t>(cuts + c)] = RowSense::kLessEqual;
      master.row_coeffs(cuts + c, c) = 1.0;
      master.rhs(cuts + c) = box(c);
    }

    const DenseSolution sol = maximize(master);
    if (sol.status != SolveStatus::kOptimal) {
      throw Error("internal", "dual master unexpectedly not optimal");
    }
    lower = -sol.objective_value;
    mu = sol.x.head(dims);

    const double value = evaluate(mu, &subgrad);
    upper = std::min(upper, value);
    if (upper - lower <= kDualGapRelTol * std::max(1.0, std::abs(upper))) break;
    add_cut(mu, value, subgrad);
  }
  return upper;
}

double hindsight_opt(const Trace& truth, const BudgetVector& budget, std::int64_t horizon) {
  if (horizon < 1) throw Error("malformed-field", "horizon must be >= 1");
  if (truth.size() < horizon) {
    throw Error("environment-exhausted",
                "trace has " + std::to_string(truth.size()) + " rounds, horizon needs " +
                    std::to_string(horizon));
  }
  m2cmab::validate(budget);
  const Eigen::Index dims = budget.dims();
  const Eigen::Index actions = truth.num_actions;

  Eigen::MatrixXd rewards(horizon, actions);
  std::vector<Eigen::MatrixXd> cost_per_dim(static_cast<std::size_t>(dims),
                                            Eigen::MatrixXd(horizon, actions));
  for (std::int64_t t = 0; t < horizon; ++t) {
    const TraceTask& task = truth.tasks[static_cast<std::size_t>(t)];
    rewards.row(t) = task.rewards.transpose();
    for (Eigen::Index c = 0; c < dims; ++c) {
      cost_per_dim[static_cast<std::size_t>(c)].row(t) = task.costs.col(c).transpose();
    }
  }
  return hindsight_value(rewards, cost_per_dim, budget.totals);
}

void dump_instance(const RoundwiseLP& lp, const std::string& path) {
  nlohmann::json j;
  auto matrix = [](const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  j["reward_matrix"] = matrix(lp.reward_matrix);
  j["cost_per_dim"] = nlohmann::json::array();
  for (const auto& slab : lp.cost_per_dim) j["cost_per_dim"].push_back(matrix(slab));
  j["rhs"] = nlohmann::json::array();
  for (Eigen::Index c = 0; c < lp.rhs.size(); ++c) j["rhs"].push_back(lp.rhs(c));
  j["allow_skip"] = lp.allow_skip;
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write LP dump '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace m2cmab::lp
