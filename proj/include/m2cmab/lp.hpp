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

#ifndef M2CMAB_LP_HPP_
#define M2CMAB_LP_HPP_

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "m2cmab/simplex.hpp"
#include "m2cmab/trace.hpp"
#include "m2cmab/types.hpp"

namespace m2cmab::lp {

// Per-round action-distribution program:
//
//   max  sum_t sum_a o[t,a] * reward(t,a)
//   s.t. sum_a o[t,a] = 1 per round   (<= 1 when allow_skip)
//        sum_t sum_a o[t,a] * cost(t,a,c) <= rhs[c] per dimension
//        o >= 0
//
// cost_per_dim holds one T_rows x A matrix per constraint dimension.
struct RoundwiseLP {
  Eigen::MatrixXd reward_matrix;
  std::vector<Eigen::MatrixXd> cost_per_dim;
  Eigen::VectorXd rhs;
  bool allow_skip = true;

  double cost(Eigen::Index t, Eigen::Index a, Eigen::Index c) const {
    return cost_per_dim[static_cast<std::size_t>(c)](t, a);
  }
};

struct LPSolution {
  Eigen::MatrixXd distribution;  // T_rows x A, rows sum to 1 (or <= 1)
  double objective_value = 0.0;
  SolveStatus status = SolveStatus::kOptimal;
};

void validate(const RoundwiseLP& lp);

// Solves the program with the dense simplex. Optimal solutions are
// feasible within 1e-9 componentwise; infeasible is only possible when
// allow_skip is false.
LPSolution solve(const RoundwiseLP& lp);

// Value of the best static randomized policy on the realized trace:
// the LP over the first `horizon` rounds with true rewards and costs and
// the full budget as right-hand side, skip mass allowed so the program is
// always feasible. Returns the cumulative (not per-round) optimum.
//
// Evaluated exactly by cutting planes on the C-dimensional dual with the
// dense simplex as master; the epigraph model is polyhedral, so the
// bounds meet after finitely many cuts.
double hindsight_opt(const Trace& truth, const BudgetVector& budget, std::int64_t horizon);

// Matrix-level variant used by hindsight_opt and tests directly.
double hindsight_value(const Eigen::MatrixXd& rewards,
                       const std::vector<Eigen::MatrixXd>& cost_per_dim,
                       const Eigen::VectorXd& budget_totals);

// Debug dump of an LP instance for offline inspection (flag-gated by
// callers).
void dump_instance(const RoundwiseLP& lp, const std::string& path);

}  // namespace m2cmab::lp

#endif  // M2CMAB_LP_HPP_
