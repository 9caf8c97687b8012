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

#ifndef M2CMAB_DUAL_HPP_
#define M2CMAB_DUAL_HPP_

#include <cmath>
#include <cstdint>
#include <functional>

#include <Eigen/Dense>

#include "m2cmab/types.hpp"

namespace m2cmab::omd {

// Lagrange multipliers on the set V = {lambda >= 0, |lambda|_1 <= Lambda},
// kept in lifted form: one extra slack coordinate so that
// |lambda|_1 + slack == Lambda at all times. Negative-entropy mirror
// descent on the lifted simplex is then a closed-form exponentiated-
// gradient step. Single-writer: one scheduling loop mutates the state.
struct DualState {
  Eigen::VectorXd lambda;
  double radius = 0.0;
  double slack = 0.0;
  std::function<double(std::int64_t)> step_size;
};

// Uniform interior start: lambda_c = Lambda/(2C), slack = Lambda/2.
// Interior initialization matters because multiplicative updates absorb
// exact zeros permanently.
inline DualState make_dual_state(Eigen::Index dims, double radius,
                                 std::function<double(std::int64_t)> step_size) {
  if (radius <= 0.0) throw Error("malformed-field", "dual radius must be positive");
  if (dims < 1) throw Error("malformed-field", "need at least one constraint dimension");
  DualState state;
  state.radius = radius;
  state.lambda = Eigen::VectorXd::Constant(dims, radius / (2.0 * static_cast<double>(dims)));
  state.slack = radius / 2.0;
  state.step_size = std::move(step_size);
  return state;
}

inline void validate(const DualState& state) {
  if ((state.lambda.array() < 0.0).any()) {
    throw Error("malformed-field", "dual variables must be nonnegative");
  }
  const double lifted = state.lambda.sum() + state.slack;
  if (std::abs(lifted - state.radius) > 1e-9 * std::max(1.0, state.radius)) {
    throw Error("malformed-field", "lifted dual mass drifted from the radius");
  }
}

// Descent gradient of the per-round dual objective at the played action:
// g_c = -(phi_c / Phi_c - 1/T). Over-consumption makes g_c negative,
// which pushes lambda_c up under the update below.
inline Eigen::VectorXd dual_gradient(const CostVector& chosen_cost, const BudgetVector& budget,
                                     std::int64_t horizon) {
  if (chosen_cost.dims() != budget.dims()) {
    throw Error("dimension-mismatch", "cost and budget dimensions differ");
  }
  const double pace = 1.0 / static_cast<double>(horizon);
  return (pace - (chosen_cost.values.array() / budget.totals.array())).matrix();
}

// Exponentiated-gradient step on the lifted simplex of radius Lambda:
//   lambda_c <- lambda_c * exp(-rho_t g_c),  slack <- slack * exp(0),
// then rescale so the lifted mass is Lambda again. The largest exponent
// is subtracted before exponentiation to avoid overflow; the rescale
// cancels the shift. Coordinates at exactly zero stay zero.
inline DualState omd_step(DualState state, const Eigen::VectorXd& gradient, std::int64_t round) {
  if (gradient.size() != state.lambda.size()) {
    throw Error("dimension-mismatch", "gradient dimension does not match dual state");
  }
  const double rho = state.step_size ? state.step_size(round) : 1.0;
  Eigen::VectorXd exponents = -rho * gradient;
  const double shift = std::max(0.0, exponents.maxCoeff());  // slack exponent is 0
  const Eigen::VectorXd scaled = state.lambda.array() * (exponents.array() - shift).exp();
  const double slack_scaled = state.slack * std::exp(-shift);
  const double total = scaled.sum() + slack_scaled;
  state.lambda = state.radius * scaled / total;
  state.slack = state.radius * slack_scaled / total;
  return state;
}

// Predicted per-round Lagrangian used as the action score:
//   S = r_hat - < phi_hat/Phi - 1/T, lambda >.
inline double lagrangian_score(double pred_reward, const CostVector& pred_cost,
                               const DualState& state, const BudgetVector& budget,
                               std::int64_t horizon) {
  const double pace = 1.0 / static_cast<double>(horizon);
  const Eigen::ArrayXd normalized = pred_cost.values.array() / budget.totals.array() - pace;
  return pred_reward - (normalized * state.lambda.array()).sum();
}

// Constant step size sqrt(ln(C+1)/T_ee) / G for a gradient bound G over
// the exploration-exploitation horizon.
inline double default_step_size(Eigen::Index dims, std::int64_t ee_horizon,
                                double gradient_bound) {
  if (ee_horizon < 1) throw Error("malformed-field", "empty exploration horizon");
  if (gradient_bound <= 0.0) throw Error("malformed-field", "gradient bound must be positive");
  return std::sqrt(std::log(static_cast<double>(dims) + 1.0) /
                   static_cast<double>(ee_horizon)) /
         gradient_bound;
}

}  // namespace m2cmab::omd

#endif  // M2CMAB_DUAL_HPP_
