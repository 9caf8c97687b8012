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

#ifndef M2CMAB_ADAPTERS_HPP_
#define M2CMAB_ADAPTERS_HPP_

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "m2cmab/types.hpp"

namespace m2cmab::pred {

// One regularized least-squares head. `weights` includes the trailing bias
// coordinate; `prior` is the anchor of the ridge penalty.
struct AdapterModel {
  Eigen::VectorXd weights;
  Eigen::VectorXd prior;
  double reg_coeff = 1.0;
  std::int64_t fitted_on = 0;
};

// Reward head plus one cost head per constraint dimension, all trained on
// the shared joint feature (z_a || z_x, bias appended). Heads minimize
//
//   J(theta) = 1/(2n) * sum_i (theta . x_i - y_i)^2
//              + eta/2 * |theta - theta0|^2
//
// solved in closed form from accumulated second moments, so a refit costs
// O(d^3) regardless of history length. Fits are exclusive; predictions are
// read-only between fits.
class PredictorBank {
 public:
  PredictorBank(Eigen::Index feature_dim, Eigen::Index cost_dims, double eta,
                Eigen::VectorXd prior = Eigen::VectorXd());

  Eigen::Index feature_dim() const { return feature_dim_; }
  Eigen::Index cost_dims() const { return cost_dims_; }
  std::int64_t observation_count() const { return count_; }

  // Accumulates one (feature, reward, cost) triple; call refit() to solve.
  void observe(const Eigen::VectorXd& feature, double reward, const CostVector& cost);

  // Solves every head from the accumulated moments.
  void refit();

  // Drops accumulated data; heads revert to their priors.
  void reset();

  // Re-anchors every prior at the currently fitted weights.
  void reanchor_priors();

  double predict_reward(const Eigen::VectorXd& feature) const;
  // Cost predictions are clamped at zero from below.
  CostVector predict_cost(const Eigen::VectorXd& feature) const;

  const AdapterModel& reward_head() const { return reward_head_; }
  const AdapterModel& cost_head(Eigen::Index c) const {
    return cost_heads_[static_cast<std::size_t>(c)];
  }

  nlohmann::json checkpoint() const;
  static PredictorBank from_checkpoint(const nlohmann::json& j);

 private:
  Eigen::VectorXd padded(const Eigen::VectorXd& feature) const;
  Eigen::VectorXd solve_head(const Eigen::VectorXd& moment, const AdapterModel& head) const;

  Eigen::Index feature_dim_ = 0;  // without the bias coordinate
  Eigen::Index cost_dims_ = 0;
  AdapterModel reward_head_;
  std::vector<AdapterModel> cost_heads_;

  Eigen::MatrixXd gram_;         // sum_i x_i x_i^T  (bias included)
  Eigen::VectorXd reward_xy_;    // sum_i x_i r_i
  Eigen::MatrixXd cost_xy_;      // column c: sum_i x_i cost_i[c]
  std::int64_t count_ = 0;
};

// Operations on (context, action) pairs. Features are built with
// embed::joint_feature; the action set supplies the embeddings.
double predict_reward(const PredictorBank& bank, const TaskContext& ctx,
                      const ActionSpec& action, bool normalize_attention = false);
CostVector predict_cost(const PredictorBank& bank, const TaskContext& ctx,
                        const ActionSpec& action, bool normalize_attention = false);

// Rebuilds the bank's statistics from `history` (in order) and refits.
void fit(PredictorBank& bank, std::span<const ObservationRecord> history,
         const std::vector<ActionSpec>& actions, bool normalize_attention = false);

// Mean squared errors on held-out records: E_r over rewards and E_c as the
// mean over dimensions of per-dimension cost MSE.
std::pair<double, double> holdout_error(const PredictorBank& bank,
                                        std::span<const ObservationRecord> validation,
                                        const std::vector<ActionSpec>& actions,
                                        bool normalize_attention = false);

// Explicit gradient of the ridge objective at theta; used by stationarity
// checks. Features must already carry the bias coordinate.
Eigen::VectorXd ridge_gradient(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                               const Eigen::VectorXd& theta, const Eigen::VectorXd& prior,
                               double eta);

}  // namespace m2cmab::pred

#endif  // M2CMAB_ADAPTERS_HPP_
