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

#include "m2cmab/adapters.hpp"

#include "m2cmab/pooling.hpp"
#include "m2cmab/trace.hpp"

namespace m2cmab::pred {

namespace {

AdapterModel make_head(Eigen::Index dim, double eta, const Eigen::VectorXd& prior) {
  AdapterModel head;
  head.prior = prior.size() == 0 ? Eigen::VectorXd::Zero(dim) : prior;
  if (head.prior.size() != dim) {
    throw Error("dimension-mismatch", "prior has dimension " + std::to_string(head.prior.size()) +
                                          ", expected " + std::to_string(dim));
  }
  head.weights = head.prior;
  head.reg_coeff = eta;
  head.fitted_on = 0;
  return head;
}

}  // namespace

PredictorBank::PredictorBank(Eigen::Index feature_dim, Eigen::Index cost_dims, double eta,
                             Eigen::VectorXd prior)
    : feature_dim_(feature_dim), cost_dims_(cost_dims) {
  if (eta <= 0.0) throw Error("malformed-field", "regularization coefficient must be positive");
  if (feature_dim < 1) throw Error("malformed-field", "feature dimension must be >= 1");
  const Eigen::Index dim = feature_dim + 1;  // trailing bias
  reward_head_ = make_head(dim, eta, prior);
  cost_heads_.reserve(static_cast<std::size_t>(cost_dims));
  for (Eigen::Index c = 0; c < cost_dims; ++c) cost_heads_.push_back(make_head(dim, eta, prior));
  gram_ = Eigen::MatrixXd::Zero(dim, dim);
  reward_xy_ = Eigen::VectorXd::Zero(dim);
  cost_xy_ = Eigen::MatrixXd::Zero(dim, cost_dims);
}

Eigen::VectorXd PredictorBank::padded(const Eigen::VectorXd& feature) const {
  if (feature.size() != feature_dim_) {
    throw Error("dimension-mismatch", "feature has dimension " + std::to_string(feature.size()) +
                                          ", expected " + std::to_string(feature_dim_));
  }
  Eigen::VectorXd x(feature_dim_ + 1);
  x << feature, 1.0;
  return x;
}

void PredictorBank::observe(const Eigen::VectorXd& feature, double reward,
                            const CostVector& cost) {
  if (cost.dims() != cost_dims_) {
    throw Error("dimension-mismatch", "cost has " + std::to_string(cost.dims()) +
                                          " dimensions, expected " + std::to_string(cost_dims_));
  }
  const Eigen::VectorXd x = padded(feature);
  gram_.selfadjointView<Eigen::Lower>().rankUpdate(x);
  reward_xy_ += x * reward;
  cost_xy_ += x * cost.values.transpose();
  ++count_;
}

Eigen::VectorXd PredictorBank::solve_head(const Eigen::VectorXd& moment,
                                          const AdapterModel& head) const {
  const double n = static_cast<double>(count_);
  Eigen::MatrixXd system = gram_.selfadjointView<Eigen::Lower>();
  system /= n;
  system.diagonal().array() += head.reg_coeff;
  const Eigen::VectorXd rhs = moment / n + head.reg_coeff * head.prior;
  return Eigen::LDLT<Eigen::MatrixXd>(system).solve(rhs);
}

void PredictorBank::refit() {
  if (count_ == 0) return;  // nothing observed; heads stay at their priors
  reward_head_.weights = solve_head(reward_xy_, reward_head_);
  reward_head_.fitted_on = count_;
  for (Eigen::Index c = 0; c < cost_dims_; ++c) {
    AdapterModel& head = cost_heads_[static_cast<std::size_t>(c)];
    head.weights = solve_head(cost_xy_.col(c), head);
    head.fitted_on = count_;
  }
}

void PredictorBank::reset() {
  gram_.setZero();
  reward_xy_.setZero();
  cost_xy_.setZero();
  count_ = 0;
  reward_head_.weights = reward_head_.prior;
  reward_head_.fitted_on = 0;
  for (auto& head : cost_heads_) {
    head.weights = head.prior;
    head.fitted_on = 0;
  }
}

void PredictorBank::reanchor_priors() {
  reward_head_.prior = reward_head_.weights;
  for (auto& head : cost_heads_) head.prior = head.weights;
}

double PredictorBank::predict_reward(const Eigen::VectorXd& feature) const {
  return reward_head_.weights.dot(padded(feature));
}

CostVector PredictorBank::predict_cost(const Eigen::VectorXd& feature) const {
  const Eigen::VectorXd x = padded(feature);
  Eigen::VectorXd out(cost_dims_);
  for (Eigen::Index c = 0; c < cost_dims_; ++c) {
    out(c) = std::max(0.0, cost_heads_[static_cast<std::size_t>(c)].weights.dot(x));
  }
  return CostVector(std::move(out));
}

nlohmann::json PredictorBank::checkpoint() const {
  auto vec = [](const Eigen::VectorXd& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
  };
  nlohmann::json heads = nlohmann::json::object();
  auto dump_head = [&](const std::string& name, const AdapterModel& head) {
    heads[name] = nlohmann::json{{"weights", vec(head.weights)},
                                 {"prior", vec(head.prior)},
                                 {"reg_coeff", head.reg_coeff},
                                 {"fitted_on", head.fitted_on}};
  };
  dump_head("reward", reward_head_);
  for (Eigen::Index c = 0; c < cost_dims_; ++c) {
    dump_head("cost_" + std::to_string(c), cost_heads_[static_cast<std::size_t>(c)]);
  }
  return nlohmann::json{{"feature_dim", feature_dim_}, {"cost_dims", cost_dims_}, {"heads", heads}};
}

PredictorBank PredictorBank::from_checkpoint(const nlohmann::json& j) {
  auto vec = [](const nlohmann::json& arr) {
    Eigen::VectorXd v(arr.size());
    Eigen::Index i = 0;
    for (const auto& x : arr) v(i++) = x.get<double>();
    return v;
  };
  const Eigen::Index feature_dim = j.at("feature_dim").get<Eigen::Index>();
  const Eigen::Index cost_dims = j.at("cost_dims").get<Eigen::Index>();
  const auto& heads = j.at("heads");
  auto load_head = [&](const std::string& name) {
    const auto& h = heads.at(name);
    AdapterModel head;
    head.weights = vec(h.at("weights"));
    head.prior = vec(h.at("prior"));
    head.reg_coeff = h.at("reg_coeff").get<double>();
    head.fitted_on = h.at("fitted_on").get<std::int64_t>();
    return head;
  };
  AdapterModel reward = load_head("reward");
  PredictorBank bank(feature_dim, cost_dims, reward.reg_coeff, reward.prior);
  bank.reward_head_ = std::move(reward);
  for (Eigen::Index c = 0; c < cost_dims; ++c) {
    bank.cost_heads_[static_cast<std::size_t>(c)] = load_head("cost_" + std::to_string(c));
  }
  return bank;
}

double predict_reward(const PredictorBank& bank, const TaskContext& ctx, const ActionSpec& action,
                      bool normalize_attention) {
  return bank.predict_reward(embed::joint_feature(ctx, action, normalize_attention));
}

CostVector predict_cost(const PredictorBank& bank, const TaskContext& ctx,
                        const ActionSpec& action, bool normalize_attention) {
  return bank.predict_cost(embed::joint_feature(ctx, action, normalize_attention));
}

void fit(PredictorBank& bank, std::span<const ObservationRecord> history,
         const std::vector<ActionSpec>& actions, bool normalize_attention) {
  if (history.empty()) throw Error("malformed-field", "fit requires a nonempty history");
  bank.reset();
  for (const ObservationRecord& rec : history) {
    const ActionSpec& action = actions.at(static_cast<std::size_t>(rec.action_id));
    bank.observe(embed::joint_feature(rec.context, action, normalize_attention), rec.reward,
                 rec.cost);
  }
  bank.refit();
}

std::pair<double, double> holdout_error(const PredictorBank& bank,
                                        std::span<const ObservationRecord> validation,
                                        const std::vector<ActionSpec>& actions,
                                        bool normalize_attention) {
  if (validation.empty()) throw Error("malformed-field", "holdout requires a nonempty set");
  double reward_sse = 0.0;
  Eigen::VectorXd cost_sse = Eigen::VectorXd::Zero(bank.cost_dims());
  for (const ObservationRecord& rec : validation) {
    const ActionSpec& action = actions.at(static_cast<std::size_t>(rec.action_id));
    const Eigen::VectorXd feature = embed::joint_feature(rec.context, action, normalize_attention);
    const double dr = bank.predict_reward(feature) - rec.reward;
    reward_sse += dr * dr;
    const Eigen::VectorXd dc = bank.predict_cost(feature).values - rec.cost.values;
    cost_sse += dc.cwiseProduct(dc);
  }
  const double n = static_cast<double>(validation.size());
  const double e_r = reward_sse / n;
  const double e_c = bank.cost_dims() > 0 ? (cost_sse / n).mean() : 0.0;
  return {e_r, e_c};
}

Eigen::VectorXd ridge_gradient(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                               const Eigen::VectorXd& theta, const Eigen::VectorXd& prior,
                               double eta) {
  const double n = static_cast<double>(features.rows());
  const Eigen::VectorXd residual = features * theta - targets;
  return features.transpose() * residual / n + eta * (theta - prior);
}

}  // namespace m2cmab::pred
