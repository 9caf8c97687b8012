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

#ifndef M2CMAB_TYPES_HPP_
#define M2CMAB_TYPES_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace m2cmab {

// Error with a stable machine-readable code ("malformed-field",
// "dimension-mismatch", ...) next to the human-readable message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

// Per-round multi-modal feature payload. Either a precomputed pooled
// embedding, raw per-modality matrices (tokens x per-token dimension),
// or both. Raw matrices under the tags below feed CLS-attentive pooling.
struct TaskContext {
  std::int64_t round_index = 0;
  std::map<std::string, Eigen::MatrixXd> modality_features;
  std::optional<Eigen::VectorXd> pooled_embedding;
};

// Modality tags recognized by the pooling path.
inline constexpr const char* kHiddenStatesTag = "hidden_states";
inline constexpr const char* kClsAttentionTag = "cls_attention";

// One execution backend. Ids are dense in [0, A).
struct ActionSpec {
  int action_id = 0;
  std::string label;
  Eigen::VectorXd action_embedding;
};

// Per-round resource consumption, one entry per constraint dimension,
// stored in raw units (seconds, currency). Normalization by the budget
// happens only inside scoring and dual updates.
struct CostVector {
  Eigen::VectorXd values;

  CostVector() = default;
  explicit CostVector(Eigen::VectorXd v) : values(std::move(v)) {}

  Eigen::Index dims() const { return values.size(); }
};

// Long-horizon budget totals, strictly positive per dimension.
struct BudgetVector {
  Eigen::VectorXd totals;

  BudgetVector() = default;
  explicit BudgetVector(Eigen::VectorXd t) : totals(std::move(t)) {}

  Eigen::Index dims() const { return totals.size(); }
};

// One (reward, cost, action, context) tuple; an element of the history set.
// Appended records are never mutated.
struct ObservationRecord {
  double reward = 0.0;
  CostVector cost;
  int action_id = 0;
  TaskContext context;
};

struct DecisionEntry {
  std::int64_t round = 0;
  int action_id = 0;
  double reward = 0.0;
  CostVector cost;
};

// Cumulative accounting for one simulation run. Confined to a single run;
// `consumed` always equals the componentwise sum of costs in the log.
struct RunLedger {
  CostVector consumed;
  std::int64_t rounds_executed = 0;
  double reward_sum = 0.0;
  std::vector<DecisionEntry> decision_log;

  explicit RunLedger(Eigen::Index cost_dims = 0)
      : consumed(Eigen::VectorXd::Zero(cost_dims)) {}

  void append(std::int64_t round, int action_id, double reward,
              const CostVector& cost) {
    consumed.values += cost.values;
    reward_sum += reward;
    ++rounds_executed;
    decision_log.push_back({round, action_id, reward, cost});
  }

  double average_reward() const {
    return rounds_executed > 0 ? reward_sum / static_cast<double>(rounds_executed)
                               : 0.0;
  }
};

inline bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  return m.allFinite();
}

inline void validate(const TaskContext& ctx, Eigen::Index expected_ctx_dim = -1) {
  if (!ctx.pooled_embedding.has_value() && ctx.modality_features.empty()) {
    throw Error("missing-embedding",
                "context carries neither a pooled embedding nor raw matrices");
  }
  for (const auto& [tag, m] : ctx.modality_features) {
    if (!all_finite(m)) throw Error("malformed-field", "non-finite entries in modality '" + tag + "'");
  }
  if (ctx.pooled_embedding.has_value()) {
    if (!all_finite(*ctx.pooled_embedding)) {
      throw Error("malformed-field", "non-finite pooled embedding");
    }
    if (expected_ctx_dim >= 0 && ctx.pooled_embedding->size() != expected_ctx_dim) {
      throw Error("dimension-mismatch",
                  "pooled embedding has dimension " +
                      std::to_string(ctx.pooled_embedding->size()) + ", expected " +
                      std::to_string(expected_ctx_dim));
    }
  }
}

inline void validate(const CostVector& c) {
  if (!all_finite(c.values)) throw Error("malformed-field", "non-finite cost entry");
  if ((c.values.array() < 0.0).any()) {
    throw Error("negative-cost", "cost entries must be nonnegative");
  }
}

inline void validate(const BudgetVector& b) {
  if (!all_finite(b.totals)) throw Error("malformed-field", "non-finite budget entry");
  if (b.dims() == 0 || (b.totals.array() <= 0.0).any()) {
    throw Error("malformed-field", "budget totals must be strictly positive");
  }
}

// Dense, unique action ids in [0, A) and consistent embedding dimensions.
inline void validate(const std::vector<ActionSpec>& actions) {
  const int a_count = static_cast<int>(actions.size());
  std::vector<bool> seen(actions.size(), false);
  for (const ActionSpec& a : actions) {
    if (a.action_id < 0 || a.action_id >= a_count) {
      throw Error("malformed-field", "action_id " + std::to_string(a.action_id) +
                                         " outside [0, " + std::to_string(a_count) + ")");
    }
    if (seen[static_cast<std::size_t>(a.action_id)]) {
      throw Error("malformed-field", "duplicate action_id " + std::to_string(a.action_id));
    }
    seen[static_cast<std::size_t>(a.action_id)] = true;
    if (!actions.empty() && a.action_embedding.size() != actions.front().action_embedding.size()) {
      throw Error("dimension-mismatch", "inconsistent action embedding dimensions");
    }
  }
}

// One-hot embeddings are the default action representation when no
// externally supplied vectors are configured.
inline std::vector<ActionSpec> one_hot_actions(int count,
                                               const std::vector<std::string>& labels = {}) {
  std::vector<ActionSpec> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int a = 0; a < count; ++a) {
    ActionSpec spec;
    spec.action_id = a;
    spec.label = a < static_cast<int>(labels.size()) ? labels[static_cast<std::size_t>(a)]
                                                     : "action_" + std::to_string(a);
    spec.action_embedding = Eigen::VectorXd::Zero(count);
    spec.action_embedding(a) = 1.0;
    out.push_back(std::move(spec));
  }
  return out;
}

}  // namespace m2cmab

#endif  // M2CMAB_TYPES_HPP_
