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

#ifndef M2CMAB_TRACE_HPP_
#define M2CMAB_TRACE_HPP_

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "m2cmab/types.hpp"

namespace m2cmab {

// Cost dimensions carried by the trace file format, in file order.
inline constexpr int kLatencyDim = 0;
inline constexpr int kMoneyDim = 1;
inline constexpr int kTraceCostDims = 2;
inline const std::vector<std::string>& cost_dim_names() {
  static const std::vector<std::string> names = {"latency", "money"};
  return names;
}

// Ground truth for one task: context plus the full per-action
// (reward, cost) table. rewards is length A; costs is A x C.
struct TraceTask {
  TaskContext context;
  Eigen::VectorXd rewards;
  Eigen::MatrixXd costs;
};

struct Trace {
  std::vector<TraceTask> tasks;
  int num_actions = 0;
  int cost_dims = kTraceCostDims;

  std::int64_t size() const { return static_cast<std::int64_t>(tasks.size()); }
};

// JSON encoding of core types. Numeric fields round-trip bit-identically
// (nlohmann emits shortest exactly-parsing decimal forms).
nlohmann::json to_json(const TaskContext& ctx);
TaskContext task_context_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ActionSpec& a);
ActionSpec action_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CostVector& c);
CostVector cost_vector_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BudgetVector& b);
BudgetVector budget_vector_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ObservationRecord& r);
ObservationRecord observation_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunLedger& ledger);
RunLedger run_ledger_from_json(const nlohmann::json& j);

// Parses and validates one trace row. Rows must provide either
// context.embedding or context.modalities, and a complete `actions`
// array with dense ids, finite rewards, and nonnegative costs.
// expected_actions < 0 infers A from the row itself.
TraceTask validate_trace_row(const nlohmann::json& row, int expected_actions = -1);

nlohmann::json trace_row_to_json(const TraceTask& task);

// JSON-lines trace IO. Rows are read strictly in file order.
Trace load_trace(const std::string& path);
void save_trace(const Trace& trace, const std::string& path);

}  // namespace m2cmab

#endif  // M2CMAB_TRACE_HPP_
