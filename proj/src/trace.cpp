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

#include "m2cmab/trace.hpp"

#include <cmath>
#include <fstream>

namespace m2cmab {

namespace {

using nlohmann::json;

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Eigen::VectorXd vector_from_json(const json& arr, const char* what) {
  if (!arr.is_array()) throw Error("malformed-field", std::string(what) + " must be an array");
  Eigen::VectorXd v(arr.size());
  Eigen::Index i = 0;
  for (const auto& x : arr) {
    if (!x.is_number()) throw Error("malformed-field", std::string(what) + " entries must be numbers");
    v(i++) = x.get<double>();
  }
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows, const char* what) {
  if (!rows.is_array() || rows.empty()) {
    throw Error("malformed-field", std::string(what) + " must be a nonempty 2-D array");
  }
  const Eigen::Index n_rows = static_cast<Eigen::Index>(rows.size());
  const auto& first = rows.front();
  if (!first.is_array()) throw Error("malformed-field", std::string(what) + " must be a 2-D array");
  const Eigen::Index n_cols = static_cast<Eigen::Index>(first.size());
  Eigen::MatrixXd m(n_rows, n_cols);
  for (Eigen::Index r = 0; r < n_rows; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n_cols) {
      throw Error("malformed-field", std::string(what) + " has ragged rows");
    }
    for (Eigen::Index c = 0; c < n_cols; ++c) {
      const auto& x = row[static_cast<std::size_t>(c)];
      if (!x.is_number()) throw Error("malformed-field", std::string(what) + " entries must be numbers");
      m(r, c) = x.get<double>();
    }
  }
  return m;
}

double require_number(const json& obj, const char* key) {
  if (!obj.contains(key) || !obj[key].is_number()) {
    throw Error("malformed-field", std::string("missing or non-numeric field '") + key + "'");
  }
  return obj[key].get<double>();
}

}  // namespace

json to_json(const TaskContext& ctx) {
  json j;
  j["round_index"] = ctx.round_index;
  if (ctx.pooled_embedding.has_value()) j["embedding"] = vector_to_json(*ctx.pooled_embedding);
  if (!ctx.modality_features.empty()) {
    json mods = json::object();
    for (const auto& [tag, m] : ctx.modality_features) mods[tag] = matrix_to_json(m);
    j["modalities"] = std::move(mods);
  }
  return j;
}

TaskContext task_context_from_json(const json& j) {
  TaskContext ctx;
  if (j.contains("round_index")) ctx.round_index = j["round_index"].get<std::int64_t>();
  if (j.contains("embedding")) ctx.pooled_embedding = vector_from_json(j["embedding"], "embedding");
  if (j.contains("modalities")) {
    if (!j["modalities"].is_object()) throw Error("malformed-field", "modalities must be an object");
    for (const auto& [tag, rows] : j["modalities"].items()) {
      ctx.modality_features[tag] = matrix_from_json(rows, tag.c_str());
    }
  }
  if (!ctx.pooled_embedding.has_value() && ctx.modality_features.empty()) {
    throw Error("malformed-field", "context must carry 'embedding' or 'modalities'");
  }
  return ctx;
}

json to_json(const ActionSpec& a) {
  return json{{"action_id", a.action_id},
              {"label", a.label},
              {"embedding", vector_to_json(a.action_embedding)}};
}

ActionSpec action_spec_from_json(const json& j) {
  ActionSpec a;
  a.action_id = static_cast<int>(require_number(j, "action_id"));
  if (j.contains("label")) a.label = j["label"].get<std::string>();
  a.action_embedding = vector_from_json(j.at("embedding"), "embedding");
  return a;
}

json to_json(const CostVector& c) { return json{{"values", vector_to_json(c.values)}}; }

CostVector cost_vector_from_json(const json& j) {
  return CostVector(vector_from_json(j.at("values"), "values"));
}

json to_json(const BudgetVector& b) { return json{{"totals", vector_to_json(b.totals)}}; }

BudgetVector budget_vector_from_json(const json& j) {
  return BudgetVector(vector_from_json(j.at("totals"), "totals"));
}

json to_json(const ObservationRecord& r) {
  return json{{"reward", r.reward},
              {"cost", to_json(r.cost)},
              {"action_id", r.action_id},
              {"context", to_json(r.context)}};
}

ObservationRecord observation_from_json(const json& j) {
  ObservationRecord r;
  r.reward = require_number(j, "reward");
  r.cost = cost_vector_from_json(j.at("cost"));
  r.action_id = static_cast<int>(require_number(j, "action_id"));
  r.context = task_context_from_json(j.at("context"));
  return r;
}

json to_json(const RunLedger& ledger) {
  json entries = json::array();
  for (const DecisionEntry& e : ledger.decision_log) {
    entries.push_back(json{{"round", e.round},
                           {"action_id", e.action_id},
                           {"reward", e.reward},
                           {"cost", vector_to_json(e.cost.values)}});
  }
  return json{{"consumed", vector_to_json(ledger.consumed.values)},
              {"rounds_executed", ledger.rounds_executed},
              {"reward_sum", ledger.reward_sum},
              {"decision_log", std::move(entries)}};
}

RunLedger run_ledger_from_json(const json& j) {
  RunLedger ledger;
  ledger.consumed = CostVector(vector_from_json(j.at("consumed"), "consumed"));
  ledger.rounds_executed = j.at("rounds_executed").get<std::int64_t>();
  ledger.reward_sum = require_number(j, "reward_sum");
  for (const auto& e : j.at("decision_log")) {
    DecisionEntry entry;
    entry.round = e.at("round").get<std::int64_t>();
    entry.action_id = static_cast<int>(require_number(e, "action_id"));
    entry.reward = require_number(e, "reward");
    entry.cost = CostVector(vector_from_json(e.at("cost"), "cost"));
    ledger.decision_log.push_back(std::move(entry));
  }
  return ledger;
}

TraceTask validate_trace_row(const json& row, int expected_actions) {
  if (!row.is_object()) throw Error("malformed-field", "trace row must be a JSON object");
  if (!row.contains("context")) throw Error("malformed-field", "trace row missing 'context'");
  if (!row.contains("actions") || !row["actions"].is_array()) {
    throw Error("malformed-field", "trace row missing 'actions' array");
  }

  TraceTask task;
  task.context = task_context_from_json(row["context"]);
  validate(task.context);

  const auto& actions = row["actions"];
  const int a_count = expected_actions >= 0 ? expected_actions : static_cast<int>(actions.size());
  if (a_count < 1) throw Error("missing-action-entry", "trace row has no action entries");

  task.rewards.resize(a_count);
  task.costs.resize(a_count, kTraceCostDims);
  std::vector<bool> seen(static_cast<std::size_t>(a_count), false);

  for (const auto& entry : actions) {
    const int id = static_cast<int>(require_number(entry, "action_id"));
    if (id < 0 || id >= a_count) {
      throw Error("missing-action-entry",
                  "action_id " + std::to_string(id) + " outside [0, " + std::to_string(a_count) + ")");
    }
    if (seen[static_cast<std::size_t>(id)]) {
      throw Error("malformed-field", "duplicate action_id " + std::to_string(id));
    }
    seen[static_cast<std::size_t>(id)] = true;

    const double reward = require_number(entry, "reward");
    const double latency = require_number(entry, "latency");
    const double money = require_number(entry, "money");
    if (!std::isfinite(reward)) throw Error("malformed-field", "non-finite reward");
    if (!std::isfinite(latency) || !std::isfinite(money)) {
      throw Error("malformed-field", "non-finite cost");
    }
    if (latency < 0.0 || money < 0.0) {
      throw Error("negative-cost", "action " + std::to_string(id) + " has a negative cost entry");
    }
    task.rewards(id) = reward;
    task.costs(id, kLatencyDim) = latency;
    task.costs(id, kMoneyDim) = money;
  }

  for (int id = 0; id < a_count; ++id) {
    if (!seen[static_cast<std::size_t>(id)]) {
      throw Error("missing-action-entry", "trace row missing action " + std::to_string(id));
    }
  }
  return task;
}

json trace_row_to_json(const TraceTask& task) {
  json row;
  row["context"] = to_json(task.context);
  row["context"].erase("round_index");  // row position defines the round
  json actions = json::array();
  for (Eigen::Index a = 0; a < task.rewards.size(); ++a) {
    actions.push_back(json{{"action_id", static_cast<int>(a)},
                           {"reward", task.rewards(a)},
                           {"latency", task.costs(a, kLatencyDim)},
                           {"money", task.costs(a, kMoneyDim)}});
  }
  row["actions"] = std::move(actions);
  return row;
}

Trace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing-trace", "cannot open trace file '" + path + "'");

  Trace trace;
  std::string line;
  std::int64_t line_no = 0;
  int expected_actions = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error("malformed-field",
                  "line " + std::to_string(line_no) + " of '" + path + "': " + e.what());
    }
    TraceTask task = validate_trace_row(row, expected_actions);
    if (expected_actions < 0) expected_actions = static_cast<int>(task.rewards.size());
    task.context.round_index = static_cast<std::int64_t>(trace.tasks.size());
    trace.tasks.push_back(std::move(task));
  }
  trace.num_actions = expected_actions < 0 ? 0 : expected_actions;
  trace.cost_dims = kTraceCostDims;
  return trace;
}

void save_trace(const Trace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write trace file '" + path + "'");
  for (const TraceTask& task : trace.tasks) {
    out << trace_row_to_json(task).dump() << '\n';
  }
  if (!out) throw Error("io", "write failure on '" + path + "'");
}

}  // namespace m2cmab
