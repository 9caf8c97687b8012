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

#ifndef M2CMAB_TRACE_GEN_HPP_
#define M2CMAB_TRACE_GEN_HPP_

#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "m2cmab/cost_models.hpp"
#include "m2cmab/trace.hpp"

namespace m2cmab::bench {

struct LocalCompute {
  double device_flops = kDefaultDeviceFlops;
  double power_watts = kDefaultLocalPowerWatts;
  double price_per_joule = kDefaultPricePerJoule;
};

struct CloudCompute {
  CloudRates rates;
  double base_latency_s = 0.5;
  double latency_per_token_s = 0.005;
  double jitter_frac = 0.1;
};

// One execution backend of the synthetic benchmark: per-family reward
// means, a difficulty sensitivity, and a latency/cost model.
struct BackendProfile {
  std::string label;
  Eigen::VectorXd reward_by_family;
  double reward_spread = 0.5;
  std::variant<LocalCompute, CloudCompute> compute;

  double mean_reward() const { return reward_by_family.mean(); }
};

// Five heterogeneous profiles: one cheap/fast/low-reward local backend and
// four cloud backends trading reward against latency and price, including
// one mid-priced high-reward option and one premium option.
std::vector<BackendProfile> default_backend_profiles(int families);

struct GeneratorSpec {
  std::int64_t tasks = 0;
  int context_dim = 8;
  int families = 2;
  double noise_sigma = 0.1;
  std::string mode = "linear";  // "linear" | "heavy_tail"
  // Context written as raw hidden/attention matrices instead of a pooled
  // embedding (exercises the pooling path end to end).
  bool emit_matrices = false;
  std::vector<BackendProfile> backends;  // empty selects the default set

  int num_actions() const { return static_cast<int>(backends.size()); }
};

void validate(const GeneratorSpec& spec);

// Deterministic per seed. "linear" rows are exactly additive in
// (action, context): reward = u_a + beta . x + noise and
// cost_c = v_{a,c} + gamma_c . x + noise with bounded contexts and
// margins that keep every cost strictly positive; the level structure
// u, v comes from evaluating the backend latency/cost models at nominal
// token counts. "heavy_tail" draws lognormal task difficulty, scales
// token counts by it, and prices every action through the latency/cost
// models directly; rewards live on the 1..5 scale.
Trace generate_synthetic_trace(const GeneratorSpec& spec, std::uint64_t seed);

nlohmann::json to_json(const GeneratorSpec& spec);
GeneratorSpec generator_spec_from_json(const nlohmann::json& j);

}  // namespace m2cmab::bench

#endif  // M2CMAB_TRACE_GEN_HPP_
