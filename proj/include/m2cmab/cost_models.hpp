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

#ifndef M2CMAB_COST_MODELS_HPP_
#define M2CMAB_COST_MODELS_HPP_

#include "m2cmab/types.hpp"

namespace m2cmab::bench {

// Local-device defaults: 600 W average draw and 2.06e-8 currency per
// joule. Device throughput is not pinned anywhere authoritative; 1e12 is
// the documented default and is configurable.
inline constexpr double kDefaultLocalPowerWatts = 600.0;
inline constexpr double kDefaultPricePerJoule = 2.06e-8;
inline constexpr double kDefaultDeviceFlops = 1e12;

// Local inference latency: (t_in + t_out) / device throughput.
double local_latency(double tokens_in, double tokens_out, double device_flops);

// Local monetary cost: latency * power * electricity price.
double local_cost(double latency_seconds, double power_watts = kDefaultLocalPowerWatts,
                  double price_per_joule = kDefaultPricePerJoule);

struct CloudRates {
  double per_input_token = 0.0;
  double per_output_token = 0.0;
  double per_image = 0.0;
};

// Cloud monetary cost: input charges + output charges + image charges.
double cloud_cost(double tokens_in, double tokens_out, double images, const CloudRates& rates);

// Discrete reward level from a ROUGE-L score:
//   0 -> 1, (0, 0.15) -> 2, [0.15, 0.3) -> 3, [0.3, 0.4] -> 4, (0.4, 1] -> 5.
// The 0.4 boundary is claimed by level 4.
int rouge_to_reward(double rouge_l);

// Exact-match tasks: 5 when correct, 1 otherwise.
int exact_match_reward(bool correct);

}  // namespace m2cmab::bench

#endif  // M2CMAB_COST_MODELS_HPP_
