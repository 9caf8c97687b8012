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

#include "m2cmab/cost_models.hpp"

namespace m2cmab::bench {

double local_latency(double tokens_in, double tokens_out, double device_flops) {
  if (device_flops <= 0.0) throw Error("nonpositive-flops", "device throughput must be positive");
  return (tokens_in + tokens_out) / device_flops;
}

double local_cost(double latency_seconds, double power_watts, double price_per_joule) {
  return latency_seconds * power_watts * price_per_joule;
}

double cloud_cost(double tokens_in, double tokens_out, double images, const CloudRates& rates) {
  return tokens_in * rates.per_input_token + tokens_out * rates.per_output_token +
         images * rates.per_image;
}

int rouge_to_reward(double rouge_l) {
  if (rouge_l < 0.0 || rouge_l > 1.0) {
    throw Error("out-of-range", "ROUGE-L score must lie in [0, 1]");
  }
  if (rouge_l == 0.0) return 1;
  if (rouge_l < 0.15) return 2;
  if (rouge_l < 0.3) return 3;
  if (rouge_l <= 0.4) return 4;
  return 5;
}

int exact_match_reward(bool correct) { return correct ? 5 : 1; }

}  // namespace m2cmab::bench
