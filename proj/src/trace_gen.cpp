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

#include "m2cmab/trace_gen.hpp"

#include <algorithm>
#include <cmath>

#include "m2cmab/rng.hpp"

namespace m2cmab::bench {

namespace {

// Nominal per-task token counts used to place the additive cost levels.
constexpr double kNominalTokensIn = 600.0;
constexpr double kNominalTokensOut = 200.0;
constexpr double kNominalImages = 1.0;

// Pooling with cls_attention = [H*L at position 0] reproduces hidden row 0
// bit-exactly when H*L is a power of two.
constexpr int kMatrixSeqLen = 4;
constexpr int kMatrixHeads = 2;

double nominal_latency(const BackendProfile& profile) {
  if (const auto* local = std::get_if<LocalCompute>(&profile.compute)) {
    return local_latency(kNominalTokensIn, kNominalTokensOut, local->device_flops);
  }
  const auto& cloud = std::get<CloudCompute>(profile.compute);
  return cloud.base_latency_s +
         cloud.latency_per_token_s * (kNominalTokensIn + kNominalTokensOut);
}

double nominal_money(const BackendProfile& profile) {
  if (const auto* local = std::get_if<LocalCompute>(&profile.compute)) {
    const double latency = local_latency(kNominalTokensIn, kNominalTokensOut, local->device_flops);
    return local_cost(latency, local->power_watts, local->price_per_joule);
  }
  const auto& cloud = std::get<CloudCompute>(profile.compute);
  return cloud_cost(kNominalTokensIn, kNominalTokensOut, kNominalImages, cloud.rates);
}

// Family means come in +/- pairs (the odd family out sits at zero) so the
// context marginal is centered and per-action means do not depend on the
// seed-specific slopes.
Eigen::VectorXd family_mean(int family, int families, int dim) {
  const double magnitude = (family == families - 1 && families % 2 == 1) ? 0.0 : 0.4;
  const double sign = family % 2 == 0 ? 1.0 : -1.0;
  Eigen::VectorXd mean = Eigen::VectorXd::Constant(dim, sign * magnitude);
  for (int i = 1; i < dim; i += 2) mean(i) = -mean(i);  // alternate within the vector
  return mean;
}

TaskContext make_context(const Eigen::VectorXd& x, bool emit_matrices, Rng& rng) {
  TaskContext ctx;
  if (!emit_matrices) {
    ctx.pooled_embedding = x;
    return ctx;
  }
  const Eigen::Index dim = x.size();
  Eigen::MatrixXd hidden(kMatrixSeqLen, dim);
  hidden.row(0) = x.transpose();
  for (int l = 1; l < kMatrixSeqLen; ++l) {
    for (Eigen::Index j = 0; j < dim; ++j) hidden(l, j) = rng.uniform(-1.0, 1.0);
  }
  Eigen::MatrixXd attention = Eigen::MatrixXd::Zero(kMatrixHeads, kMatrixSeqLen);
  attention.col(0).setConstant(static_cast<double>(kMatrixSeqLen));
  ctx.modality_features[kHiddenStatesTag] = std::move(hidden);
  ctx.modality_features[kClsAttentionTag] = std::move(attention);
  return ctx;
}

Trace generate_linear(const GeneratorSpec& spec, Rng& rng) {
  const int actions = spec.num_actions();
  const int dim = spec.context_dim;

  // Additive level structure from the backend profiles.
  Eigen::VectorXd reward_level(actions);
  Eigen::MatrixXd cost_level(actions, kTraceCostDims);
  for (int a = 0; a < actions; ++a) {
    const BackendProfile& profile = spec.backends[static_cast<std::size_t>(a)];
    reward_level(a) = profile.mean_reward();
    cost_level(a, kLatencyDim) = nominal_latency(profile);
    cost_level(a, kMoneyDim) = nominal_money(profile);
  }

  // Shared context slopes, scaled so costs stay strictly positive for any
  // x in [-1, 1]^d: |gamma_c|_1 + noise bound < min_a v_{a,c}.
  Eigen::VectorXd beta(dim);
  for (int i = 0; i < dim; ++i) beta(i) = rng.uniform(-1.0, 1.0);
  beta *= 0.5 / std::max(1.0, beta.cwiseAbs().sum());

  Eigen::MatrixXd gamma(dim, kTraceCostDims);
  Eigen::VectorXd cost_noise_scale(kTraceCostDims);
  for (Eigen::Index c = 0; c < kTraceCostDims; ++c) {
    const double v_min = cost_level.col(c).minCoeff();
    Eigen::VectorXd g(dim);
    for (int i = 0; i < dim; ++i) g(i) = rng.uniform(0.0, 1.0);
    g *= 0.3 * v_min / std::max(1e-300, g.cwiseAbs().sum());
    gamma.col(c) = g;
    cost_noise_scale(c) = std::min(0.2 * v_min, spec.noise_sigma * v_min);
  }

  Trace trace;
  trace.num_actions = actions;
  trace.cost_dims = kTraceCostDims;
  trace.tasks.reserve(static_cast<std::size_t>(spec.tasks));
  for (std::int64_t t = 0; t < spec.tasks; ++t) {
    const int family = static_cast<int>(rng.uniform_int(spec.families));
    const Eigen::VectorXd mean = family_mean(family, spec.families, dim);
    Eigen::VectorXd x(dim);
    for (int i = 0; i < dim; ++i) x(i) = mean(i) + rng.uniform(-0.5, 0.5);

    TraceTask task;
    task.context = make_context(x, spec.emit_matrices, rng);
    task.context.round_index = t;
    task.rewards.resize(actions);
    task.costs.resize(actions, kTraceCostDims);
    const double shared_reward_shift = beta.dot(x);
    for (int a = 0; a < actions; ++a) {
      task.rewards(a) = reward_level(a) + shared_reward_shift +
                        (spec.noise_sigma > 0.0 ? rng.normal(0.0, spec.noise_sigma) : 0.0);
      for (Eigen::Index c = 0; c < kTraceCostDims; ++c) {
        const double noise =
            cost_noise_scale(c) > 0.0 ? rng.uniform(-cost_noise_scale(c), cost_noise_scale(c))
                                      : 0.0;
        task.costs(a, c) = cost_level(a, c) + gamma.col(c).dot(x) + noise;
      }
    }
    trace.tasks.push_back(std::move(task));
  }
  return trace;
}

Trace generate_heavy_tail(const GeneratorSpec& spec, Rng& rng) {
  const int actions = spec.num_actions();
  const int dim = spec.context_dim;

  Trace trace;
  trace.num_actions = actions;
  trace.cost_dims = kTraceCostDims;
  trace.tasks.reserve(static_cast<std::size_t>(spec.tasks));
  for (std::int64_t t = 0; t < spec.tasks; ++t) {
    const int family = static_cast<int>(rng.uniform_int(spec.families));
    const double difficulty = std::exp(rng.normal(0.0, 1.2));  // heavy-tailed multiplier
    const double tokens_in = (300.0 + 150.0 * family) * difficulty * rng.uniform(0.8, 1.2);
    const double tokens_out = (120.0 + 40.0 * family) * difficulty * rng.uniform(0.8, 1.2);
    const double images = family % 2 == 0 ? 0.0 : 1.0;

    Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
    x(family) = 1.0;
    x(spec.families) = std::log(difficulty) + rng.normal(0.0, 0.1);
    for (int i = spec.families + 1; i < dim; ++i) x(i) = rng.uniform(-1.0, 1.0);

    TraceTask task;
    task.context = make_context(x, spec.emit_matrices, rng);
    task.context.round_index = t;
    task.rewards.resize(actions);
    task.costs.resize(actions, kTraceCostDims);
    for (int a = 0; a < actions; ++a) {
      const BackendProfile& profile = spec.backends[static_cast<std::size_t>(a)];
      double latency;
      double money;
      if (const auto* local = std::get_if<LocalCompute>(&profile.compute)) {
        latency = local_latency(tokens_in, tokens_out, local->device_flops);
        money = local_cost(latency, local->power_watts, local->price_per_joule);
      } else {
        const auto& cloud = std::get<CloudCompute>(profile.compute);
        const double jitter = rng.uniform(1.0 - cloud.jitter_frac, 1.0 + cloud.jitter_frac);
        latency = (cloud.base_latency_s + cloud.latency_per_token_s * (tokens_in + tokens_out)) *
                  jitter;
        money = cloud_cost(tokens_in, tokens_out, images, cloud.rates);
      }
      task.costs(a, kLatencyDim) = latency;
      task.costs(a, kMoneyDim) = money;
      const double quality = profile.reward_by_family(family % profile.reward_by_family.size());
      const double raw = quality - profile.reward_spread * std::log(difficulty) +
                         (spec.noise_sigma > 0.0 ? rng.normal(0.0, spec.noise_sigma) : 0.0);
      task.rewards(a) = std::clamp(raw, 1.0, 5.0);
    }
    trace.tasks.push_back(std::move(task));
  }
  return trace;
}

}  // namespace

std::vector<BackendProfile> default_backend_profiles(int families) {
  const auto family_vector = [families](double base, double step) {
    Eigen::VectorXd v(families);
    for (int f = 0; f < families; ++f) v(f) = base + step * f;
    return v;
  };

  // Money is denominated in milli-currency so per-call charges across the
  // backends stay within roughly one order of magnitude of the local
  // energy cost and budget totals land on an O(T) scale.
  std::vector<BackendProfile> profiles;
  profiles.push_back({"local-2b", family_vector(2.0, 0.1), 0.3,
                      LocalCompute{/*device_flops=*/400.0, kDefaultLocalPowerWatts,
                                   /*price_per_joule=*/2.06e-5}});
  profiles.push_back({"cloud-nano", family_vector(4.4, -0.1), 0.4,
                      CloudCompute{{5.0e-5, 1.0e-4, 2.0e-2}, 0.3, 0.004, 0.1}});
  profiles.push_back({"cloud-32b", family_vector(3.0, 0.2), 0.4,
                      CloudCompute{{1.0e-4, 2.0e-4, 4.0e-2}, 1.6, 0.008, 0.1}});
  profiles.push_back({"cloud-moe", family_vector(2.4, 0.3), 0.5,
                      CloudCompute{{1.5e-4, 3.0e-4, 6.0e-2}, 2.0, 0.010, 0.15}});
  profiles.push_back({"cloud-think", family_vector(4.6, 0.1), 0.6,
                      CloudCompute{{2.0e-4, 4.0e-4, 8.0e-2}, 2.4, 0.012, 0.2}});
  return profiles;
}

void validate(const GeneratorSpec& spec) {
  if (spec.tasks < 1) throw Error("invalid-spec", "task count must be positive");
  if (spec.num_actions() < 2) throw Error("invalid-spec", "need at least two backends");
  if (spec.families < 2) throw Error("invalid-spec", "need at least two task families");
  if (spec.mode != "linear" && spec.mode != "heavy_tail") {
    throw Error("invalid-spec", "mode must be 'linear' or 'heavy_tail'");
  }
  if (spec.context_dim < 1) throw Error("invalid-spec", "context dimension must be positive");
  if (spec.mode == "heavy_tail" && spec.context_dim < spec.families + 1) {
    throw Error("invalid-spec", "heavy_tail mode needs context_dim >= families + 1");
  }
  if (spec.noise_sigma < 0.0) throw Error("invalid-spec", "noise must be nonnegative");
  for (const BackendProfile& profile : spec.backends) {
    if (profile.reward_by_family.size() < 1) {
      throw Error("invalid-spec", "backend '" + profile.label + "' has no reward means");
    }
    if (const auto* local = std::get_if<LocalCompute>(&profile.compute)) {
      if (local->device_flops <= 0.0) throw Error("invalid-spec", "nonpositive device throughput");
      if (local->power_watts < 0.0 || local->price_per_joule < 0.0) {
        throw Error("invalid-spec", "negative local rates");
      }
    } else {
      const auto& cloud = std::get<CloudCompute>(profile.compute);
      if (cloud.rates.per_input_token < 0.0 || cloud.rates.per_output_token < 0.0 ||
          cloud.rates.per_image < 0.0 || cloud.base_latency_s < 0.0 ||
          cloud.latency_per_token_s < 0.0 || cloud.jitter_frac < 0.0 || cloud.jitter_frac >= 1.0) {
        throw Error("invalid-spec", "cloud rates out of range");
      }
    }
  }
}

Trace generate_synthetic_trace(const GeneratorSpec& spec, std::uint64_t seed) {
  GeneratorSpec filled = spec;
  if (filled.backends.empty()) filled.backends = default_backend_profiles(filled.families);
  validate(filled);
  Rng rng(seed);
  return filled.mode == "linear" ? generate_linear(filled, rng)
                                 : generate_heavy_tail(filled, rng);
}

nlohmann::json to_json(const GeneratorSpec& spec) {
  nlohmann::json backends = nlohmann::json::array();
  for (const BackendProfile& p : spec.backends) {
    nlohmann::json entry{{"label", p.label}, {"reward_spread", p.reward_spread}};
    entry["reward_by_family"] = nlohmann::json::array();
    for (Eigen::Index f = 0; f < p.reward_by_family.size(); ++f) {
      entry["reward_by_family"].push_back(p.reward_by_family(f));
    }
    if (const auto* local = std::get_if<LocalCompute>(&p.compute)) {
      entry["local"] = {{"device_flops", local->device_flops},
                        {"power_watts", local->power_watts},
                        {"price_per_joule", local->price_per_joule}};
    } else {
      const auto& cloud = std::get<CloudCompute>(p.compute);
      entry["cloud"] = {{"per_input_token", cloud.rates.per_input_token},
                        {"per_output_token", cloud.rates.per_output_token},
                        {"per_image", cloud.rates.per_image},
                        {"base_latency_s", cloud.base_latency_s},
                        {"latency_per_token_s", cloud.latency_per_token_s},
                        {"jitter_frac", cloud.jitter_frac}};
    }
    backends.push_back(std::move(entry));
  }
  return nlohmann::json{{"tasks", spec.tasks},
                        {"context_dim", spec.context_dim},
                        {"families", spec.families},
                        {"noise_sigma", spec.noise_sigma},
                        {"mode", spec.mode},
                        {"emit_matrices", spec.emit_matrices},
                        {"backends", std::move(backends)}};
}

GeneratorSpec generator_spec_from_json(const nlohmann::json& j) {
  GeneratorSpec spec;
  spec.tasks = j.value("tasks", spec.tasks);
  spec.context_dim = j.value("context_dim", spec.context_dim);
  spec.families = j.value("families", spec.families);
  spec.noise_sigma = j.value("noise_sigma", spec.noise_sigma);
  spec.mode = j.value("mode", spec.mode);
  spec.emit_matrices = j.value("emit_matrices", spec.emit_matrices);
  if (j.contains("backends")) {
    for (const auto& entry : j["backends"]) {
      BackendProfile p;
      p.label = entry.value("label", std::string("backend"));
      p.reward_spread = entry.value("reward_spread", 0.5);
      const auto& rewards = entry.at("reward_by_family");
      p.reward_by_family.resize(rewards.size());
      Eigen::Index f = 0;
      for (const auto& r : rewards) p.reward_by_family(f++) = r.get<double>();
      if (entry.contains("local")) {
        const auto& local = entry["local"];
        p.compute = LocalCompute{local.value("device_flops", kDefaultDeviceFlops),
                                 local.value("power_watts", kDefaultLocalPowerWatts),
                                 local.value("price_per_joule", kDefaultPricePerJoule)};
      } else if (entry.contains("cloud")) {
        const auto& cloud = entry["cloud"];
        CloudCompute c;
        c.rates = CloudRates{cloud.value("per_input_token", 0.0),
                             cloud.value("per_output_token", 0.0), cloud.value("per_image", 0.0)};
        c.base_latency_s = cloud.value("base_latency_s", 0.5);
        c.latency_per_token_s = cloud.value("latency_per_token_s", 0.005);
        c.jitter_frac = cloud.value("jitter_frac", 0.1);
        p.compute = c;
      } else {
        throw Error("invalid-spec", "backend entry needs a 'local' or 'cloud' block");
      }
      spec.backends.push_back(std::move(p));
    }
  }
  return spec;
}

}  // namespace m2cmab::bench
