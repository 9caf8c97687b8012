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

#include <doctest.h>

#include "m2cmab/pooling.hpp"
#include "m2cmab/rng.hpp"

using namespace m2cmab;
using embed::AttentionBundle;

TEST_CASE("pooling matches the hand-evaluated formula") {
  // H=1, L=2, alpha=(1,0), h_1=(2,2), h_2=(9,9) -> (1/2)*(1*(2,2)) = (1,1)
  AttentionBundle bundle;
  bundle.hidden_states = (Eigen::MatrixXd(2, 2) << 2, 2, 9, 9).finished();
  bundle.cls_attention = (Eigen::MatrixXd(1, 2) << 1, 0).finished();
  const Eigen::VectorXd z = embed::cls_attentive_pool(bundle);
  CHECK(z(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(z(1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("all-zero attention pools to the zero vector") {
  AttentionBundle bundle;
  bundle.hidden_states = Eigen::MatrixXd::Random(5, 3).cwiseAbs();
  bundle.cls_attention = Eigen::MatrixXd::Zero(2, 5);
  CHECK(embed::cls_attentive_pool(bundle).isZero(0.0));
}

TEST_CASE("duplicated heads average to the single-head result") {
  Rng rng(3);
  Eigen::MatrixXd hidden(4, 3);
  Eigen::MatrixXd one_head(1, 4);
  for (int l = 0; l < 4; ++l) {
    one_head(0, l) = rng.uniform(0.0, 1.0);
    for (int j = 0; j < 3; ++j) hidden(l, j) = rng.normal(0.0, 1.0);
  }
  Eigen::MatrixXd two_heads(2, 4);
  two_heads.row(0) = one_head.row(0);
  two_heads.row(1) = one_head.row(0);

  const Eigen::VectorXd a = embed::cls_attentive_pool(hidden, one_head);
  const Eigen::VectorXd b = embed::cls_attentive_pool(hidden, two_heads);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("pooling is linear in the hidden states") {
  Rng rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const int length = 2 + static_cast<int>(rng.uniform_int(5));
    const int dim = 1 + static_cast<int>(rng.uniform_int(4));
    const int heads = 1 + static_cast<int>(rng.uniform_int(3));
    Eigen::MatrixXd x(length, dim), y(length, dim), attn(heads, length);
    for (int l = 0; l < length; ++l) {
      for (int j = 0; j < dim; ++j) {
        x(l, j) = rng.normal(0.0, 2.0);
        y(l, j) = rng.normal(0.0, 2.0);
      }
      for (int h = 0; h < heads; ++h) attn(h, l) = rng.uniform(0.0, 1.0);
    }
    const double a = rng.uniform(-2.0, 2.0);
    const double b = rng.uniform(-2.0, 2.0);
    const Eigen::VectorXd lhs = embed::cls_attentive_pool(a * x + b * y, attn);
    const Eigen::VectorXd rhs =
        a * embed::cls_attentive_pool(x, attn) + b * embed::cls_attentive_pool(y, attn);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("permuting heads leaves the pool unchanged") {
  Rng rng(17);
  Eigen::MatrixXd hidden(6, 4), attn(3, 6);
  for (int l = 0; l < 6; ++l) {
    for (int j = 0; j < 4; ++j) hidden(l, j) = rng.normal(0.0, 1.0);
    for (int h = 0; h < 3; ++h) attn(h, l) = rng.uniform(0.0, 2.0);
  }
  Eigen::MatrixXd permuted(3, 6);
  permuted.row(0) = attn.row(2);
  permuted.row(1) = attn.row(0);
  permuted.row(2) = attn.row(1);
  const Eigen::VectorXd a = embed::cls_attentive_pool(hidden, attn);
  const Eigen::VectorXd b = embed::cls_attentive_pool(hidden, permuted);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("attention row length must match the number of hidden states") {
  AttentionBundle bundle;
  bundle.hidden_states = Eigen::MatrixXd::Zero(3, 2);
  bundle.cls_attention = Eigen::MatrixXd::Zero(1, 4);
  CHECK_THROWS_WITH_AS(embed::cls_attentive_pool(bundle), doctest::Contains("dimension-mismatch"),
                       Error);
}

TEST_CASE("normalize_attention renormalizes each head before pooling") {
  Eigen::MatrixXd hidden = (Eigen::MatrixXd(2, 1) << 1.0, 3.0).finished();
  Eigen::MatrixXd attn = (Eigen::MatrixXd(1, 2) << 2.0, 6.0).finished();
  // normalized weights (0.25, 0.75): z = (1/2) * (0.25*1 + 0.75*3) = 1.25
  const Eigen::VectorXd z = embed::cls_attentive_pool(hidden, attn, true);
  CHECK(z(0) == doctest::Approx(1.25).epsilon(1e-12));
  // zero rows stay zero instead of dividing by zero
  Eigen::MatrixXd zero_attn = Eigen::MatrixXd::Zero(1, 2);
  CHECK(embed::cls_attentive_pool(hidden, zero_attn, true).isZero(0.0));
}

TEST_CASE("joint feature is the action embedding followed by the context") {
  TaskContext ctx;
  ctx.pooled_embedding = (Eigen::VectorXd(2) << 2.0, 3.0).finished();
  ActionSpec action{0, "a", (Eigen::VectorXd(1) << 1.0).finished()};
  const Eigen::VectorXd feature = embed::joint_feature(ctx, action);
  REQUIRE(feature.size() == 3);
  CHECK(feature(0) == 1.0);
  CHECK(feature(1) == 2.0);
  CHECK(feature(2) == 3.0);
}

TEST_CASE("two actions on one context differ only in the action block") {
  TaskContext ctx;
  ctx.pooled_embedding = (Eigen::VectorXd(3) << 0.5, -1.0, 2.0).finished();
  const auto actions = one_hot_actions(2);
  const Eigen::VectorXd f0 = embed::joint_feature(ctx, actions[0]);
  const Eigen::VectorXd f1 = embed::joint_feature(ctx, actions[1]);
  CHECK(f0.head(2) != f1.head(2));
  CHECK(f0.tail(3) == f1.tail(3));
}

TEST_CASE("zero context embedding leaves only the action block") {
  TaskContext ctx;
  ctx.pooled_embedding = Eigen::VectorXd::Zero(3);
  ActionSpec action{0, "a", (Eigen::VectorXd(2) << 0.7, -0.1).finished()};
  const Eigen::VectorXd feature = embed::joint_feature(ctx, action);
  CHECK(feature.head(2) == action.action_embedding);
  CHECK(feature.tail(3).isZero(0.0));
}

TEST_CASE("contexts without any representation are rejected") {
  TaskContext ctx;  // neither embedding nor matrices
  ActionSpec action{0, "a", Eigen::VectorXd::Ones(1)};
  CHECK_THROWS_WITH_AS(embed::joint_feature(ctx, action), doctest::Contains("missing-embedding"),
                       Error);
}

TEST_CASE("raw matrices in the context feed the pooling path") {
  TaskContext ctx;
  ctx.modality_features[kHiddenStatesTag] = (Eigen::MatrixXd(2, 2) << 2, 2, 9, 9).finished();
  ctx.modality_features[kClsAttentionTag] = (Eigen::MatrixXd(1, 2) << 1, 0).finished();
  const Eigen::VectorXd z = embed::pooled_context(ctx);
  CHECK(z(0) == doctest::Approx(1.0));
  // a precomputed embedding takes precedence
  ctx.pooled_embedding = (Eigen::VectorXd(2) << 5.0, 6.0).finished();
  CHECK(embed::pooled_context(ctx)(0) == 5.0);
}
