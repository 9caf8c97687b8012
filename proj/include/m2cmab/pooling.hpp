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

#ifndef M2CMAB_POOLING_HPP_
#define M2CMAB_POOLING_HPP_

#include <Eigen/Dense>

#include "m2cmab/types.hpp"

namespace m2cmab::embed {

// Last-layer activations needed for pooling: hidden states H (L x d_hid)
// and the CLS attention rows, one per head (H_heads x L).
struct AttentionBundle {
  Eigen::MatrixXd hidden_states;
  Eigen::MatrixXd cls_attention;
};

using PooledEmbedding = Eigen::VectorXd;

inline void validate(const AttentionBundle& bundle) {
  if (bundle.hidden_states.rows() < 1 || bundle.cls_attention.rows() < 1) {
    throw Error("malformed-field", "attention bundle needs L >= 1 and H_heads >= 1");
  }
  if (!bundle.hidden_states.allFinite() || !bundle.cls_attention.allFinite()) {
    throw Error("malformed-field", "non-finite entries in attention bundle");
  }
  if ((bundle.cls_attention.array() < 0.0).any()) {
    throw Error("malformed-field", "attention weights must be nonnegative");
  }
  if (bundle.cls_attention.cols() != bundle.hidden_states.rows()) {
    throw Error("dimension-mismatch",
                "attention rows have length " + std::to_string(bundle.cls_attention.cols()) +
                    " but there are " + std::to_string(bundle.hidden_states.rows()) +
                    " hidden states");
  }
}

// Attention-weighted average of hidden states over heads and positions:
//
//   z = (1/H) sum_h (1/L) sum_l alpha_{h,l} * h_l
//
// The 1/L factor is applied verbatim, so the magnitude of z shrinks with
// sequence length; optional `normalize_attention` renormalizes each head's
// weights to sum to 1 beforehand (experiments only, off by default).
// Linear in the hidden states for fixed attention.
template <typename DHidden, typename DAttn>
Eigen::VectorXd cls_attentive_pool(const Eigen::MatrixBase<DHidden>& hidden_states,
                                   const Eigen::MatrixBase<DAttn>& cls_attention,
                                   bool normalize_attention = false) {
  const Eigen::Index heads = cls_attention.rows();
  const Eigen::Index length = hidden_states.rows();
  if (cls_attention.cols() != length) {
    throw Error("dimension-mismatch",
                "attention rows have length " + std::to_string(cls_attention.cols()) +
                    " but there are " + std::to_string(length) + " hidden states");
  }

  Eigen::RowVectorXd head_sum;
  if (normalize_attention) {
    Eigen::MatrixXd normalized = cls_attention;
    for (Eigen::Index h = 0; h < heads; ++h) {
      const double total = normalized.row(h).sum();
      if (total > 0.0) normalized.row(h) /= total;
    }
    head_sum = normalized.colwise().sum();
  } else {
    head_sum = cls_attention.colwise().sum();
  }

  const double scale = 1.0 / (static_cast<double>(heads) * static_cast<double>(length));
  return scale * (hidden_states.transpose() * head_sum.transpose());
}

inline PooledEmbedding cls_attentive_pool(const AttentionBundle& bundle,
                                          bool normalize_attention = false) {
  validate(bundle);
  return cls_attentive_pool(bundle.hidden_states, bundle.cls_attention, normalize_attention);
}

// Context embedding: the precomputed one when present, otherwise pooled
// from the raw hidden/attention matrices carried by the context.
inline Eigen::VectorXd pooled_context(const TaskContext& ctx, bool normalize_attention = false) {
  if (ctx.pooled_embedding.has_value()) return *ctx.pooled_embedding;
  const auto hidden = ctx.modality_features.find(kHiddenStatesTag);
  const auto attn = ctx.modality_features.find(kClsAttentionTag);
  if (hidden == ctx.modality_features.end() || attn == ctx.modality_features.end()) {
    throw Error("missing-embedding",
                "context has no pooled embedding and no hidden/attention matrices");
  }
  AttentionBundle bundle{hidden->second, attn->second};
  return cls_attentive_pool(bundle, normalize_attention);
}

// Joint feature for the adapters: action embedding first, then the
// context embedding.
inline Eigen::VectorXd joint_feature(const TaskContext& ctx, const ActionSpec& action,
                                     bool normalize_attention = false) {
  const Eigen::VectorXd z_x = pooled_context(ctx, normalize_attention);
  Eigen::VectorXd out(action.action_embedding.size() + z_x.size());
  out << action.action_embedding, z_x;
  return out;
}

}  // namespace m2cmab::embed

#endif  // M2CMAB_POOLING_HPP_
