#pragma once

#include <optional>
#include <vector>

#include "swiattn/common.hpp"
#include "swiattn/ops.hpp"
#include "swiattn/tensor.hpp"

namespace swiattn {

struct AttentionConfig {
  int64_t d_model = 128;
  int64_t n_heads = 4;
  int64_t n_kv_heads = 2;
  int64_t head_dim = 32;
  int64_t window = 16;  // sliding-window size W, self-inclusive

  int64_t q_width() const { return n_heads * head_dim; }
  int64_t kv_width() const { return n_kv_heads * head_dim; }
  int64_t group_size() const { return n_heads / n_kv_heads; }

  void validate() const;
};

// One weight set serves both attention branches: queries, keys, values and
// the output projection are computed once and shared.
struct QKVProjection {
  Tensor wq;  // [d_model x n_heads*head_dim]
  Tensor wk;  // [d_model x n_kv_heads*head_dim]
  Tensor wv;  // [d_model x n_kv_heads*head_dim]
  Tensor wo;  // [n_heads*head_dim x d_model]

  static QKVProjection init(const AttentionConfig& cfg, Rng& rng, double stddev);
  void validate(const AttentionConfig& cfg) const;
};

struct QKV {
  Tensor q;  // [T x n_heads*head_dim]
  Tensor k;  // [T x n_kv_heads*head_dim]
  Tensor v;  // [T x n_kv_heads*head_dim]
};

// Projects hidden states into the shared queries/keys/values. Rotary encoding
// is applied separately (ops::apply_rope) so cached keys carry their rotation.
QKV project_qkv(const Tensor& hidden, const QKVProjection& proj, const AttentionConfig& cfg);

// Causal attention over all preceding positions, grouped-query sharing by
// KV-head repetition, scores scaled by 1/sqrt(head_dim), masked entries get
// probability exactly 0. Includes the output projection.
Tensor full_attention(const QKV& qkv, const std::vector<int64_t>& positions,
                      const QKVProjection& proj, const AttentionConfig& cfg);

// Same computation restricted to the window positions [t-W+1, t].
Tensor sliding_window_attention(const QKV& qkv, const std::vector<int64_t>& positions,
                                const QKVProjection& proj, const AttentionConfig& cfg);

}  // namespace swiattn
