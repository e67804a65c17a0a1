#pragma once

#include <optional>
#include <vector>

#include "swiattn/tensor.hpp"

namespace swiattn {

using Token = int32_t;
using TokenSeq = std::vector<Token>;

namespace ops {

// --- elementwise / broadcast ---
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
// x: [R x C], bias: [C], broadcast over rows.
Tensor add_bias(const Tensor& x, const Tensor& bias);

Tensor sigmoid(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor silu(const Tensor& x);

// --- linear algebra (2-D) ---
Tensor matmul(const Tensor& a, const Tensor& b);     // [m x k] . [k x n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [m x n] . [p x n]^T -> [m x p]
Tensor transpose(const Tensor& a);
Tensor slice_cols(const Tensor& a, int64_t c0, int64_t c1);
Tensor concat_cols(const std::vector<Tensor>& parts);

// --- rows ---
// Softmax over the last dimension. mask (if given) has one byte per element;
// 0 marks an excluded entry whose output probability is exactly 0. A fully
// masked row is a contract error. Max-subtracted for stability.
Tensor softmax_rows(const Tensor& x, const std::vector<uint8_t>* mask = nullptr);

// x: [... x d], scale: [d]. y = x / sqrt(mean(x^2) + delta) * scale.
Tensor rms_norm(const Tensor& x, const Tensor& scale, double delta = 1e-6);

// --- reductions ---
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// --- embedding / positions ---
Tensor embedding_rows(const Tensor& table, const TokenSeq& ids);

// Rotary pairwise rotation applied independently to every head_dim-wide
// column block of x ([T x H*head_dim]); pair (x_{2i}, x_{2i+1}) rotates by
// angle pos * base^(-2i/head_dim). head_dim must be even.
Tensor apply_rope(const Tensor& x, const std::vector<int64_t>& positions,
                  int64_t head_dim, double base = 10000.0);

// --- gating ---
// Forward: exactly 1.0 where soft > tau else 0.0. Backward: the upstream
// gradient passes through unchanged (straight-through estimator).
Tensor hard_gate_ste(const Tensor& soft, double tau);

// gate: [T] or [T x 1] with forward values in {0, 1}; o_full/o_swa: [T x d].
// Forward copies the selected branch's row per token. Backward routes the
// row gradient to the selected branch only and d(out)/d(gate_t) =
// dot(g_t, o_full_t - o_swa_t).
Tensor row_select_mix(const Tensor& gate, const Tensor& o_full, const Tensor& o_swa);

// --- language modeling loss ---
struct LmLossResult {
  Tensor loss;              // scalar, mean NLL over the T-1 next-token pairs
  std::vector<double> nll;  // per-position NLL; entry T-1 holds the mean
};
// logits: [T x V]; tokens: the same T token ids the logits were computed
// from. Position t is scored against tokens[t+1]; the last position predicts
// nothing and its nll slot is filled with the sequence mean.
LmLossResult lm_loss(const Tensor& logits, const TokenSeq& tokens);

}  // namespace ops
}  // namespace swiattn
