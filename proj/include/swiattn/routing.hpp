#pragma once

#include <vector>

#include "swiattn/common.hpp"
#include "swiattn/ops.hpp"
#include "swiattn/tensor.hpp"

namespace swiattn {

struct RouterConfig {
  double tau = 0.5;        // hard-gate threshold
  double bias_init = 2.0;  // fresh routers start near all-full-attention
};

// Linear map from a token's normalized hidden state to one scalar logit.
struct Router {
  Tensor weight;  // [d_model x 1]
  Tensor bias;    // [1]

  static Router init(int64_t d_model, double bias_init = 2.0);
};

// One row of the routing audit trail.
struct GateRecord {
  int32_t layer = 0;
  int64_t token_index = 0;
  double logit = 0.0;
  double soft_gate = 0.0;
  double hard_gate = 0.0;
};

// Raw router logits, one per token. Input must be the RMS-normalized hidden
// state (the same tensor fed to the QKV projection).
Tensor router_logits(const Tensor& h_normed, const Router& router);

// Soft gate: sigmoid of the router logit, in (0, 1), differentiable.
Tensor soft_gate(const Tensor& h_normed, const Router& router);

// Hard gate with straight-through backward. Forward is exactly 1 where
// soft > tau, else 0 (ties go to the SWA branch).
Tensor hard_gate(const Tensor& soft, double tau);

// Per-token branch selection: row t of the output is exactly the selected
// branch's row. The unselected branch receives zero gradient here.
Tensor mix_outputs(const Tensor& hard, const Tensor& o_full, const Tensor& o_swa);

}  // namespace swiattn
