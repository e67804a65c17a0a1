#pragma once

#include <vector>

#include "swiattn/common.hpp"
#include "swiattn/ops.hpp"
#include "swiattn/tensor.hpp"

namespace swiattn {

struct RegularizerConfig {
  double gamma_base = 1e-3;
  double epsilon = 0.1;
  double alpha = 100.0;

  void validate() const {
    if (gamma_base < 0) throw ConfigError("regularizer: gamma_base must be >= 0");
    if (epsilon <= 0) throw ConfigError("regularizer: epsilon must be > 0");
    if (alpha < 0) throw ConfigError("regularizer: alpha must be >= 0");
  }
};

// Per-token, per-layer loss telemetry, exportable as CSV by the harness.
struct TokenLossBreakdown {
  std::vector<double> nll;                 // [T]
  std::vector<std::vector<double>> mse;    // [L][T]
  std::vector<std::vector<double>> gamma;  // [L][T]
  std::vector<std::vector<double>> reg;    // [L][T]
};

// Squared L2 norm of the difference (sum of squared components, not divided
// by the width). The result is a plain double: detached by construction, no
// gradient flows through the disagreement measurement.
double branch_mse(const Tensor& o_full, const Tensor& o_swa);

// Row-wise variant for [T x d] branch outputs.
std::vector<double> branch_mse_rows(const Tensor& o_full, const Tensor& o_swa);

// gamma = gamma_base / (epsilon + nll + alpha * mse), treated as a constant.
// Bounded above by gamma_base / epsilon and strictly decreasing in both
// arguments.
double adaptive_weight(double nll, double mse, const RegularizerConfig& cfg);

// gamma * softplus(logit). Gradient flows only through the logit.
Tensor token_regularizer(const Tensor& router_logit, double gamma);

// Vectorized per-layer form: elementwise gamma_t * softplus(logit_t) for a
// [T x 1] logits column. The gamma vector is constant w.r.t. the tape.
Tensor layer_regularizer(const Tensor& router_logits, const std::vector<double>& gammas);

// L = L_LM + mean over all (layer, token) regularizer terms. Each entry of
// layer_regs is a [T x 1] column of per-token terms for one layer; an empty
// list leaves the language-modeling loss untouched.
Tensor total_loss(const Tensor& lm, const std::vector<Tensor>& layer_regs);

}  // namespace swiattn
