#include "swiattn/objective.hpp"

namespace swiattn {

namespace op = ops;

double branch_mse(const Tensor& o_full, const Tensor& o_swa) {
  if (o_full.shape() != o_swa.shape())
    throw ShapeError("branch_mse: shapes disagree");
  double acc = 0.0;
  for (int64_t i = 0; i < o_full.numel(); ++i) {
    const double d = o_full.data()[i] - o_swa.data()[i];
    acc += d * d;
  }
  return acc;
}

std::vector<double> branch_mse_rows(const Tensor& o_full, const Tensor& o_swa) {
  if (o_full.shape() != o_swa.shape() || o_full.rank() != 2)
    throw ShapeError("branch_mse_rows: expects matching [T x d] tensors");
  const int64_t t = o_full.dim(0), d = o_full.dim(1);
  std::vector<double> out(static_cast<size_t>(t), 0.0);
  for (int64_t r = 0; r < t; ++r) {
    double acc = 0.0;
    for (int64_t c = 0; c < d; ++c) {
      const double diff = o_full.at(r, c) - o_swa.at(r, c);
      acc += diff * diff;
    }
    out[size_t(r)] = acc;
  }
  return out;
}

double adaptive_weight(double nll, double mse, const RegularizerConfig& cfg) {
  cfg.validate();
  return cfg.gamma_base / (cfg.epsilon + nll + cfg.alpha * mse);
}

Tensor token_regularizer(const Tensor& router_logit, double gamma) {
  if (gamma < 0) throw ContractError("token_regularizer: gamma must be >= 0");
  return op::scale(op::softplus(router_logit), gamma);
}

Tensor layer_regularizer(const Tensor& logits, const std::vector<double>& gammas) {
  if (logits.numel() != int64_t(gammas.size()))
    throw ShapeError("layer_regularizer: one gamma per token required");
  Tensor g = Tensor::from(std::vector<double>(gammas), logits.shape());
  return op::mul(op::softplus(logits), g);
}

Tensor total_loss(const Tensor& lm, const std::vector<Tensor>& layer_regs) {
  if (layer_regs.empty()) return lm;
  Tensor acc;
  int64_t count = 0;
  for (const Tensor& r : layer_regs) {
    count += r.numel();
    Tensor s = op::sum(r);
    acc = acc.defined() ? op::add(acc, s) : s;
  }
  return op::add(lm, op::scale(acc, 1.0 / double(count)));
}

}  // namespace swiattn
