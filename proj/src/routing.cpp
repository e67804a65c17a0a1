#include "swiattn/routing.hpp"

namespace swiattn {

namespace op = ops;

Router Router::init(int64_t d_model, double bias_init) {
  Router r;
  r.weight = Tensor::zeros({d_model, 1});
  r.bias = Tensor::full({1}, bias_init);
  return r;
}

Tensor router_logits(const Tensor& h_normed, const Router& router) {
  if (h_normed.rank() != 2 || h_normed.dim(1) != router.weight.dim(0))
    throw ShapeError("router_logits: hidden width does not match router weight");
  return op::add_bias(op::matmul(h_normed, router.weight), router.bias);
}

Tensor soft_gate(const Tensor& h_normed, const Router& router) {
  return op::sigmoid(router_logits(h_normed, router));
}

Tensor hard_gate(const Tensor& soft, double tau) {
  return op::hard_gate_ste(soft, tau);
}

Tensor mix_outputs(const Tensor& hard, const Tensor& o_full, const Tensor& o_swa) {
  return op::row_select_mix(hard, o_full, o_swa);
}

}  // namespace swiattn
