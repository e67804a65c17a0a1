#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "swiattn/common.hpp"
#include "swiattn/ops.hpp"
#include "swiattn/tensor.hpp"

namespace testutil {

using swiattn::Rng;
using swiattn::Tensor;

inline Tensor random_tensor(swiattn::Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.vec()) v = rng.normal(0.0, scale);
  return t;
}

// Central finite differences of a scalar-valued function w.r.t. the data of
// `x`. `f` must recompute the scalar from the *current* contents of x and is
// expected to run without a tape.
inline std::vector<double> finite_diff(Tensor& x, const std::function<double()>& f,
                                       double h = 1e-5) {
  std::vector<double> grad(size_t(x.numel()));
  for (int64_t i = 0; i < x.numel(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + h;
    const double fp = f();
    x.data()[i] = saved - h;
    const double fm = f();
    x.data()[i] = saved;
    grad[size_t(i)] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

// L2-norm relative error between an analytic gradient and a reference.
inline double grad_rel_error(const std::vector<double>& got, const std::vector<double>& ref) {
  double diff = 0.0, norm = 0.0;
  for (size_t i = 0; i < ref.size(); ++i) {
    const double g = i < got.size() ? got[i] : 0.0;
    diff += (g - ref[i]) * (g - ref[i]);
    norm += ref[i] * ref[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12);
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
  return m;
}

// Runs a full tape-based gradient check of `build` (which must consume the
// leaves and return a scalar tensor) against central finite differences on
// every leaf. Returns the worst relative error across leaves.
inline double check_gradients(std::vector<Tensor> leaves,
                              const std::function<Tensor()>& build, double h = 1e-5) {
  for (Tensor& leaf : leaves) {
    leaf.set_requires_grad(true);
    leaf.zero_grad();
  }
  {
    swiattn::Tape tape;
    Tensor out = build();
    tape.backward(out);
  }
  double worst = 0.0;
  for (Tensor& leaf : leaves) {
    std::vector<double> analytic = leaf.grad();
    std::vector<double> numeric = finite_diff(leaf, [&] { return build().item(); }, h);
    worst = std::max(worst, grad_rel_error(analytic, numeric));
  }
  return worst;
}

}  // namespace testutil
