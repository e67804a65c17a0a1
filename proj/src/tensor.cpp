#include "swiattn/tensor.hpp"

#include <cmath>
#include <sstream>

namespace swiattn {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << "]";
  return os.str();
}

Tensor Tensor::zeros(Shape shape) {
  auto impl = std::make_shared<detail::TensorImpl>();
  int64_t n = shape_numel(shape);
  impl->shape = std::move(shape);
  impl->data.assign(size_t(n), 0.0);
  return wrap(std::move(impl));
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t = zeros(std::move(shape));
  for (double& v : t.vec()) v = value;
  return t;
}

Tensor Tensor::from(std::vector<double> values, Shape shape) {
  int64_t n = shape_numel(shape);
  if (int64_t(values.size()) != n)
    throw ShapeError("data length " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  Tensor t = wrap(std::move(impl));
  check_finite(t, "Tensor::from");
  return t;
}

Tensor Tensor::scalar(double value) { return from({value}, Shape{1}); }

double Tensor::item() const {
  if (numel() != 1)
    throw ContractError("item() on non-scalar tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

double Tensor::at(int64_t r, int64_t c) const {
  if (rank() != 2) throw ShapeError("2-D accessor on tensor of shape " + shape_str(shape()));
  return impl_->data.at(size_t(r * dim(1) + c));
}

Tensor Tensor::clone() const {
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  impl->requires_grad = impl_->requires_grad;
  return wrap(std::move(impl));
}

Tensor& Tensor::set_requires_grad(bool flag) {
  impl_->requires_grad = flag;
  return *this;
}

const std::vector<double>& Tensor::grad() const {
  if (!has_grad())
    throw ContractError("grad() requested but no gradient has been populated");
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_) impl_->grad.clear();
}

void check_finite(const Tensor& t, const char* who) {
  for (double v : t.vec()) {
    if (!std::isfinite(v))
      throw NumericsError(std::string(who) + " produced a non-finite value");
  }
}

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape::Tape() : prev_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() { g_active_tape = prev_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw ContractError("backward requires a scalar loss");
  if (entries_.empty()) throw ContractError("backward on an empty tape");
  for (Entry& e : entries_) e.output->grad.clear();
  loss.impl()->grad_buf()[0] = 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) it->fn();
}

}  // namespace swiattn
