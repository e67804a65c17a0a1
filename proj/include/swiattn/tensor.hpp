#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "swiattn/common.hpp"

namespace swiattn {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;   // allocated lazily by backward
  bool requires_grad = false; // set on leaves the caller wants gradients for
  bool on_tape = false;       // value participates in the active tape's graph

  double* grad_buf() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad.data();
  }
};

}  // namespace detail

// Dense row-major tensor of doubles. Copying a Tensor copies the handle, not
// the buffer; clone() deep-copies. Gradient tracking is opt-in per leaf via
// set_requires_grad and only active while a Tape is alive.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(std::vector<double> values, Shape shape);
  static Tensor scalar(double value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int64_t numel() const { return int64_t(impl_->data.size()); }
  int64_t dim(size_t i) const { return impl_->shape.at(i); }
  int64_t rank() const { return int64_t(impl_->shape.size()); }

  double* data() { return impl_->data.data(); }
  const double* data() const { return impl_->data.data(); }
  std::vector<double>& vec() { return impl_->data; }
  const std::vector<double>& vec() const { return impl_->data; }

  // Element access for scalars and flat indexing.
  double item() const;
  double at(int64_t i) const { return impl_->data.at(size_t(i)); }
  // 2-D convenience accessor.
  double at(int64_t r, int64_t c) const;

  Tensor clone() const;

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  Tensor& set_requires_grad(bool flag = true);
  bool on_tape() const { return impl_ && impl_->on_tape; }

  bool has_grad() const { return impl_ && !impl_->grad.empty(); }
  const std::vector<double>& grad() const;
  void zero_grad();

  // True when any gradient should flow into this tensor.
  bool needs_grad() const { return requires_grad() || on_tape(); }

  detail::TensorImpl* impl() const { return impl_.get(); }
  std::shared_ptr<detail::TensorImpl> impl_ptr() const { return impl_; }

  static Tensor wrap(std::shared_ptr<detail::TensorImpl> impl) {
    Tensor t;
    t.impl_ = std::move(impl);
    return t;
  }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

// Throws NumericsError if any element of t is NaN or Inf. `who` names the
// producing operation in the message.
void check_finite(const Tensor& t, const char* who);

// Reverse-mode tape. Constructing a Tape makes it the active tape for the
// current thread; destruction restores the previous one. Operations record a
// backward closure when a tape is active and any input needs a gradient.
// The tape is meant to be rebuilt per forward pass.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  void record(std::shared_ptr<detail::TensorImpl> output,
              std::function<void()> backward_fn) {
    entries_.push_back({std::move(output), std::move(backward_fn)});
  }

  size_t size() const { return entries_.size(); }

  // Seeds d(loss)/d(loss) = 1 and runs every recorded closure in reverse.
  // Intermediate (op output) gradients are reset per call, so repeated calls
  // without zero_grad accumulate into the leaves only.
  void backward(const Tensor& loss);

 private:
  struct Entry {
    std::shared_ptr<detail::TensorImpl> output;
    std::function<void()> fn;
  };
  std::vector<Entry> entries_;
  Tape* prev_ = nullptr;
};

}  // namespace swiattn
