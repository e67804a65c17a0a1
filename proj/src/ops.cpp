#include "swiattn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace swiattn {
namespace ops {

namespace {

using detail::TensorImpl;
using Impl = std::shared_ptr<TensorImpl>;

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (!Tape::active()) return false;
  for (const Tensor* t : inputs)
    if (t->needs_grad()) return true;
  return false;
}

void record(const Tensor& out, std::function<void()> fn) {
  out.impl()->on_tape = true;
  Tape::active()->record(out.impl_ptr(), std::move(fn));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* who) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(who) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

// Accumulating matmul kernels. Loop orders keep the innermost access
// contiguous; reduction order per output element is fixed, so results are
// deterministic regardless of threading over independent rows.

// C[m x n] += A[m x k] . B[k x n]
void mm_nn(double* C, const double* A, const double* B, int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for if (m * k * n > 16384) schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    double* c = C + i * n;
    const double* a = A + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const double av = a[p];
      const double* b = B + p * n;
      for (int64_t j = 0; j < n; ++j) c[j] += av * b[j];
    }
  }
}

// C[m x p] += A[m x n] . B^T where B is [p x n]
void mm_nt(double* C, const double* A, const double* B, int64_t m, int64_t n, int64_t p) {
#pragma omp parallel for if (m * n * p > 16384) schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    const double* a = A + i * n;
    double* c = C + i * p;
    for (int64_t q = 0; q < p; ++q) {
      const double* b = B + q * n;
      double acc = 0.0;
      for (int64_t j = 0; j < n; ++j) acc += a[j] * b[j];
      c[q] += acc;
    }
  }
}

// C[k x n] += A^T . G where A is [m x k], G is [m x n]
void mm_tn(double* C, const double* A, const double* G, int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for if (m * k * n > 16384) schedule(static)
  for (int64_t r = 0; r < k; ++r) {
    double* c = C + r * n;
    for (int64_t i = 0; i < m; ++i) {
      const double av = A[i * k + r];
      if (av == 0.0) continue;
      const double* g = G + i * n;
      for (int64_t j = 0; j < n; ++j) c[j] += av * g[j];
    }
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  check_finite(out, "add");
  if (should_record({&a, &b})) {
    record(out, [ai = a.impl_ptr(), bi = b.impl_ptr(), oi = out.impl_ptr(),
                 na = a.needs_grad(), nb = b.needs_grad(), n] {
      if (oi->grad.empty()) return;
      const double* g = oi->grad.data();
      if (na) {
        double* ga = ai->grad_buf();
        for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
      }
      if (nb) {
        double* gb = bi->grad_buf();
        for (int64_t i = 0; i < n; ++i) gb[i] += g[i];
      }
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape());
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
  check_finite(out, "sub");
  if (should_record({&a, &b})) {
    record(out, [ai = a.impl_ptr(), bi = b.impl_ptr(), oi = out.impl_ptr(),
                 na = a.needs_grad(), nb = b.needs_grad(), n] {
      if (oi->grad.empty()) return;
      const double* g = oi->grad.data();
      if (na) {
        double* ga = ai->grad_buf();
        for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
      }
      if (nb) {
        double* gb = bi->grad_buf();
        for (int64_t i = 0; i < n; ++i) gb[i] -= g[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  check_finite(out, "mul");
  if (should_record({&a, &b})) {
    record(out, [ai = a.impl_ptr(), bi = b.impl_ptr(), oi = out.impl_ptr(),
                 na = a.needs_grad(), nb = b.needs_grad(), n] {
      if (oi->grad.empty()) return;
      const double* g = oi->grad.data();
      if (na) {
        double* ga = ai->grad_buf();
        for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * bi->data[i];
      }
      if (nb) {
        double* gb = bi->grad_buf();
        for (int64_t i = 0; i < n; ++i) gb[i] += g[i] * ai->data[i];
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out = Tensor::zeros(a.shape());
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = c * a.data()[i];
  check_finite(out, "scale");
  if (should_record({&a})) {
    record(out, [ai = a.impl_ptr(), oi = out.impl_ptr(), c, n] {
      if (oi->grad.empty()) return;
      const double* g = oi->grad.data();
      double* ga = ai->grad_buf();
      for (int64_t i = 0; i < n; ++i) ga[i] += c * g[i];
    });
  }
  return out;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (x.rank() != 2 || bias.rank() != 1 || bias.dim(0) != x.dim(1))
    throw ShapeError("add_bias: x " + shape_str(x.shape()) + " bias " + shape_str(bias.shape()));
  const int64_t rows = x.dim(0), cols = x.dim(1);
  Tensor out = Tensor::zeros(x.shape());
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < cols; ++c)
      out.data()[r * cols + c] = x.data()[r * cols + c] + bias.data()[c];
  check_finite(out, "add_bias");
  if (should_record({&x, &bias})) {
    record(out, [xi = x.impl_ptr(), bi = bias.impl_ptr(), oi = out.impl_ptr(),
                 nx = x.needs_grad(), nb = bias.needs_grad(), rows, cols] {
      if (oi->grad.empty()) return;
      const double* g = oi->grad.data();
      if (nx) {
        double* gx = xi->grad_buf();
        for (int64_t i = 0; i < rows * cols; ++i) gx[i] += g[i];
      }
      if (nb) {
        double* gb = bi->grad_buf();
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t c = 0; c < cols; ++c) gb[c] += g[r * cols + c];
      }
    });
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = stable_sigmoid(x.data()[i]);
  check_finite(out, "sigmoid");
  if (should_record({&x})) {
    record(out, [xi = x.impl_ptr(), oi = out.impl_ptr(), n] {
      if (oi->grad.empty()) return;
      const double* g = oi->grad.data();
      const double* y = oi->data.data();
      double* gx = xi->grad_buf();
      for (int64_t i = 0; i < n; ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
    });
  }
  return out;
}

Tensor softplus(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = stable_softplus(x.data()[i]);
  check_finite(out, "softplus");
  if (should_record({&x})) {
    record(out, [xi = x.impl_ptr(), oi = out.impl_ptr(), n] {
      if (oi->grad.empty()) return;
      const double* g = oi->grad.data();
      double* gx = xi->grad_buf();
      for (int64_t i = 0; i < n; ++i) gx[i] += g[i] * stable_sigmoid(xi->data[i]);
    });
  }
  return out;
}

Tensor silu(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) {
    double v = x.data()[i];
    out.data()[i] = v * stable_sigmoid(v);
  }
  check_finite(out, "silu");
  if (should_record({&x})) {
    record(out, [xi = x.impl_ptr(), oi = out.impl_ptr(), n] {
      if (oi->grad.empty()) return;
      const double* g = oi->grad.data();
      double* gx = xi->grad_buf();
      for (int64_t i = 0; i < n; ++i) {
        double v = xi->data[i];
        double s = stable_sigmoid(v);
        gx[i] += g[i] * (s + v * s * (1.0 - s));
      }
    });
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw ShapeError("matmul expects 2-D operands");
  if (a.dim(1) != b.dim(0))
    throw ShapeError("matmul: inner dimensions disagree " + shape_str(a.shape()) +
                     " . " + shape_str(b.shape()));
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::zeros({m, n});
  mm_nn(out.data(), a.data(), b.data(), m, k, n);
  check_finite(out, "matmul");
  if (should_record({&a, &b})) {
    record(out, [ai = a.impl_ptr(), bi = b.impl_ptr(), oi = out.impl_ptr(),
                 na = a.needs_grad(), nb = b.needs_grad(), m, k, n] {
      if (oi->grad.empty()) return;
      const double* g = oi->grad.data();
      if (na) mm_nt(ai->grad_buf(), g, bi->data.data(), m, n, k);  // g . b^T
      if (nb) mm_tn(bi->grad_buf(), ai->data.data(), g, m, k, n);  // a^T . g
    });
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw ShapeError("matmul_nt expects 2-D operands");
  if (a.dim(1) != b.dim(1))
    throw ShapeError("matmul_nt: shared dimension disagrees " + shape_str(a.shape()) +
                     " . " + shape_str(b.shape()) + "^T");
  const int64_t m = a.dim(0), n = a.dim(1), p = b.dim(0);
  Tensor out = Tensor::zeros({m, p});
  mm_nt(out.data(), a.data(), b.data(), m, n, p);
  check_finite(out, "matmul_nt");
  if (should_record({&a, &b})) {
    record(out, [ai = a.impl_ptr(), bi = b.impl_ptr(), oi = out.impl_ptr(),
                 na = a.needs_grad(), nb = b.needs_grad(), m, n, p] {
      if (oi->grad.empty()) return;
      const double* g = oi->grad.data();
      if (na) mm_nn(ai->grad_buf(), g, bi->data.data(), m, p, n);  // g . b
      if (nb) mm_tn(bi->grad_buf(), g, ai->data.data(), m, p, n);  // g^T . a
    });
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose expects a 2-D tensor");
  const int64_t m = a.dim(0), n = a.dim(1);
  Tensor out = Tensor::zeros({n, m});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out.data()[j * m + i] = a.data()[i * n + j];
  if (should_record({&a})) {
    record(out, [ai = a.impl_ptr(), oi = out.impl_ptr(), m, n] {
      if (oi->grad.empty()) return;
      const double* g = oi->grad.data();
      double* ga = ai->grad_buf();
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
    });
  }
  return out;
}

Tensor slice_cols(const Tensor& a, int64_t c0, int64_t c1) {
  if (a.rank() != 2) throw ShapeError("slice_cols expects a 2-D tensor");
  if (c0 < 0 || c1 > a.dim(1) || c0 >= c1)
    throw ShapeError("slice_cols: bad column range");
  const int64_t rows = a.dim(0), cols = a.dim(1), w = c1 - c0;
  Tensor out = Tensor::zeros({rows, w});
  for (int64_t r = 0; r < rows; ++r)
    std::memcpy(out.data() + r * w, a.data() + r * cols + c0, size_t(w) * sizeof(double));
  if (should_record({&a})) {
    record(out, [ai = a.impl_ptr(), oi = out.impl_ptr(), rows, cols, c0, w] {
      if (oi->grad.empty()) return;
      const double* g = oi->grad.data();
      double* ga = ai->grad_buf();
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < w; ++c) ga[r * cols + c0 + c] += g[r * w + c];
    });
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols on empty list");
  const int64_t rows = parts[0].dim(0);
  int64_t total = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.dim(0) != rows)
      throw ShapeError("concat_cols: row counts disagree");
    total += p.dim(1);
  }
  Tensor out = Tensor::zeros({rows, total});
  int64_t off = 0;
  for (const Tensor& p : parts) {
    const int64_t w = p.dim(1);
    for (int64_t r = 0; r < rows; ++r)
      std::memcpy(out.data() + r * total + off, p.data() + r * w, size_t(w) * sizeof(double));
    off += w;
  }
  bool rec = false;
  for (const Tensor& p : parts)
    if (p.needs_grad()) rec = true;
  if (Tape::active() && rec) {
    std::vector<Impl> impls;
    std::vector<int64_t> widths, offsets;
    std::vector<bool> needs;
    int64_t o = 0;
    for (const Tensor& p : parts) {
      impls.push_back(p.impl_ptr());
      widths.push_back(p.dim(1));
      offsets.push_back(o);
      needs.push_back(p.needs_grad());
      o += p.dim(1);
    }
    record(out, [impls, widths, offsets, needs, oi = out.impl_ptr(), rows, total] {
      if (oi->grad.empty()) return;
      const double* g = oi->grad.data();
      for (size_t k = 0; k < impls.size(); ++k) {
        if (!needs[k]) continue;
        double* gp = impls[k]->grad_buf();
        const int64_t w = widths[k], off2 = offsets[k];
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t c = 0; c < w; ++c) gp[r * w + c] += g[r * total + off2 + c];
      }
    });
  }
  return out;
}

Tensor softmax_rows(const Tensor& x, const std::vector<uint8_t>* mask) {
  if (x.rank() < 1) throw ShapeError("softmax_rows expects rank >= 1");
  const int64_t n = x.dim(size_t(x.rank() - 1));
  const int64_t rows = x.numel() / n;
  if (mask && int64_t(mask->size()) != x.numel())
    throw ShapeError("softmax_rows: mask size mismatch");
  Tensor out = Tensor::zeros(x.shape());
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * n;
    const uint8_t* mr = mask ? mask->data() + r * n : nullptr;
    double mx = -std::numeric_limits<double>::infinity();
    for (int64_t j = 0; j < n; ++j)
      if (!mr || mr[j]) mx = std::max(mx, xr[j]);
    if (!std::isfinite(mx))
      throw ContractError("softmax_rows: fully masked row " + std::to_string(r));
    double* yr = out.data() + r * n;
    double z = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      yr[j] = (!mr || mr[j]) ? std::exp(xr[j] - mx) : 0.0;
      z += yr[j];
    }
    const double inv = 1.0 / z;
    for (int64_t j = 0; j < n; ++j) yr[j] *= inv;
  }
  check_finite(out, "softmax_rows");
  if (should_record({&x})) {
    record(out, [xi = x.impl_ptr(), oi = out.impl_ptr(), rows, n] {
      if (oi->grad.empty()) return;
      const double* g = oi->grad.data();
      const double* y = oi->data.data();
      double* gx = xi->grad_buf();
      for (int64_t r = 0; r < rows; ++r) {
        const double* gr = g + r * n;
        const double* yr = y + r * n;
        double dot = 0.0;
        for (int64_t j = 0; j < n; ++j) dot += gr[j] * yr[j];
        double* gxr = gx + r * n;
        for (int64_t j = 0; j < n; ++j) gxr[j] += (gr[j] - dot) * yr[j];
      }
    });
  }
  return out;
}

Tensor rms_norm(const Tensor& x, const Tensor& sc, double delta) {
  if (sc.rank() != 1) throw ShapeError("rms_norm: scale must be 1-D");
  const int64_t d = sc.dim(0);
  if (d <= 0 || x.rank() < 1 || x.dim(size_t(x.rank() - 1)) != d)
    throw ShapeError("rms_norm: trailing dim of x must equal scale length");
  const int64_t rows = x.numel() / d;
  Tensor out = Tensor::zeros(x.shape());
  std::vector<double> inv_rms(static_cast<size_t>(rows));
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * d;
    double ss = 0.0;
    for (int64_t j = 0; j < d; ++j) ss += xr[j] * xr[j];
    const double inv = 1.0 / std::sqrt(ss / double(d) + delta);
    inv_rms[size_t(r)] = inv;
    double* yr = out.data() + r * d;
    for (int64_t j = 0; j < d; ++j) yr[j] = xr[j] * inv * sc.data()[j];
  }
  check_finite(out, "rms_norm");
  if (should_record({&x, &sc})) {
    record(out, [xi = x.impl_ptr(), si = sc.impl_ptr(), oi = out.impl_ptr(),
                 nx = x.needs_grad(), ns = sc.needs_grad(), inv_rms, rows, d] {
      if (oi->grad.empty()) return;
      const double* g = oi->grad.data();
      for (int64_t r = 0; r < rows; ++r) {
        const double* xr = xi->data.data() + r * d;
        const double* gr = g + r * d;
        const double inv = inv_rms[size_t(r)];
        if (ns) {
          double* gs = si->grad_buf();
          for (int64_t j = 0; j < d; ++j) gs[j] += gr[j] * xr[j] * inv;
        }
        if (nx) {
          double* gx = xi->grad_buf() + r * d;
          double c = 0.0;
          for (int64_t j = 0; j < d; ++j) c += gr[j] * si->data[j] * xr[j];
          const double k = c * inv * inv * inv / double(d);
          for (int64_t j = 0; j < d; ++j) gx[j] += gr[j] * si->data[j] * inv - xr[j] * k;
        }
      }
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (int64_t i = 0; i < x.numel(); ++i) acc += x.data()[i];
  Tensor out = Tensor::scalar(acc);
  check_finite(out, "sum");
  if (should_record({&x})) {
    record(out, [xi = x.impl_ptr(), oi = out.impl_ptr()] {
      if (oi->grad.empty()) return;
      const double g = oi->grad[0];
      double* gx = xi->grad_buf();
      for (size_t i = 0; i < xi->data.size(); ++i) gx[i] += g;
    });
  }
  return out;
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ContractError("mean of empty tensor");
  return scale(sum(x), 1.0 / double(x.numel()));
}

Tensor embedding_rows(const Tensor& table, const TokenSeq& ids) {
  if (table.rank() != 2) throw ShapeError("embedding_rows: table must be 2-D");
  const int64_t v = table.dim(0), d = table.dim(1);
  const int64_t t = int64_t(ids.size());
  Tensor out = Tensor::zeros({t, d});
  for (int64_t r = 0; r < t; ++r) {
    const Token id = ids[size_t(r)];
    if (id < 0 || int64_t(id) >= v)
      throw ContractError("embedding_rows: token id " + std::to_string(id) +
                          " outside vocab of size " + std::to_string(v));
    std::memcpy(out.data() + r * d, table.data() + int64_t(id) * d, size_t(d) * sizeof(double));
  }
  if (should_record({&table})) {
    record(out, [ti = table.impl_ptr(), oi = out.impl_ptr(), ids, d, t] {
      if (oi->grad.empty()) return;
      const double* g = oi->grad.data();
      double* gt = ti->grad_buf();
      for (int64_t r = 0; r < t; ++r) {
        double* row = gt + int64_t(ids[size_t(r)]) * d;
        for (int64_t j = 0; j < d; ++j) row[j] += g[r * d + j];
      }
    });
  }
  return out;
}

Tensor apply_rope(const Tensor& x, const std::vector<int64_t>& positions,
                  int64_t head_dim, double base) {
  if (head_dim <= 0 || head_dim % 2 != 0)
    throw ConfigError("apply_rope: head_dim must be positive and even");
  if (x.rank() != 2 || x.dim(1) % head_dim != 0)
    throw ShapeError("apply_rope: columns must be a multiple of head_dim");
  const int64_t rows = x.dim(0), cols = x.dim(1);
  if (int64_t(positions.size()) != rows)
    throw ShapeError("apply_rope: one position per row required");
  const int64_t heads = cols / head_dim, half = head_dim / 2;
  std::vector<double> theta(static_cast<size_t>(half));
  for (int64_t i = 0; i < half; ++i)
    theta[size_t(i)] = std::pow(base, -2.0 * double(i) / double(head_dim));
  Tensor out = Tensor::zeros(x.shape());
  for (int64_t r = 0; r < rows; ++r) {
    const double pos = double(positions[size_t(r)]);
    for (int64_t h = 0; h < heads; ++h) {
      const double* src = x.data() + r * cols + h * head_dim;
      double* dst = out.data() + r * cols + h * head_dim;
      for (int64_t i = 0; i < half; ++i) {
        const double ang = pos * theta[size_t(i)];
        const double c = std::cos(ang), s = std::sin(ang);
        const double x0 = src[2 * i], x1 = src[2 * i + 1];
        dst[2 * i] = x0 * c - x1 * s;
        dst[2 * i + 1] = x0 * s + x1 * c;
      }
    }
  }
  check_finite(out, "apply_rope");
  if (should_record({&x})) {
    record(out, [xi = x.impl_ptr(), oi = out.impl_ptr(), positions, theta,
                 rows, cols, heads, head_dim, half] {
      if (oi->grad.empty()) return;
      const double* g = oi->grad.data();
      double* gx = xi->grad_buf();
      // rotation is orthogonal: d/dx = rotation by the opposite angle
      for (int64_t r = 0; r < rows; ++r) {
        const double pos = double(positions[size_t(r)]);
        for (int64_t h = 0; h < heads; ++h) {
          const double* gr = g + r * cols + h * head_dim;
          double* gxr = gx + r * cols + h * head_dim;
          for (int64_t i = 0; i < half; ++i) {
            const double ang = pos * theta[size_t(i)];
            const double c = std::cos(ang), s = std::sin(ang);
            const double g0 = gr[2 * i], g1 = gr[2 * i + 1];
            gxr[2 * i] += g0 * c + g1 * s;
            gxr[2 * i + 1] += -g0 * s + g1 * c;
          }
        }
      }
    });
  }
  return out;
}

Tensor hard_gate_ste(const Tensor& soft, double tau) {
  Tensor out = Tensor::zeros(soft.shape());
  const int64_t n = soft.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = soft.data()[i] > tau ? 1.0 : 0.0;
  if (should_record({&soft})) {
    record(out, [si = soft.impl_ptr(), oi = out.impl_ptr(), n] {
      if (oi->grad.empty()) return;
      const double* g = oi->grad.data();
      double* gs = si->grad_buf();
      for (int64_t i = 0; i < n; ++i) gs[i] += g[i];
    });
  }
  return out;
}

Tensor row_select_mix(const Tensor& gate, const Tensor& o_full, const Tensor& o_swa) {
  require_same_shape(o_full, o_swa, "row_select_mix");
  if (o_full.rank() != 2) throw ShapeError("row_select_mix: branch outputs must be 2-D");
  const int64_t t = o_full.dim(0), d = o_full.dim(1);
  if (gate.numel() != t)
    throw ShapeError("row_select_mix: gate must hold one value per row");
  for (int64_t i = 0; i < t; ++i) {
    const double gv = gate.data()[i];
    if (gv != 0.0 && gv != 1.0)
      throw ContractError("row_select_mix: gate values must be exactly 0 or 1");
  }
  Tensor out = Tensor::zeros(o_full.shape());
  for (int64_t r = 0; r < t; ++r) {
    const double* src = (gate.data()[r] == 1.0 ? o_full.data() : o_swa.data()) + r * d;
    std::memcpy(out.data() + r * d, src, size_t(d) * sizeof(double));
  }
  if (should_record({&gate, &o_full, &o_swa})) {
    record(out, [gi = gate.impl_ptr(), fi = o_full.impl_ptr(), si = o_swa.impl_ptr(),
                 oi = out.impl_ptr(), ng = gate.needs_grad(), nf = o_full.needs_grad(),
                 ns = o_swa.needs_grad(), t, d] {
      if (oi->grad.empty()) return;
      const double* g = oi->grad.data();
      for (int64_t r = 0; r < t; ++r) {
        const bool full_sel = gi->data[size_t(r)] == 1.0;
        const double* gr = g + r * d;
        if (ng) {
          double acc = 0.0;
          for (int64_t j = 0; j < d; ++j)
            acc += gr[j] * (fi->data[size_t(r * d + j)] - si->data[size_t(r * d + j)]);
          gi->grad_buf()[r] += acc;
        }
        if (full_sel && nf) {
          double* gf = fi->grad_buf() + r * d;
          for (int64_t j = 0; j < d; ++j) gf[j] += gr[j];
        }
        if (!full_sel && ns) {
          double* gs = si->grad_buf() + r * d;
          for (int64_t j = 0; j < d; ++j) gs[j] += gr[j];
        }
      }
    });
  }
  return out;
}

LmLossResult lm_loss(const Tensor& logits, const TokenSeq& tokens) {
  if (logits.rank() != 2) throw ShapeError("lm_loss: logits must be [T x V]");
  const int64_t t = logits.dim(0), v = logits.dim(1);
  if (int64_t(tokens.size()) != t)
    throw ShapeError("lm_loss: one token per logit row required");
  if (t < 2) throw ContractError("lm_loss: need at least 2 tokens for next-token pairs");
  for (Token id : tokens)
    if (id < 0 || int64_t(id) >= v)
      throw ContractError("lm_loss: target id " + std::to_string(id) +
                          " outside vocab of size " + std::to_string(v));

  const int64_t valid = t - 1;
  std::vector<double> probs(size_t(t * v));
  std::vector<double> nll(size_t(t), 0.0);
  double total = 0.0;
  for (int64_t r = 0; r < valid; ++r) {
    const double* lr = logits.data() + r * v;
    double mx = lr[0];
    for (int64_t j = 1; j < v; ++j) mx = std::max(mx, lr[j]);
    double z = 0.0;
    double* pr = probs.data() + r * v;
    for (int64_t j = 0; j < v; ++j) {
      pr[j] = std::exp(lr[j] - mx);
      z += pr[j];
    }
    const double inv = 1.0 / z;
    for (int64_t j = 0; j < v; ++j) pr[j] *= inv;
    const Token target = tokens[size_t(r + 1)];
    const double n = std::log(z) + mx - lr[target];
    nll[size_t(r)] = n;
    total += n;
  }
  const double mean_nll = total / double(valid);
  nll[size_t(t - 1)] = mean_nll;  // the last position predicts nothing

  Tensor loss = Tensor::scalar(mean_nll);
  check_finite(loss, "lm_loss");
  if (should_record({&logits})) {
    record(loss, [li = logits.impl_ptr(), oi = loss.impl_ptr(),
                  probs = std::move(probs), tokens, t, v, valid] {
      if (oi->grad.empty()) return;
      const double g = oi->grad[0] / double(valid);
      double* gl = li->grad_buf();
      for (int64_t r = 0; r < valid; ++r) {
        const double* pr = probs.data() + r * v;
        double* glr = gl + r * v;
        for (int64_t j = 0; j < v; ++j) glr[j] += g * pr[j];
        glr[tokens[size_t(r + 1)]] -= g;
      }
    });
  }
  return {loss, nll};
}

}  // namespace ops
}  // namespace swiattn
