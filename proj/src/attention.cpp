#include "swiattn/attention.hpp"

#include <cmath>

namespace swiattn {

namespace op = ops;

void AttentionConfig::validate() const {
  if (d_model <= 0 || n_heads <= 0 || n_kv_heads <= 0 || head_dim <= 0)
    throw ConfigError("attention: all dimensions must be positive");
  if (n_heads % n_kv_heads != 0)
    throw ConfigError("attention: n_heads must be a multiple of n_kv_heads");
  if (head_dim % 2 != 0)
    throw ConfigError("attention: head_dim must be even for rotary encoding");
  if (window < 1) throw ConfigError("attention: window must be >= 1");
}

QKVProjection QKVProjection::init(const AttentionConfig& cfg, Rng& rng, double stddev) {
  auto randn = [&](Shape shape) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.vec()) v = rng.normal(0.0, stddev);
    return t;
  };
  QKVProjection p;
  p.wq = randn({cfg.d_model, cfg.q_width()});
  p.wk = randn({cfg.d_model, cfg.kv_width()});
  p.wv = randn({cfg.d_model, cfg.kv_width()});
  p.wo = randn({cfg.q_width(), cfg.d_model});
  return p;
}

void QKVProjection::validate(const AttentionConfig& cfg) const {
  auto check = [&](const Tensor& w, int64_t r, int64_t c, const char* name) {
    if (!w.defined() || w.rank() != 2 || w.dim(0) != r || w.dim(1) != c)
      throw ConfigError(std::string("projection ") + name + " has wrong shape");
  };
  check(wq, cfg.d_model, cfg.q_width(), "wq");
  check(wk, cfg.d_model, cfg.kv_width(), "wk");
  check(wv, cfg.d_model, cfg.kv_width(), "wv");
  check(wo, cfg.q_width(), cfg.d_model, "wo");
}

QKV project_qkv(const Tensor& hidden, const QKVProjection& proj, const AttentionConfig& cfg) {
  if (hidden.rank() != 2 || hidden.dim(1) != cfg.d_model)
    throw ConfigError("project_qkv: hidden state width does not match d_model");
  if (hidden.dim(0) < 1) throw ContractError("project_qkv: empty sequence");
  proj.validate(cfg);
  return {op::matmul(hidden, proj.wq), op::matmul(hidden, proj.wk), op::matmul(hidden, proj.wv)};
}

namespace {

Tensor attend(const QKV& qkv, const std::vector<int64_t>& positions,
              const QKVProjection& proj, const AttentionConfig& cfg,
              std::optional<int64_t> window) {
  const int64_t t = qkv.q.dim(0);
  if (t < 1) throw ContractError("attention over an empty sequence");
  if (int64_t(positions.size()) != t)
    throw ShapeError("attention: one position per token required");
  if (qkv.q.dim(1) != cfg.q_width() || qkv.k.dim(1) != cfg.kv_width() ||
      qkv.v.dim(1) != cfg.kv_width())
    throw ConfigError("attention: head widths do not match config");

  // Causal (and optionally windowed) visibility by absolute position.
  std::vector<uint8_t> mask(size_t(t * t), 0);
  for (int64_t i = 0; i < t; ++i)
    for (int64_t j = 0; j < t; ++j) {
      const bool causal = positions[size_t(j)] <= positions[size_t(i)];
      const bool local = !window || positions[size_t(i)] - positions[size_t(j)] < *window;
      mask[size_t(i * t + j)] = (causal && local) ? 1 : 0;
    }

  const double inv_sqrt = 1.0 / std::sqrt(double(cfg.head_dim));
  std::vector<Tensor> heads;
  heads.reserve(size_t(cfg.n_heads));
  for (int64_t h = 0; h < cfg.n_heads; ++h) {
    const int64_t kvh = h / cfg.group_size();
    Tensor qh = op::slice_cols(qkv.q, h * cfg.head_dim, (h + 1) * cfg.head_dim);
    Tensor kh = op::slice_cols(qkv.k, kvh * cfg.head_dim, (kvh + 1) * cfg.head_dim);
    Tensor vh = op::slice_cols(qkv.v, kvh * cfg.head_dim, (kvh + 1) * cfg.head_dim);
    Tensor scores = op::scale(op::matmul_nt(qh, kh), inv_sqrt);
    Tensor probs = op::softmax_rows(scores, &mask);
    heads.push_back(op::matmul(probs, vh));
  }
  return op::matmul(op::concat_cols(heads), proj.wo);
}

}  // namespace

Tensor full_attention(const QKV& qkv, const std::vector<int64_t>& positions,
                      const QKVProjection& proj, const AttentionConfig& cfg) {
  return attend(qkv, positions, proj, cfg, std::nullopt);
}

Tensor sliding_window_attention(const QKV& qkv, const std::vector<int64_t>& positions,
                                const QKVProjection& proj, const AttentionConfig& cfg) {
  if (cfg.window < 1) throw ConfigError("sliding window requires W >= 1");
  return attend(qkv, positions, proj, cfg, cfg.window);
}

}  // namespace swiattn
