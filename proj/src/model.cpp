#include "swiattn/model.hpp"

#include <cmath>

namespace swiattn {

namespace op = ops;

std::string to_string(AttentionMode mode) {
  switch (mode) {
    case AttentionMode::swiattn: return "swiattn";
    case AttentionMode::full_only: return "full_only";
    case AttentionMode::swa_only: return "swa_only";
    case AttentionMode::static_hybrid: return "static_hybrid";
  }
  throw ConfigError("unknown attention mode");
}

AttentionMode attention_mode_from_string(const std::string& s) {
  if (s == "swiattn") return AttentionMode::swiattn;
  if (s == "full_only") return AttentionMode::full_only;
  if (s == "swa_only") return AttentionMode::swa_only;
  if (s == "static_hybrid") return AttentionMode::static_hybrid;
  throw ConfigError("unknown attention mode '" + s + "'");
}

std::vector<BranchKind> ModelConfig::default_pattern(int64_t n_layers) {
  std::vector<BranchKind> p(static_cast<size_t>(n_layers), BranchKind::swa);
  for (int64_t l = 3; l < n_layers; l += 4) p[size_t(l)] = BranchKind::full;
  return p;
}

void ModelConfig::validate() const {
  if (vocab_size < 2) throw ConfigError("model: vocab_size must be >= 2");
  if (n_layers < 1) throw ConfigError("model: n_layers must be >= 1");
  if (d_model < 1 || ffn_hidden < 1) throw ConfigError("model: dimensions must be positive");
  if (attention.d_model != d_model)
    throw ConfigError("model: attention.d_model must equal d_model");
  attention.validate();
  regularizer.validate();
  if (max_seq_len < 2) throw ConfigError("model: max_seq_len must be >= 2");
  if (mode == AttentionMode::static_hybrid &&
      int64_t(static_pattern.size()) != n_layers)
    throw ConfigError("model: static_pattern length must equal n_layers");
}

int64_t ModelConfig::param_count() const {
  const int64_t d = d_model, f = ffn_hidden;
  const int64_t qw = attention.q_width(), kvw = attention.kv_width();
  int64_t per_layer = d            // attn_norm
                      + d * qw     // wq
                      + 2 * d * kvw  // wk, wv
                      + qw * d     // wo
                      + d          // ffn_norm
                      + 2 * d * f  // w_gate, w_up
                      + f * d;     // w_down
  if (mode == AttentionMode::swiattn) per_layer += d + 1;  // router
  return vocab_size * d + n_layers * per_layer + d;        // embed + layers + final norm
}

Tensor ffn(const Tensor& x, const Tensor& w_gate, const Tensor& w_up, const Tensor& w_down) {
  Tensor g = op::silu(op::matmul(x, w_gate));
  Tensor u = op::matmul(x, w_up);
  return op::matmul(op::mul(g, u), w_down);
}

SwiAttnModel SwiAttnModel::init(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  SwiAttnModel m;
  m.cfg_ = cfg;
  if (m.cfg_.mode == AttentionMode::static_hybrid && m.cfg_.static_pattern.empty())
    m.cfg_.static_pattern = ModelConfig::default_pattern(cfg.n_layers);

  const double stddev = 0.02;
  // residual-feeding projections scaled down with depth, GPT-style
  const double res_stddev = stddev / std::sqrt(2.0 * double(cfg.n_layers));

  auto randn = [&](Shape shape, double sd) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.vec()) v = rng.normal(0.0, sd);
    return t;
  };

  m.embedding_ = randn({cfg.vocab_size, cfg.d_model}, stddev);
  m.layers_.resize(size_t(cfg.n_layers));
  for (auto& layer : m.layers_) {
    layer.attn_norm = Tensor::full({cfg.d_model}, 1.0);
    layer.proj.wq = randn({cfg.d_model, cfg.attention.q_width()}, stddev);
    layer.proj.wk = randn({cfg.d_model, cfg.attention.kv_width()}, stddev);
    layer.proj.wv = randn({cfg.d_model, cfg.attention.kv_width()}, stddev);
    layer.proj.wo = randn({cfg.attention.q_width(), cfg.d_model}, res_stddev);
    layer.router = Router::init(cfg.d_model, cfg.router.bias_init);
    layer.ffn_norm = Tensor::full({cfg.d_model}, 1.0);
    layer.w_gate = randn({cfg.d_model, cfg.ffn_hidden}, stddev);
    layer.w_up = randn({cfg.d_model, cfg.ffn_hidden}, stddev);
    layer.w_down = randn({cfg.ffn_hidden, cfg.d_model}, res_stddev);
  }
  m.final_norm_ = Tensor::full({cfg.d_model}, 1.0);
  return m;
}

bool SwiAttnModel::computes_full(int64_t layer) const {
  switch (cfg_.mode) {
    case AttentionMode::swiattn:
    case AttentionMode::full_only: return true;
    case AttentionMode::swa_only: return false;
    case AttentionMode::static_hybrid:
      return cfg_.static_pattern.at(size_t(layer)) == BranchKind::full;
  }
  return true;
}

bool SwiAttnModel::computes_swa(int64_t layer) const {
  switch (cfg_.mode) {
    case AttentionMode::swiattn:
    case AttentionMode::swa_only: return true;
    case AttentionMode::full_only: return false;
    case AttentionMode::static_hybrid:
      return cfg_.static_pattern.at(size_t(layer)) == BranchKind::swa;
  }
  return true;
}

ForwardResult SwiAttnModel::forward_train(const TokenSeq& tokens) const {
  const int64_t t = int64_t(tokens.size());
  if (t < 1) throw ContractError("forward: empty token sequence");
  if (t > cfg_.max_seq_len)
    throw ContractError("forward: sequence of length " + std::to_string(t) +
                        " exceeds max_seq_len " + std::to_string(cfg_.max_seq_len));

  std::vector<int64_t> positions(static_cast<size_t>(t));
  for (int64_t i = 0; i < t; ++i) positions[size_t(i)] = i;

  ForwardResult result;
  result.layers.resize(layers_.size());

  Tensor h = op::embedding_rows(embedding_, tokens);
  for (size_t l = 0; l < layers_.size(); ++l) {
    const LayerParams& lp = layers_[l];
    LayerTrace& trace = result.layers[l];

    Tensor x = op::rms_norm(h, lp.attn_norm);

    const bool need_full = computes_full(int64_t(l));
    const bool need_swa = computes_swa(int64_t(l));

    if (cfg_.mode == AttentionMode::swiattn) {
      trace.router_logits = router_logits(x, lp.router);
      trace.soft = op::sigmoid(trace.router_logits);
      trace.hard = hard_gate(trace.soft, cfg_.router.tau);
    } else {
      trace.hard = Tensor::full({t, 1}, need_full ? 1.0 : 0.0);
    }

    QKV qkv = project_qkv(x, lp.proj, cfg_.attention);
    qkv.q = op::apply_rope(qkv.q, positions, cfg_.attention.head_dim);
    qkv.k = op::apply_rope(qkv.k, positions, cfg_.attention.head_dim);
    trace.keys = qkv.k;
    trace.values = qkv.v;

    if (need_full) trace.out_full = full_attention(qkv, positions, lp.proj, cfg_.attention);
    if (need_swa) trace.out_swa = sliding_window_attention(qkv, positions, lp.proj, cfg_.attention);

    Tensor attn_out;
    if (cfg_.mode == AttentionMode::swiattn) {
      attn_out = mix_outputs(trace.hard, trace.out_full, trace.out_swa);
    } else {
      attn_out = need_full ? trace.out_full : trace.out_swa;
    }

    h = op::add(h, attn_out);
    Tensor y = op::rms_norm(h, lp.ffn_norm);
    h = op::add(h, ffn(y, lp.w_gate, lp.w_up, lp.w_down));
  }

  Tensor xf = op::rms_norm(h, final_norm_);
  result.logits = op::matmul_nt(xf, embedding_);
  return result;
}

std::vector<GateRecord> ForwardResult::gate_records() const {
  std::vector<GateRecord> records;
  for (size_t l = 0; l < layers.size(); ++l) {
    const LayerTrace& trace = layers[l];
    const int64_t t = trace.hard.dim(0);
    for (int64_t i = 0; i < t; ++i) {
      GateRecord gr;
      gr.layer = int32_t(l);
      gr.token_index = i;
      gr.hard_gate = trace.hard.at(i, 0);
      gr.logit = trace.router_logits.defined() ? trace.router_logits.at(i, 0) : 0.0;
      gr.soft_gate = trace.soft.defined() ? trace.soft.at(i, 0)
                                          : gr.hard_gate;  // bypass modes
      records.push_back(gr);
    }
  }
  return records;
}

std::vector<std::pair<std::string, Tensor>> SwiAttnModel::named_parameters() {
  std::vector<std::pair<std::string, Tensor>> params;
  params.emplace_back("embedding", embedding_);
  const bool with_router = cfg_.mode == AttentionMode::swiattn;
  for (size_t l = 0; l < layers_.size(); ++l) {
    const std::string p = "layer." + std::to_string(l) + ".";
    LayerParams& lp = layers_[l];
    params.emplace_back(p + "attn_norm", lp.attn_norm);
    params.emplace_back(p + "wq", lp.proj.wq);
    params.emplace_back(p + "wk", lp.proj.wk);
    params.emplace_back(p + "wv", lp.proj.wv);
    params.emplace_back(p + "wo", lp.proj.wo);
    if (with_router) {
      params.emplace_back(p + "router.weight", lp.router.weight);
      params.emplace_back(p + "router.bias", lp.router.bias);
    }
    params.emplace_back(p + "ffn_norm", lp.ffn_norm);
    params.emplace_back(p + "w_gate", lp.w_gate);
    params.emplace_back(p + "w_up", lp.w_up);
    params.emplace_back(p + "w_down", lp.w_down);
  }
  params.emplace_back("final_norm", final_norm_);
  return params;
}

std::vector<std::pair<std::string, Tensor>> SwiAttnModel::named_parameters() const {
  return const_cast<SwiAttnModel*>(this)->named_parameters();
}

void SwiAttnModel::set_requires_grad(bool flag) {
  for (auto& [name, tensor] : named_parameters()) tensor.set_requires_grad(flag);
}

void SwiAttnModel::zero_grad() {
  for (auto& [name, tensor] : named_parameters()) tensor.zero_grad();
}

}  // namespace swiattn
