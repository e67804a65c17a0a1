#pragma once

#include <string>
#include <utility>
#include <vector>

#include "swiattn/attention.hpp"
#include "swiattn/objective.hpp"
#include "swiattn/routing.hpp"

namespace swiattn {

enum class AttentionMode { swiattn, full_only, swa_only, static_hybrid };
enum class BranchKind { full, swa };

std::string to_string(AttentionMode mode);
AttentionMode attention_mode_from_string(const std::string& s);

struct ModelConfig {
  int64_t vocab_size = 256;
  int64_t d_model = 128;
  int64_t n_layers = 4;
  AttentionConfig attention;  // attention.d_model must match d_model
  int64_t ffn_hidden = 256;
  AttentionMode mode = AttentionMode::swiattn;
  std::vector<BranchKind> static_pattern;  // only used by static_hybrid
  RouterConfig router;
  RegularizerConfig regularizer;
  int64_t max_seq_len = 256;

  void validate() const;
  int64_t param_count() const;

  // One full attention layer after every three SWA layers.
  static std::vector<BranchKind> default_pattern(int64_t n_layers);
};

struct LayerParams {
  Tensor attn_norm;  // [d]
  QKVProjection proj;
  Router router;
  Tensor ffn_norm;  // [d]
  Tensor w_gate;    // [d x f]
  Tensor w_up;      // [d x f]
  Tensor w_down;    // [f x d]
};

// Per-layer forward trace: everything the training objective and the routing
// telemetry need. Branch outputs are post-output-projection [T x d_model]
// rows, the same rows Eq-style mixing selects between.
struct LayerTrace {
  Tensor router_logits;  // [T x 1]; undefined when the router is bypassed
  Tensor soft;           // [T x 1]; undefined when the router is bypassed
  Tensor hard;           // [T x 1]; constants in bypass modes
  Tensor out_full;       // [T x d_model]; undefined if the branch was skipped
  Tensor out_swa;        // [T x d_model]
  Tensor keys;           // [T x kv_width], post-rotary (cache rows)
  Tensor values;         // [T x kv_width]
};

struct ForwardResult {
  Tensor logits;  // [T x vocab]
  std::vector<LayerTrace> layers;

  std::vector<GateRecord> gate_records() const;
};

// Gated two-projection MLP: down(silu(gate(x)) * up(x)).
Tensor ffn(const Tensor& x, const Tensor& w_gate, const Tensor& w_up, const Tensor& w_down);

class SwiAttnModel {
 public:
  SwiAttnModel() = default;

  static SwiAttnModel init(const ModelConfig& cfg, Rng& rng);

  const ModelConfig& config() const { return cfg_; }
  ModelConfig& mutable_config() { return cfg_; }

  Tensor& embedding() { return embedding_; }
  const Tensor& embedding() const { return embedding_; }
  std::vector<LayerParams>& layers() { return layers_; }
  const std::vector<LayerParams>& layers() const { return layers_; }
  Tensor& final_norm() { return final_norm_; }
  const Tensor& final_norm() const { return final_norm_; }

  int64_t step = 0;  // training steps applied so far; persisted

  // Pre-norm residual pipeline per layer:
  //   h -> rms_norm -> router gates and shared QKV -> both branches ->
  //   row selection -> residual add -> rms_norm -> FFN -> residual add,
  // then a final norm and the tied LM head. In full_only / swa_only /
  // static_hybrid modes the router is bypassed and gates are constants, and
  // only the needed branch is computed.
  ForwardResult forward_train(const TokenSeq& tokens) const;

  // True when layer l computes the full / SWA branch under the current mode.
  bool computes_full(int64_t layer) const;
  bool computes_swa(int64_t layer) const;

  // Parameter manifest in a fixed order. Router parameters are part of the
  // manifest only in swiattn mode (bypass modes have no live router).
  std::vector<std::pair<std::string, Tensor>> named_parameters();
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;

  void set_requires_grad(bool flag);
  void zero_grad();

 private:
  ModelConfig cfg_;
  Tensor embedding_;  // [V x d]; also the LM head (tied)
  std::vector<LayerParams> layers_;
  Tensor final_norm_;  // [d]
};

}  // namespace swiattn
