#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "swiattn/data.hpp"
#include "swiattn/model.hpp"

namespace swiattn {

struct TrainConfig {
  int64_t total_steps = 1000;
  int64_t batch_size = 4;
  int64_t seq_len = 128;
  double peak_lr = 1e-3;
  int64_t warmup_steps = 100;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps_opt = 1e-8;
  double grad_clip = 1.0;
  uint64_t seed = 1234;

  void validate() const;
};

// Linear warmup from 0 to peak over warmup_steps, then cosine decay to 0 at
// total_steps. Steps outside [0, total_steps] are an error.
double lr_at(int64_t step, const TrainConfig& cfg);

// Adam with global-norm gradient clipping. Moment buffers are keyed by the
// parameter order handed in at construction.
class Adam {
 public:
  Adam(std::vector<std::pair<std::string, Tensor>> params, const TrainConfig& cfg);

  // Clips the accumulated gradients, applies one update with the given
  // learning rate and clears the gradients.
  void step(double lr);

  int64_t steps_applied() const { return t_; }

  // Moment buffers for optional checkpoint persistence.
  std::vector<std::pair<std::string, Tensor>> state() const;

 private:
  std::vector<std::pair<std::string, Tensor>> params_;
  std::vector<Tensor> m_, v_;
  double beta1_, beta2_, eps_, clip_;
  int64_t t_ = 0;
};

struct StepStats {
  int64_t step = 0;
  double lm_loss = 0.0;
  double reg_mean = 0.0;   // mean regularizer term over layer-token pairs
  double lr = 0.0;
  double overall_full_ratio = 0.0;
  std::vector<double> layer_full_ratio;
  double gamma_max = 0.0;  // largest adaptive weight seen this step
};

using StepCallback = std::function<void(const StepStats&)>;

// Forward + Eq-style training loss for one sequence. Returns the scalar loss
// tensor (on the active tape) plus the detached telemetry pieces.
struct SequenceLoss {
  Tensor loss;
  double lm = 0.0;
  double reg_sum = 0.0;   // sum of all per-(layer, token) regularizer values
  int64_t reg_count = 0;
  double gamma_max = 0.0;
  std::vector<int64_t> layer_full_counts;  // hard-gate ones per layer
  int64_t tokens = 0;
};
SequenceLoss sequence_loss(const SwiAttnModel& model, const TokenSeq& tokens);

// Runs total_steps optimizer steps over freshly sampled batches. The model's
// mode decides the objective: swiattn trains with the regularized loss,
// every other mode with the plain language-modeling loss. Telemetry rows are
// produced once per step. Divergence (non-finite loss) aborts with a
// diagnostic naming the step.
std::vector<StepStats> train(SwiAttnModel& model, const TrainConfig& tcfg,
                             const DataConfig& dcfg, const StepCallback& on_step = {});

// Mean NLL of the model over n_batches freshly sampled eval sequences.
double evaluate_lm(const SwiAttnModel& model, const DataConfig& dcfg, int64_t seq_len,
                   int64_t n_sequences, uint64_t seed);

}  // namespace swiattn
