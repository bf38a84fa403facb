#pragma once

#include <span>
#include <vector>

#include "bglm/behavior_labels.hpp"
#include "bglm/data.hpp"
#include "bglm/lstm.hpp"
#include "bglm/param_store.hpp"
#include "bglm/rng.hpp"

namespace bglm {

struct BehaviorDims {
  std::size_t vocab = 0;
  std::size_t embed = 50;
  std::size_t hidden = 50;
};

/// Result of running the classifier over one sequence.
struct BehaviorForward {
  BehaviorLabels posteriors{};  // sigmoid(head(h_T)), one independent value per behavior
  Matrix hidden_trajectory;     // [T×H], row t = h_t
};

/// Multi-label behavior classifier: embedding, one LSTM layer, and a linear
/// head on the final hidden state. Parameters live under the `beh.` prefix
/// so the gated LM can copy them by name.
class BehaviorNet {
 public:
  explicit BehaviorNet(const BehaviorDims& dims);  // zero-filled parameters
  explicit BehaviorNet(ParamStore store);          // dims inferred from shapes

  BehaviorNet(BehaviorNet&&) noexcept = default;
  BehaviorNet& operator=(BehaviorNet&&) noexcept = default;
  BehaviorNet(const BehaviorNet&) = delete;
  BehaviorNet& operator=(const BehaviorNet&) = delete;
  BehaviorNet clone() const { return BehaviorNet(store_); }

  const BehaviorDims& dims() const { return dims_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  Embedding embedding() const { return emb_; }
  LstmParams cell() const { return cell_; }
  const Param& head_w() const { return *head_w_; }
  const Param& head_b() const { return *head_b_; }

  /// Uniform(−range, range) on every entry, then forget-gate bias set to +1.
  void init_uniform(Rng& rng, double range);

  BehaviorForward forward(std::span<const Id> seq) const;

 private:
  void bind();

  BehaviorDims dims_;
  ParamStore store_;
  Embedding emb_;
  LstmParams cell_;
  Param* head_w_ = nullptr;
  Param* head_b_ = nullptr;
};

struct BehaviorTrainConfig {
  std::size_t epochs = 15;
  std::size_t batch_size = 20;
  double lr = 1.0;
  double lr_decay = 1.0;
  std::size_t decay_start_epoch = 0;
  double clip_norm = 5.0;
  double init_range = 0.1;
  std::uint64_t seed = 1;

  void validate() const;
};

struct BehaviorEval {
  double bce = 0.0;
  double macro_f1 = 0.0;
  std::array<double, kNumBehaviors> per_behavior_f1{};
};

struct BehaviorEpoch {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_bce = 0.0;
  double valid_bce = 0.0;
  double valid_macro_f1 = 0.0;
  double wall_seconds = 0.0;
};

struct BehaviorTrainResult {
  BehaviorNet best;
  std::vector<BehaviorEpoch> history;
  std::size_t best_epoch = 0;  // 0 = initialization
};

/// F1 per behavior with posterior > 0.5 counted as positive (ties negative)
/// and F1 = 0 whenever precision + recall = 0.
std::array<double, kNumBehaviors> per_behavior_f1(std::span<const BehaviorLabels> posteriors,
                                                  std::span<const BehaviorLabels> labels);

BehaviorEval eval_behavior(const BehaviorNet& net, const Corpus& corpus);

/// Initializes `dims`-shaped parameters from cfg.seed and minimizes mean
/// BCE-with-logits with SGD. The returned net is the checkpoint with the
/// lowest validation BCE (training BCE when `valid` is empty).
BehaviorTrainResult train_behavior(const BehaviorDims& dims, const Corpus& train, const Corpus& valid,
                                   const BehaviorTrainConfig& cfg);

}  // namespace bglm
