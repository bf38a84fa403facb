#pragma once

#include <span>
#include <string>
#include <vector>

#include "bglm/behavior.hpp"
#include "bglm/checksum.hpp"
#include "bglm/lstm.hpp"
#include "bglm/matrix.hpp"
#include "bglm/param_store.hpp"
#include "bglm/rng.hpp"

namespace bglm {

/// What the frozen behavior branch hands to the gating RNN at each step:
/// its 50-dim hidden state, or the five sigmoid posteriors of its head.
enum class GateSource { Hidden, Posterior };

struct LmDims {
  std::size_t vocab = 0;
  std::size_t embed = 32;
  std::size_t hidden = 64;
  std::size_t layers = 1;
  std::size_t gate_hidden = 50;
};

struct GatedLmSpec {
  LmDims dims;
  bool behavior_branch = false;  // beh.* and gate.* parameters present
  GateSource mode = GateSource::Hidden;
  bool gating_enabled = false;
  // Input token after which the frozen behavior state restarts from zero,
  // so each sequence is encoded the way the classifier saw it in training.
  Id behavior_reset_id = 1;
};

// Recurrent state carried across truncated-BPTT windows (never differentiated).
struct CarryState {
  std::vector<LstmState> lm;  // one per LM layer
  LstmState behavior;         // frozen behavior LSTM
  LstmState gate;             // gating RNN
};

struct StepOutput {
  Matrix logits;       // [B×V]
  Matrix gate_values;  // [B×H]; all ones when gating is disabled
};

struct StepCache {
  std::vector<Id> ids;
  std::vector<Matrix> layer_masks;  // dropout mask on the input of each LM layer
  std::vector<LstmCache> layers;
  Matrix top_mask;                  // dropout mask on the top hidden state
  Matrix top;                       // top hidden state after dropout
  Matrix gate_input;                // b_t
  LstmCache gate_rnn;
  Matrix gate_hidden;               // q_t
  Matrix gate;                      // g_t
  Matrix head_input;                // top ⊙ g_t (or top)
};

struct WindowCache {
  std::vector<StepCache> steps;
  bool training = false;
  double dropout_p = 0.0;
  bool gated = false;
};

struct WindowOutput {
  std::vector<StepOutput> steps;
  CarryState carry;
  WindowCache cache;
};

/// LSTM language model whose top hidden state is multiplied elementwise by
/// a sigmoid gate before the softmax head:
///
///   b_t  = frozen behavior LSTM over the same tokens (hidden or posterior)
///   q_t  = gate LSTM step over b_t
///   g_t  = σ(W_g q_t + b_g)
///   h'_t = h_t ⊙ g_t,   logits_t = W_o h'_t + b_o
///
/// With gating disabled the behavior branch is never evaluated and the model
/// is the plain stacked-LSTM LM.
class GatedLm {
 public:
  GatedLm(const GatedLmSpec& spec, ParamStore store);

  /// Baseline LM with zero-filled parameters and no behavior branch.
  static GatedLm baseline(const LmDims& dims);
  /// Copies the classifier's embedding, LSTM and head as frozen entries and
  /// adds a trainable gating RNN and projection. Throws LoadError unless the
  /// classifier width equals `expected_behavior_hidden` and its vocabulary
  /// size equals dims.vocab.
  static GatedLm with_behavior(const LmDims& dims, const BehaviorNet& behavior, GateSource mode,
                               std::size_t expected_behavior_hidden = 50);

  GatedLm(GatedLm&&) noexcept = default;
  GatedLm& operator=(GatedLm&&) noexcept = default;
  GatedLm(const GatedLm&) = delete;
  GatedLm& operator=(const GatedLm&) = delete;
  GatedLm clone() const { return GatedLm(spec_, store_); }

  const GatedLmSpec& spec() const { return spec_; }
  const LmDims& dims() const { return spec_.dims; }
  bool gating_enabled() const { return spec_.gating_enabled; }
  void set_gating_enabled(bool on);
  std::size_t behavior_hidden() const;
  std::size_t gate_input_dim() const;

  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  /// Trainable entries ← uniform(−range, range); then LSTM forget-gate
  /// biases and the gate projection bias ← +1. Frozen entries are untouched.
  void init_uniform(Rng& rng, double range);

  CarryState initial_state(std::size_t batch) const;

  /// Runs one window. `rng` is required when training with dropout_p > 0.
  WindowOutput forward(const IdMatrix& ids, const CarryState& carry, bool training = false,
                       double dropout_p = 0.0, Rng* rng = nullptr) const;

  /// Accumulates gradients for every trainable entry; carry_state entering
  /// the window is treated as constant.
  void backward(const WindowCache& cache, std::span<const Matrix> dlogits);

  /// SHA-256 over names, shapes and values of all non-trainable entries.
  Digest frozen_checksum() const;

 private:
  void bind();

  GatedLmSpec spec_;
  ParamStore store_;
  Embedding lm_embedding_;
  std::vector<LstmParams> lm_layers_;
  Param* head_w_ = nullptr;
  Param* head_b_ = nullptr;
  Embedding beh_embedding_;
  LstmParams beh_cell_;
  Param* beh_head_w_ = nullptr;
  Param* beh_head_b_ = nullptr;
  LstmParams gate_rnn_;
  Param* gate_w_ = nullptr;
  Param* gate_b_ = nullptr;
};

struct LmLoss {
  double loss = 0.0;             // mean over B×T tokens, natural log
  std::vector<Matrix> dlogits;   // per step, already scaled by 1/(B·T)
};

LmLoss lm_loss(std::span<const StepOutput> outputs, const IdMatrix& targets);

}  // namespace bglm
