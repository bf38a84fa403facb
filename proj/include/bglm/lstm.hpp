#pragma once

#include <span>
#include <string>
#include <vector>

#include "bglm/matrix.hpp"
#include "bglm/param_store.hpp"

namespace bglm {

/// Handles to one LSTM layer's parameters inside a ParamStore.
///
/// Layout: wx is [I×4H], wh is [H×4H], b is [1×4H]. The 4H columns are four
/// contiguous blocks of width H in the fixed order input (i), forget (f),
/// cell candidate (g), output (o). Checkpoints rely on this order.
struct LstmParams {
  Param* wx = nullptr;
  Param* wh = nullptr;
  Param* b = nullptr;

  std::size_t input() const { return wx->value.rows(); }
  std::size_t hidden() const { return wh->value.rows(); }
};

enum LstmGate : std::size_t { kGateInput = 0, kGateForget = 1, kGateCell = 2, kGateOutput = 3 };

/// Adds `<prefix>.wx`, `<prefix>.wh`, `<prefix>.b` (zero-filled) to the store.
LstmParams add_lstm(ParamStore& store, const std::string& prefix, std::size_t input,
                    std::size_t hidden, bool trainable = true);
/// Binds handles to existing entries, validating the 4H layout.
LstmParams bind_lstm(ParamStore& store, const std::string& prefix);

struct LstmState {
  Matrix h;
  Matrix c;

  static LstmState zeros(std::size_t batch, std::size_t hidden) {
    return {Matrix(batch, hidden), Matrix(batch, hidden)};
  }
};

/// Activations retained by a forward step for its backward step.
struct LstmCache {
  Matrix x, h_prev, c_prev;
  Matrix i, f, g, o;
  Matrix tanh_c;
};

struct LstmStepResult {
  LstmState next;
  LstmCache cache;
};

LstmStepResult lstm_step(const LstmParams& p, const Matrix& x, const LstmState& prev);

struct LstmStepGrads {
  Matrix dx;
  Matrix dh_prev;
  Matrix dc_prev;
};

/// Exact reverse of lstm_step. Parameter gradients accumulate (+=) into the
/// store's grad matrices, skipping entries that are not trainable. dx is
/// only computed when `want_dx` is set.
LstmStepGrads lstm_backward_step(const LstmParams& p, const LstmCache& cache, const Matrix& dh,
                                 const Matrix& dc, bool want_dx = true);

/// Token embedding table [V×E].
struct Embedding {
  Param* table = nullptr;

  std::size_t vocab() const { return table->value.rows(); }
  std::size_t dim() const { return table->value.cols(); }
};

/// Rows of the table for a batch of ids.
Matrix embed(const Embedding& emb, std::span<const Id> ids);
/// One matrix per column t of `ids`: out[t] row r = table[ids(r, t)].
std::vector<Matrix> embed(const Embedding& emb, const IdMatrix& ids);
/// Scatter-adds dout rows into the table gradient (duplicate ids accumulate).
void embed_backward(const Embedding& emb, std::span<const Id> ids, const Matrix& dout);

}  // namespace bglm
