#pragma once

#include <span>

#include "bglm/matrix.hpp"
#include "bglm/param_store.hpp"
#include "bglm/rng.hpp"

namespace bglm {

/// out = x·W + b, with b a 1×O row broadcast over the batch.
Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b);

/// Reverse of affine. dw and db accumulate (+=) when non-null; dx, when
/// non-null, is overwritten with dOut·Wᵀ.
void affine_backward(const Matrix& x, const Matrix& w, const Matrix& dout, Matrix* dw, Matrix* db,
                     Matrix* dx);

// Stable logistic: separate branches for x >= 0 and x < 0.
double sigmoid(double x);
Matrix sigmoid(const Matrix& x);
Matrix tanh_act(const Matrix& x);
// Backward rules expressed through the forward outputs y.
Matrix sigmoid_backward(const Matrix& y, const Matrix& dy);
Matrix tanh_backward(const Matrix& y, const Matrix& dy);

Matrix softmax(const Matrix& logits);

struct LossResult {
  double loss = 0.0;
  Matrix dlogits;
};

/// Mean natural-log cross entropy over rows; dlogits = (softmax − onehot)/B.
LossResult softmax_xent(const Matrix& logits, std::span<const Id> targets);

/// Mean binary cross entropy over all B·K entries, computed from logits.
LossResult bce_with_logits(const Matrix& logits, const Matrix& labels);

struct DropoutResult {
  Matrix out;
  Matrix mask;  // entries in {0, 1}
};

/// Inverted dropout: kept entries are scaled by 1/(1−p) while training.
DropoutResult dropout(const Matrix& x, double p, Rng& rng, bool training);
Matrix dropout_backward(const Matrix& dout, const Matrix& mask, double p);

/// Rescales trainable gradients so their global L2 norm is at most
/// max_norm. Returns the applied factor min(1, max_norm/g).
double clip_global_norm(ParamStore& store, double max_norm);

/// Gradient norm over trainable entries.
double global_grad_norm(const ParamStore& store);

/// value -= lr·grad on trainable entries; every gradient is then zeroed.
void sgd_step(ParamStore& store, double lr);

}  // namespace bglm
