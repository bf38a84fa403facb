#include "bglm/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bglm/kernels.hpp"

namespace bglm {

Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  require_shape(x.cols() == w.rows(), "affine x·W", x, w);
  require_shape(b.rows() == 1 && b.cols() == w.cols(), "affine bias", b, w);
  Matrix out(x.rows(), w.cols());
  kernels::affine(x.data(), w.data(), b.data(), out.data(), x.rows(), x.cols(), w.cols());
  return out;
}

void affine_backward(const Matrix& x, const Matrix& w, const Matrix& dout, Matrix* dw, Matrix* db,
                     Matrix* dx) {
  require_shape(x.cols() == w.rows(), "affine_backward x·W", x, w);
  require_shape(dout.rows() == x.rows() && dout.cols() == w.cols(), "affine_backward dOut", dout, w);
  const std::size_t n = x.rows(), in = x.cols(), out = w.cols();
  if (dw) {
    require_shape(dw->same_shape(w), "affine_backward dW", *dw, w);
    kernels::accumulate_xt_dy(x.data(), dout.data(), dw->data(), n, in, out);
  }
  if (db) {
    require_shape(db->rows() == 1 && db->cols() == out, "affine_backward db", *db, dout);
    kernels::accumulate_colsum(dout.data(), db->data(), n, out);
  }
  if (dx) {
    if (!dx->same_shape(x)) *dx = Matrix(n, in);
    kernels::dy_wt(dout.data(), w.data(), dx->data(), n, in, out);
  }
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix sigmoid(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  auto in = x.data();
  auto out = y.data();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = sigmoid(in[i]);
  return y;
}

Matrix tanh_act(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  auto in = x.data();
  auto out = y.data();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::tanh(in[i]);
  return y;
}

Matrix sigmoid_backward(const Matrix& y, const Matrix& dy) {
  require_shape(y.same_shape(dy), "sigmoid_backward", y, dy);
  Matrix dx(y.rows(), y.cols());
  auto a = y.data();
  auto g = dy.data();
  auto o = dx.data();
  for (std::size_t i = 0; i < a.size(); ++i) o[i] = g[i] * a[i] * (1.0 - a[i]);
  return dx;
}

Matrix tanh_backward(const Matrix& y, const Matrix& dy) {
  require_shape(y.same_shape(dy), "tanh_backward", y, dy);
  Matrix dx(y.rows(), y.cols());
  auto a = y.data();
  auto g = dy.data();
  auto o = dx.data();
  for (std::size_t i = 0; i < a.size(); ++i) o[i] = g[i] * (1.0 - a[i] * a[i]);
  return dx;
}

Matrix softmax(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    auto out = p.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      out[c] = std::exp(in[c] - mx);
      z += out[c];
    }
    for (double& v : out) v /= z;
  }
  return p;
}

LossResult softmax_xent(const Matrix& logits, std::span<const Id> targets) {
  if (targets.size() != logits.rows()) {
    throw DimensionError("softmax_xent: " + std::to_string(targets.size()) + " targets for logits " +
                         logits.shape_str());
  }
  const std::size_t batch = logits.rows(), vocab = logits.cols();
  LossResult res;
  res.dlogits = Matrix(batch, vocab);
  double total = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    const Id t = targets[r];
    if (t < 0 || static_cast<std::size_t>(t) >= vocab) {
      throw IndexError("softmax_xent: target " + std::to_string(t) + " outside [0," +
                       std::to_string(vocab) + ")");
    }
    auto in = logits.row(r);
    auto g = res.dlogits.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t c = 0; c < vocab; ++c) {
      g[c] = std::exp(in[c] - mx);
      z += g[c];
    }
    // -log softmax[t] = log z + mx - logit[t]
    total += std::log(z) + mx - in[t];
    for (std::size_t c = 0; c < vocab; ++c) g[c] = g[c] / z / static_cast<double>(batch);
    g[t] -= 1.0 / static_cast<double>(batch);
  }
  res.loss = total / static_cast<double>(batch);
  return res;
}

LossResult bce_with_logits(const Matrix& logits, const Matrix& labels) {
  require_shape(logits.same_shape(labels), "bce_with_logits", logits, labels);
  LossResult res;
  res.dlogits = Matrix(logits.rows(), logits.cols());
  const double n = static_cast<double>(logits.size());
  auto z = logits.data();
  auto y = labels.data();
  auto g = res.dlogits.data();
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    total += std::max(z[i], 0.0) - z[i] * y[i] + std::log1p(std::exp(-std::abs(z[i])));
    g[i] = (sigmoid(z[i]) - y[i]) / n;
  }
  res.loss = n > 0 ? total / n : 0.0;
  return res;
}

DropoutResult dropout(const Matrix& x, double p, Rng& rng, bool training) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout rate must lie in [0,1), got " + std::to_string(p));
  DropoutResult res{x, Matrix(x.rows(), x.cols(), 1.0)};
  if (!training || p == 0.0) return res;
  const double scale = 1.0 / (1.0 - p);
  auto m = res.mask.data();
  auto o = res.out.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    m[i] = rng.bernoulli(1.0 - p) ? 1.0 : 0.0;
    o[i] = o[i] * m[i] * scale;
  }
  return res;
}

Matrix dropout_backward(const Matrix& dout, const Matrix& mask, double p) {
  require_shape(dout.same_shape(mask), "dropout_backward", dout, mask);
  Matrix dx(dout.rows(), dout.cols());
  const double scale = 1.0 / (1.0 - p);
  auto g = dout.data();
  auto m = mask.data();
  auto o = dx.data();
  for (std::size_t i = 0; i < g.size(); ++i) o[i] = g[i] * m[i] * scale;
  return dx;
}

double global_grad_norm(const ParamStore& store) {
  double sq = 0.0;
  for (const auto& [_, p] : store) {
    if (p.trainable) sq += sum_squares(p.grad);
  }
  return std::sqrt(sq);
}

double clip_global_norm(ParamStore& store, double max_norm) {
  const double g = global_grad_norm(store);
  if (!(g > max_norm)) return 1.0;
  const double scale = max_norm / g;
  for (auto& [_, p] : store) {
    if (!p.trainable) continue;
    for (double& v : p.grad.data()) v *= scale;
  }
  return scale;
}

void sgd_step(ParamStore& store, double lr) {
  for (auto& [_, p] : store) {
    if (p.trainable) {
      auto v = p.value.data();
      auto g = p.grad.data();
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
    }
    p.grad.fill(0.0);
  }
}

}  // namespace bglm
