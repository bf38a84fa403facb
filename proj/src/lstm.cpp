#include "bglm/lstm.hpp"

#include <cmath>

#include "bglm/kernels.hpp"
#include "bglm/ops.hpp"

namespace bglm {

LstmParams add_lstm(ParamStore& store, const std::string& prefix, std::size_t input,
                    std::size_t hidden, bool trainable) {
  LstmParams p;
  p.wx = &store.add(prefix + ".wx", Matrix(input, 4 * hidden), trainable);
  p.wh = &store.add(prefix + ".wh", Matrix(hidden, 4 * hidden), trainable);
  p.b = &store.add(prefix + ".b", Matrix(1, 4 * hidden), trainable);
  return p;
}

LstmParams bind_lstm(ParamStore& store, const std::string& prefix) {
  LstmParams p{&store.at(prefix + ".wx"), &store.at(prefix + ".wh"), &store.at(prefix + ".b")};
  const std::size_t h = p.wh->value.rows();
  const bool ok = p.wh->value.cols() == 4 * h && p.wx->value.cols() == 4 * h &&
                  p.b->value.rows() == 1 && p.b->value.cols() == 4 * h;
  if (!ok) {
    throw DimensionError(prefix + ": LSTM blocks do not partition into 4 gates (wx " +
                         p.wx->value.shape_str() + ", wh " + p.wh->value.shape_str() + ", b " +
                         p.b->value.shape_str() + ")");
  }
  return p;
}

LstmStepResult lstm_step(const LstmParams& p, const Matrix& x, const LstmState& prev) {
  const std::size_t batch = x.rows(), hid = p.hidden();
  require_shape(x.cols() == p.input(), "lstm_step input", x, p.wx->value);
  require_shape(prev.h.rows() == batch && prev.h.cols() == hid, "lstm_step h_prev", prev.h,
                p.wh->value);
  require_shape(prev.c.same_shape(prev.h), "lstm_step c_prev", prev.c, prev.h);

  // z = x·Wx + b + h_prev·Wh
  Matrix z = affine(x, p.wx->value, p.b->value);
  Matrix zh(batch, 4 * hid);
  kernels::affine(prev.h.data(), p.wh->value.data(), {}, zh.data(), batch, hid, 4 * hid);
  add_inplace(z, zh);

  LstmStepResult res;
  LstmCache& k = res.cache;
  k.x = x;
  k.h_prev = prev.h;
  k.c_prev = prev.c;
  k.i = Matrix(batch, hid);
  k.f = Matrix(batch, hid);
  k.g = Matrix(batch, hid);
  k.o = Matrix(batch, hid);
  k.tanh_c = Matrix(batch, hid);
  res.next = LstmState::zeros(batch, hid);

  for (std::size_t r = 0; r < batch; ++r) {
    auto zr = z.row(r);
    for (std::size_t j = 0; j < hid; ++j) {
      const double ig = sigmoid(zr[kGateInput * hid + j]);
      const double fg = sigmoid(zr[kGateForget * hid + j]);
      const double gg = std::tanh(zr[kGateCell * hid + j]);
      const double og = sigmoid(zr[kGateOutput * hid + j]);
      const double c = fg * prev.c(r, j) + ig * gg;
      const double tc = std::tanh(c);
      k.i(r, j) = ig;
      k.f(r, j) = fg;
      k.g(r, j) = gg;
      k.o(r, j) = og;
      k.tanh_c(r, j) = tc;
      res.next.c(r, j) = c;
      res.next.h(r, j) = og * tc;
    }
  }
  return res;
}

LstmStepGrads lstm_backward_step(const LstmParams& p, const LstmCache& k, const Matrix& dh,
                                 const Matrix& dc, bool want_dx) {
  const std::size_t batch = k.i.rows(), hid = k.i.cols();
  require_shape(dh.same_shape(k.i), "lstm_backward_step dh", dh, k.i);
  require_shape(dc.same_shape(k.i), "lstm_backward_step dc", dc, k.i);
  require_shape(hid == p.hidden() && k.x.cols() == p.input(), "lstm_backward_step cache", k.x,
                p.wx->value);

  LstmStepGrads out;
  out.dc_prev = Matrix(batch, hid);
  Matrix dz(batch, 4 * hid);
  for (std::size_t r = 0; r < batch; ++r) {
    auto dzr = dz.row(r);
    for (std::size_t j = 0; j < hid; ++j) {
      const double ig = k.i(r, j), fg = k.f(r, j), gg = k.g(r, j), og = k.o(r, j);
      const double tc = k.tanh_c(r, j);
      const double dhv = dh(r, j);
      const double dct = dc(r, j) + dhv * og * (1.0 - tc * tc);
      dzr[kGateInput * hid + j] = dct * gg * ig * (1.0 - ig);
      dzr[kGateForget * hid + j] = dct * k.c_prev(r, j) * fg * (1.0 - fg);
      dzr[kGateCell * hid + j] = dct * ig * (1.0 - gg * gg);
      dzr[kGateOutput * hid + j] = dhv * tc * og * (1.0 - og);
      out.dc_prev(r, j) = dct * fg;
    }
  }

  if (p.wx->trainable) kernels::accumulate_xt_dy(k.x.data(), dz.data(), p.wx->grad.data(), batch, p.input(), 4 * hid);
  if (p.wh->trainable) kernels::accumulate_xt_dy(k.h_prev.data(), dz.data(), p.wh->grad.data(), batch, hid, 4 * hid);
  if (p.b->trainable) kernels::accumulate_colsum(dz.data(), p.b->grad.data(), batch, 4 * hid);

  out.dh_prev = Matrix(batch, hid);
  kernels::dy_wt(dz.data(), p.wh->value.data(), out.dh_prev.data(), batch, hid, 4 * hid);
  if (want_dx) {
    out.dx = Matrix(batch, p.input());
    kernels::dy_wt(dz.data(), p.wx->value.data(), out.dx.data(), batch, p.input(), 4 * hid);
  }
  return out;
}

Matrix embed(const Embedding& emb, std::span<const Id> ids) {
  const std::size_t v = emb.vocab(), e = emb.dim();
  Matrix out(ids.size(), e);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= v) {
      throw IndexError("embed: id " + std::to_string(ids[r]) + " outside vocabulary of " +
                       std::to_string(v));
    }
    auto src = emb.table->value.row(static_cast<std::size_t>(ids[r]));
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

std::vector<Matrix> embed(const Embedding& emb, const IdMatrix& ids) {
  std::vector<Matrix> steps;
  steps.reserve(ids.cols);
  for (std::size_t t = 0; t < ids.cols; ++t) steps.push_back(embed(emb, ids.column(t)));
  return steps;
}

void embed_backward(const Embedding& emb, std::span<const Id> ids, const Matrix& dout) {
  require_shape(dout.rows() == ids.size() && dout.cols() == emb.dim(), "embed_backward", dout,
                emb.table->value);
  if (!emb.table->trainable) return;
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= emb.vocab()) {
      throw IndexError("embed_backward: id " + std::to_string(ids[r]) + " out of range");
    }
    auto g = emb.table->grad.row(static_cast<std::size_t>(ids[r]));
    auto d = dout.row(r);
    for (std::size_t c = 0; c < g.size(); ++c) g[c] += d[c];
  }
}

}  // namespace bglm
