#include "bglm/gated_lm.hpp"

#include "bglm/bytes.hpp"
#include "bglm/ops.hpp"

namespace bglm {

namespace {

std::string layer_prefix(std::size_t l) { return "lm.layer" + std::to_string(l); }

void expect_shape(const Param& p, std::size_t rows, std::size_t cols, const std::string& name) {
  if (p.value.rows() != rows || p.value.cols() != cols) {
    throw LoadError(name + ": expected [" + std::to_string(rows) + "x" + std::to_string(cols) +
                    "], found " + p.value.shape_str());
  }
}

// Accumulating affine backward that leaves frozen entries alone.
void head_backward(const Matrix& x, Param& w, Param& b, const Matrix& dout, Matrix* dx) {
  affine_backward(x, w.value, dout, w.trainable ? &w.grad : nullptr, b.trainable ? &b.grad : nullptr,
                  dx);
}

Matrix maybe_dropout(const Matrix& x, bool training, double p, Rng* rng, Matrix& mask) {
  if (!training || p == 0.0) {
    mask = Matrix();
    return x;
  }
  auto d = dropout(x, p, *rng, true);
  mask = std::move(d.mask);
  return std::move(d.out);
}

}  // namespace

GatedLm::GatedLm(const GatedLmSpec& spec, ParamStore store) : spec_(spec), store_(std::move(store)) {
  bind();
}

void GatedLm::bind() {
  const LmDims& d = spec_.dims;
  if (d.vocab == 0 || d.embed == 0 || d.hidden == 0 || d.layers == 0) {
    throw ConfigError("language model dimensions must be positive");
  }
  if (spec_.gating_enabled && !spec_.behavior_branch) {
    throw ConfigError("gating enabled on a model without a behavior branch");
  }
  std::size_t expected_entries = 3 + 3 * d.layers;
  lm_embedding_.table = &store_.at("lm.embedding");
  expect_shape(*lm_embedding_.table, d.vocab, d.embed, "lm.embedding");
  lm_layers_.clear();
  for (std::size_t l = 0; l < d.layers; ++l) {
    LstmParams p = bind_lstm(store_, layer_prefix(l));
    const std::size_t in = l == 0 ? d.embed : d.hidden;
    if (p.input() != in || p.hidden() != d.hidden) {
      throw LoadError(layer_prefix(l) + ": expected LSTM " + std::to_string(in) + "->" +
                      std::to_string(d.hidden) + ", found " + std::to_string(p.input()) + "->" +
                      std::to_string(p.hidden()));
    }
    lm_layers_.push_back(p);
  }
  head_w_ = &store_.at("lm.head.w");
  head_b_ = &store_.at("lm.head.b");
  expect_shape(*head_w_, d.hidden, d.vocab, "lm.head.w");
  expect_shape(*head_b_, 1, d.vocab, "lm.head.b");

  if (spec_.behavior_branch) {
    expected_entries += 6 + 3 + 2;  // beh.*, gate.rnn.*, gate.proj.*
    beh_embedding_.table = &store_.at("beh.embedding");
    beh_cell_ = bind_lstm(store_, "beh.lstm");
    beh_head_w_ = &store_.at("beh.head.w");
    beh_head_b_ = &store_.at("beh.head.b");
    expect_shape(*beh_embedding_.table, d.vocab, beh_cell_.input(), "beh.embedding");
    expect_shape(*beh_head_w_, beh_cell_.hidden(), kNumBehaviors, "beh.head.w");
    expect_shape(*beh_head_b_, 1, kNumBehaviors, "beh.head.b");
    for (const auto& [name, p] : store_) {
      if (name.rfind("beh.", 0) == 0 && p.trainable) {
        throw LoadError(name + ": behavior branch entries must be frozen");
      }
    }
    gate_rnn_ = bind_lstm(store_, "gate.rnn");
    if (gate_rnn_.input() != gate_input_dim() || gate_rnn_.hidden() != d.gate_hidden) {
      throw LoadError("gate.rnn: expected LSTM " + std::to_string(gate_input_dim()) + "->" +
                      std::to_string(d.gate_hidden) + ", found " +
                      std::to_string(gate_rnn_.input()) + "->" + std::to_string(gate_rnn_.hidden()));
    }
    gate_w_ = &store_.at("gate.proj.w");
    gate_b_ = &store_.at("gate.proj.b");
    expect_shape(*gate_w_, d.gate_hidden, d.hidden, "gate.proj.w");
    expect_shape(*gate_b_, 1, d.hidden, "gate.proj.b");
  }
  if (store_.size() != expected_entries) {
    throw LoadError("language model: " + std::to_string(store_.size()) + " parameter entries, expected " +
                    std::to_string(expected_entries));
  }
}

GatedLm GatedLm::baseline(const LmDims& dims) {
  ParamStore store;
  store.add("lm.embedding", Matrix(dims.vocab, dims.embed));
  for (std::size_t l = 0; l < dims.layers; ++l) {
    add_lstm(store, layer_prefix(l), l == 0 ? dims.embed : dims.hidden, dims.hidden);
  }
  store.add("lm.head.w", Matrix(dims.hidden, dims.vocab));
  store.add("lm.head.b", Matrix(1, dims.vocab));
  GatedLmSpec spec;
  spec.dims = dims;
  return GatedLm(spec, std::move(store));
}

GatedLm GatedLm::with_behavior(const LmDims& dims, const BehaviorNet& behavior, GateSource mode,
                               std::size_t expected_behavior_hidden) {
  if (behavior.dims().hidden != expected_behavior_hidden) {
    throw LoadError("behavior checkpoint has hidden width " + std::to_string(behavior.dims().hidden) +
                    ", expected " + std::to_string(expected_behavior_hidden));
  }
  if (behavior.dims().vocab != dims.vocab) {
    throw LoadError("behavior checkpoint vocabulary of " + std::to_string(behavior.dims().vocab) +
                    " does not match language model vocabulary of " + std::to_string(dims.vocab));
  }
  GatedLm base = baseline(dims);
  ParamStore store = std::move(base.store_);
  for (const auto& [name, p] : behavior.params()) store.add(name, p.value, false);
  const std::size_t gate_in = mode == GateSource::Hidden ? behavior.dims().hidden : kNumBehaviors;
  add_lstm(store, "gate.rnn", gate_in, dims.gate_hidden);
  store.add("gate.proj.w", Matrix(dims.gate_hidden, dims.hidden));
  store.add("gate.proj.b", Matrix(1, dims.hidden));
  GatedLmSpec spec;
  spec.dims = dims;
  spec.behavior_branch = true;
  spec.mode = mode;
  spec.gating_enabled = true;
  return GatedLm(spec, std::move(store));
}

void GatedLm::set_gating_enabled(bool on) {
  if (on && !spec_.behavior_branch) throw ConfigError("cannot enable gating without a behavior branch");
  spec_.gating_enabled = on;
}

std::size_t GatedLm::behavior_hidden() const {
  return spec_.behavior_branch ? beh_cell_.hidden() : 0;
}

std::size_t GatedLm::gate_input_dim() const {
  if (!spec_.behavior_branch) return 0;
  return spec_.mode == GateSource::Hidden ? beh_cell_.hidden() : kNumBehaviors;
}

void GatedLm::init_uniform(Rng& rng, double range) {
  for (auto& [_, p] : store_) {
    if (!p.trainable) continue;
    for (double& v : p.value.data()) v = rng.uniform(-range, range);
  }
  auto forget_one = [](LstmParams& p) {
    const std::size_t h = p.hidden();
    for (std::size_t j = 0; j < h; ++j) p.b->value(0, kGateForget * h + j) = 1.0;
  };
  for (auto& layer : lm_layers_) forget_one(layer);
  if (spec_.behavior_branch) {
    forget_one(gate_rnn_);
    gate_b_->value.fill(1.0);
  }
}

CarryState GatedLm::initial_state(std::size_t batch) const {
  CarryState s;
  for (std::size_t l = 0; l < spec_.dims.layers; ++l) {
    s.lm.push_back(LstmState::zeros(batch, spec_.dims.hidden));
  }
  if (spec_.behavior_branch) {
    s.behavior = LstmState::zeros(batch, beh_cell_.hidden());
    s.gate = LstmState::zeros(batch, spec_.dims.gate_hidden);
  }
  return s;
}

WindowOutput GatedLm::forward(const IdMatrix& ids, const CarryState& carry, bool training,
                              double dropout_p, Rng* rng) const {
  const std::size_t batch = ids.rows, steps = ids.cols, layers = spec_.dims.layers;
  if (carry.lm.size() != layers) {
    throw DimensionError("gated_forward: carry holds " + std::to_string(carry.lm.size()) +
                         " LM states for " + std::to_string(layers) + " layers");
  }
  if (training && dropout_p > 0.0 && rng == nullptr) {
    throw ConfigError("gated_forward: dropout requires an rng");
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("gated_forward: dropout rate must lie in [0,1)");
  const bool gated = spec_.gating_enabled;

  WindowOutput out;
  out.carry = carry;
  out.cache.training = training;
  out.cache.dropout_p = dropout_p;
  out.cache.gated = gated;
  out.steps.reserve(steps);
  out.cache.steps.reserve(steps);

  for (std::size_t t = 0; t < steps; ++t) {
    StepCache sc;
    sc.ids = ids.column(t);
    Matrix x = embed(lm_embedding_, sc.ids);
    sc.layer_masks.resize(layers);
    for (std::size_t l = 0; l < layers; ++l) {
      Matrix in = maybe_dropout(x, training, dropout_p, rng, sc.layer_masks[l]);
      auto step = lstm_step(lm_layers_[l], in, out.carry.lm[l]);
      out.carry.lm[l] = step.next;
      x = std::move(step.next.h);
      sc.layers.push_back(std::move(step.cache));
    }
    sc.top = maybe_dropout(x, training, dropout_p, rng, sc.top_mask);

    StepOutput so;
    if (gated) {
      auto beh = lstm_step(beh_cell_, embed(beh_embedding_, sc.ids), out.carry.behavior);
      if (spec_.mode == GateSource::Hidden) {
        sc.gate_input = beh.next.h;
      } else {
        sc.gate_input = sigmoid(affine(beh.next.h, beh_head_w_->value, beh_head_b_->value));
      }
      out.carry.behavior = std::move(beh.next);
      for (std::size_t r = 0; r < batch; ++r) {
        if (sc.ids[r] != spec_.behavior_reset_id) continue;
        for (double& v : out.carry.behavior.h.row(r)) v = 0.0;
        for (double& v : out.carry.behavior.c.row(r)) v = 0.0;
      }
      auto q = lstm_step(gate_rnn_, sc.gate_input, out.carry.gate);
      out.carry.gate = q.next;
      sc.gate_hidden = std::move(q.next.h);
      sc.gate = sigmoid(affine(sc.gate_hidden, gate_w_->value, gate_b_->value));
      sc.gate_rnn = std::move(q.cache);
      sc.head_input = hadamard(sc.top, sc.gate);
      so.gate_values = sc.gate;
    } else {
      sc.head_input = sc.top;
      so.gate_values = Matrix(batch, spec_.dims.hidden, 1.0);
    }
    so.logits = affine(sc.head_input, head_w_->value, head_b_->value);
    out.steps.push_back(std::move(so));
    out.cache.steps.push_back(std::move(sc));
  }
  return out;
}

void GatedLm::backward(const WindowCache& cache, std::span<const Matrix> dlogits) {
  if (dlogits.size() != cache.steps.size()) {
    throw DimensionError("gated_backward: " + std::to_string(dlogits.size()) + " dlogits for " +
                         std::to_string(cache.steps.size()) + " cached steps");
  }
  if (cache.steps.empty()) return;
  if (cache.gated != spec_.gating_enabled) throw DimensionError("gated_backward: cache from a different gating mode");
  const std::size_t layers = spec_.dims.layers;
  const std::size_t batch = cache.steps.front().ids.size();
  const bool dropped = cache.training && cache.dropout_p > 0.0;

  std::vector<Matrix> dh(layers, Matrix(batch, spec_.dims.hidden));
  std::vector<Matrix> dc(layers, Matrix(batch, spec_.dims.hidden));
  Matrix dq, dcq;
  if (cache.gated) {
    dq = Matrix(batch, spec_.dims.gate_hidden);
    dcq = Matrix(batch, spec_.dims.gate_hidden);
  }

  for (std::size_t t = cache.steps.size(); t-- > 0;) {
    const StepCache& sc = cache.steps[t];
    Matrix dhead;
    head_backward(sc.head_input, *head_w_, *head_b_, dlogits[t], &dhead);

    Matrix dtop;
    if (cache.gated) {
      dtop = hadamard(dhead, sc.gate);
      const Matrix dgate_pre = sigmoid_backward(sc.gate, hadamard(dhead, sc.top));
      Matrix dq_proj;
      head_backward(sc.gate_hidden, *gate_w_, *gate_b_, dgate_pre, &dq_proj);
      add_inplace(dq_proj, dq);
      // b_t comes from frozen weights over tokens, so nothing upstream needs dx.
      auto g = lstm_backward_step(gate_rnn_, sc.gate_rnn, dq_proj, dcq, false);
      dq = std::move(g.dh_prev);
      dcq = std::move(g.dc_prev);
    } else {
      dtop = std::move(dhead);
    }

    Matrix dx = dropped ? dropout_backward(dtop, sc.top_mask, cache.dropout_p) : std::move(dtop);
    for (std::size_t l = layers; l-- > 0;) {
      add_inplace(dx, dh[l]);
      auto g = lstm_backward_step(lm_layers_[l], sc.layers[l], dx, dc[l]);
      dh[l] = std::move(g.dh_prev);
      dc[l] = std::move(g.dc_prev);
      dx = dropped ? dropout_backward(g.dx, sc.layer_masks[l], cache.dropout_p) : std::move(g.dx);
    }
    embed_backward(lm_embedding_, sc.ids, dx);
  }
}

Digest GatedLm::frozen_checksum() const {
  ByteWriter w;
  for (const auto& [name, p] : store_) {
    if (p.trainable) continue;
    w.raw(name);
    w.u8(0);
    w.u64(p.value.rows());
    w.u64(p.value.cols());
    for (double v : p.value.data()) w.f64(v);
  }
  return sha256(w.bytes());
}

LmLoss lm_loss(std::span<const StepOutput> outputs, const IdMatrix& targets) {
  if (outputs.size() != targets.cols) {
    throw DimensionError("lm_loss: " + std::to_string(outputs.size()) + " steps for targets of width " +
                         std::to_string(targets.cols));
  }
  LmLoss res;
  const double steps = static_cast<double>(outputs.size());
  for (std::size_t t = 0; t < outputs.size(); ++t) {
    if (outputs[t].logits.rows() != targets.rows) {
      throw DimensionError("lm_loss: logits " + outputs[t].logits.shape_str() + " for " +
                           std::to_string(targets.rows) + " target rows");
    }
    auto step = softmax_xent(outputs[t].logits, targets.column(t));
    res.loss += step.loss;
    for (double& v : step.dlogits.data()) v /= steps;
    res.dlogits.push_back(std::move(step.dlogits));
  }
  if (!outputs.empty()) res.loss /= steps;
  return res;
}

}  // namespace bglm
