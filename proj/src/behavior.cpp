#include "bglm/behavior.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <map>

#include "bglm/ops.hpp"

namespace bglm {

namespace {

constexpr const char* kEmbedding = "beh.embedding";
constexpr const char* kCell = "beh.lstm";
constexpr const char* kHeadW = "beh.head.w";
constexpr const char* kHeadB = "beh.head.b";

// Groups sequence indices into equal-length minibatches, visiting `order`
// front to back; partial buckets are flushed at the end in length order.
std::vector<std::vector<std::size_t>> length_batches(const Corpus& c,
                                                     std::span<const std::size_t> order,
                                                     std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> batches;
  std::map<std::size_t, std::vector<std::size_t>> pending;
  for (std::size_t idx : order) {
    auto& bucket = pending[c.sequences[idx].size()];
    bucket.push_back(idx);
    if (bucket.size() == batch_size) {
      batches.push_back(std::move(bucket));
      bucket.clear();
    }
  }
  for (auto& [_, bucket] : pending) {
    if (!bucket.empty()) batches.push_back(std::move(bucket));
  }
  return batches;
}

struct BatchPass {
  std::vector<std::vector<Id>> step_ids;
  std::vector<LstmCache> caches;
  Matrix h_final;
  Matrix logits;
};

BatchPass forward_batch(const BehaviorNet& net, const Corpus& c, std::span<const std::size_t> idx) {
  const std::size_t len = c.sequences[idx.front()].size();
  if (len == 0) throw DataError("behavior: empty sequence");
  BatchPass pass;
  LstmState state = LstmState::zeros(idx.size(), net.dims().hidden);
  for (std::size_t t = 0; t < len; ++t) {
    std::vector<Id> ids(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) ids[r] = c.sequences[idx[r]][t];
    auto step = lstm_step(net.cell(), embed(net.embedding(), ids), state);
    state = std::move(step.next);
    pass.caches.push_back(std::move(step.cache));
    pass.step_ids.push_back(std::move(ids));
  }
  pass.h_final = state.h;
  pass.logits = affine(state.h, net.head_w().value, net.head_b().value);
  return pass;
}

Matrix label_matrix(const Corpus& c, std::span<const std::size_t> idx) {
  Matrix y(idx.size(), kNumBehaviors);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    for (std::size_t k = 0; k < kNumBehaviors; ++k) y(r, k) = c.labels[idx[r]][k];
  }
  return y;
}

void backward_batch(BehaviorNet& net, const BatchPass& pass, const Matrix& dlogits) {
  Param& hw = net.params().at(kHeadW);
  Param& hb = net.params().at(kHeadB);
  Matrix dh;
  affine_backward(pass.h_final, hw.value, dlogits, hw.trainable ? &hw.grad : nullptr,
                  hb.trainable ? &hb.grad : nullptr, &dh);
  Matrix dc(dh.rows(), dh.cols());
  for (std::size_t t = pass.caches.size(); t-- > 0;) {
    auto g = lstm_backward_step(net.cell(), pass.caches[t], dh, dc);
    embed_backward(net.embedding(), pass.step_ids[t], g.dx);
    dh = std::move(g.dh_prev);
    dc = std::move(g.dc_prev);
  }
}

void require_labels(const Corpus& c, const char* what) {
  if (!c.has_labels() || c.labels.size() != c.sequences.size()) {
    throw DataError(std::string(what) + ": every sequence needs a behavior label vector");
  }
}

}  // namespace

BehaviorNet::BehaviorNet(const BehaviorDims& dims) : dims_(dims) {
  if (dims.vocab == 0 || dims.embed == 0 || dims.hidden == 0) {
    throw ConfigError("behavior net dimensions must be positive");
  }
  store_.add(kEmbedding, Matrix(dims.vocab, dims.embed));
  add_lstm(store_, kCell, dims.embed, dims.hidden);
  store_.add(kHeadW, Matrix(dims.hidden, kNumBehaviors));
  store_.add(kHeadB, Matrix(1, kNumBehaviors));
  bind();
}

BehaviorNet::BehaviorNet(ParamStore store) : store_(std::move(store)) {
  bind();
  dims_ = {emb_.vocab(), emb_.dim(), cell_.hidden()};
}

void BehaviorNet::bind() {
  emb_.table = &store_.at(kEmbedding);
  cell_ = bind_lstm(store_, kCell);
  head_w_ = &store_.at(kHeadW);
  head_b_ = &store_.at(kHeadB);
  if (cell_.input() != emb_.dim()) {
    throw LoadError("behavior net: LSTM input " + std::to_string(cell_.input()) +
                    " does not match embedding width " + std::to_string(emb_.dim()));
  }
  if (head_w_->value.rows() != cell_.hidden() || head_w_->value.cols() != kNumBehaviors ||
      head_b_->value.rows() != 1 || head_b_->value.cols() != kNumBehaviors) {
    throw LoadError("behavior net: head must map " + std::to_string(cell_.hidden()) + " -> 5");
  }
}

void BehaviorNet::init_uniform(Rng& rng, double range) {
  for (auto& [_, p] : store_) {
    for (double& v : p.value.data()) v = rng.uniform(-range, range);
  }
  const std::size_t h = cell_.hidden();
  for (std::size_t j = 0; j < h; ++j) cell_.b->value(0, kGateForget * h + j) = 1.0;
}

BehaviorForward BehaviorNet::forward(std::span<const Id> seq) const {
  if (seq.empty()) throw DataError("behavior_forward: empty sequence");
  BehaviorForward out;
  out.hidden_trajectory = Matrix(seq.size(), dims_.hidden);
  LstmState state = LstmState::zeros(1, dims_.hidden);
  for (std::size_t t = 0; t < seq.size(); ++t) {
    state = lstm_step(cell_, embed(emb_, seq.subspan(t, 1)), state).next;
    auto row = out.hidden_trajectory.row(t);
    std::copy(state.h.data().begin(), state.h.data().end(), row.begin());
  }
  const Matrix logits = affine(state.h, head_w_->value, head_b_->value);
  for (std::size_t k = 0; k < kNumBehaviors; ++k) out.posteriors[k] = sigmoid(logits(0, k));
  return out;
}

void BehaviorTrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("behavior: batch_size must be positive");
  if (!(lr > 0.0)) throw ConfigError("behavior: lr must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("behavior: lr_decay must lie in (0,1]");
  if (!(clip_norm > 0.0)) throw ConfigError("behavior: clip_norm must be positive");
  if (!(init_range > 0.0)) throw ConfigError("behavior: init_range must be positive");
}

std::array<double, kNumBehaviors> per_behavior_f1(std::span<const BehaviorLabels> posteriors,
                                                  std::span<const BehaviorLabels> labels) {
  if (posteriors.size() != labels.size()) {
    throw DimensionError("per_behavior_f1: " + std::to_string(posteriors.size()) +
                         " predictions for " + std::to_string(labels.size()) + " labels");
  }
  std::array<double, kNumBehaviors> f1{};
  for (std::size_t k = 0; k < kNumBehaviors; ++k) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const bool pred = posteriors[i][k] > 0.5;
      const bool gold = labels[i][k] >= 0.5;
      tp += pred && gold;
      fp += pred && !gold;
      fn += !pred && gold;
    }
    const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    f1[k] = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
  }
  return f1;
}

BehaviorEval eval_behavior(const BehaviorNet& net, const Corpus& corpus) {
  require_labels(corpus, "eval_behavior");
  BehaviorEval ev;
  if (corpus.sequences.empty()) return ev;
  std::vector<std::size_t> order(corpus.sequences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<BehaviorLabels> post(corpus.sequences.size());
  double total = 0.0;
  for (const auto& idx : length_batches(corpus, order, 64)) {
    const auto pass = forward_batch(net, corpus, idx);
    const auto loss = bce_with_logits(pass.logits, label_matrix(corpus, idx));
    total += loss.loss * static_cast<double>(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (std::size_t k = 0; k < kNumBehaviors; ++k) post[idx[r]][k] = sigmoid(pass.logits(r, k));
    }
  }
  ev.bce = total / static_cast<double>(corpus.sequences.size());
  ev.per_behavior_f1 = per_behavior_f1(post, corpus.labels);
  double sum = 0.0;
  for (double f : ev.per_behavior_f1) sum += f;
  ev.macro_f1 = sum / static_cast<double>(kNumBehaviors);
  return ev;
}

BehaviorTrainResult train_behavior(const BehaviorDims& dims, const Corpus& train, const Corpus& valid,
                                   const BehaviorTrainConfig& cfg) {
  cfg.validate();
  require_labels(train, "train_behavior");
  if (!valid.sequences.empty()) require_labels(valid, "train_behavior (valid)");
  if (train.sequences.empty()) throw DataError("train_behavior: empty training corpus");
  train.validate(dims.vocab);

  BehaviorNet net(dims);
  Rng init_rng(mix_seed(cfg.seed, 0));
  net.init_uniform(init_rng, cfg.init_range);
  Rng shuffle_rng(mix_seed(cfg.seed, 1));

  BehaviorTrainResult result{net.clone(), {}, 0};
  double best_score = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train.sequences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double exponent = epoch > cfg.decay_start_epoch ? double(epoch - cfg.decay_start_epoch) : 0.0;
    const double lr = cfg.lr * std::pow(cfg.lr_decay, exponent);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    double train_total = 0.0;
    for (const auto& idx : length_batches(train, order, cfg.batch_size)) {
      const auto pass = forward_batch(net, train, idx);
      const auto loss = bce_with_logits(pass.logits, label_matrix(train, idx));
      if (!std::isfinite(loss.loss)) throw NumericError("train_behavior: non-finite loss at epoch " + std::to_string(epoch));
      train_total += loss.loss * static_cast<double>(idx.size());
      backward_batch(net, pass, loss.dlogits);
      clip_global_norm(net.params(), cfg.clip_norm);
      sgd_step(net.params(), lr);
    }

    BehaviorEpoch rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_bce = train_total / static_cast<double>(train.sequences.size());
    double score = rec.train_bce;
    if (!valid.sequences.empty()) {
      const auto ev = eval_behavior(net, valid);
      rec.valid_bce = ev.bce;
      rec.valid_macro_f1 = ev.macro_f1;
      score = ev.bce;
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back(rec);
    if (score < best_score) {
      best_score = score;
      result.best = net.clone();
      result.best_epoch = epoch;
    }
  }
  return result;
}

}  // namespace bglm
