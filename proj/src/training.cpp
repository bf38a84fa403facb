#include "bglm/training.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "bglm/data.hpp"
#include "bglm/ops.hpp"

namespace bglm {

void TrainConfig::validate() const {
  if (batch_size == 0 || bptt_len == 0) throw ConfigError("batch_size and bptt_len must be positive");
  if (!(lr_initial > 0.0)) throw ConfigError("lr_initial must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must lie in (0,1]");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("dropout_p must lie in [0,1)");
  if (!(init_range > 0.0)) throw ConfigError("init_range must be positive");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
  if (dims.embed == 0 || dims.hidden == 0 || dims.layers == 0) {
    throw ConfigError("embed_dim, hidden_dim and layers must be positive");
  }
  if (gating_enabled && dims.gate_hidden == 0) throw ConfigError("gate_dim must be positive");
}

double TrainConfig::lr_at(std::size_t epoch) const {
  const double exponent = epoch > decay_start_epoch ? double(epoch - decay_start_epoch) : 0.0;
  return lr_initial * std::pow(lr_decay, exponent);
}

GatedLm make_initial_model(const TrainConfig& cfg, std::size_t vocab, const BehaviorNet* behavior) {
  cfg.validate();
  LmDims dims = cfg.dims;
  dims.vocab = vocab;
  if (cfg.gating_enabled && behavior == nullptr) {
    throw ConfigError("gating_enabled requires a behavior checkpoint");
  }
  GatedLm model = cfg.gating_enabled
                      ? GatedLm::with_behavior(dims, *behavior, cfg.mode, cfg.behavior_hidden)
                      : GatedLm::baseline(dims);
  Rng rng(mix_seed(cfg.seed, 0));
  model.init_uniform(rng, cfg.init_range);
  return model;
}

PerplexityResult evaluate_perplexity(const GatedLm& model, std::span<const Id> stream,
                                     std::size_t batch_size, std::size_t bptt, bool keep_token_nll) {
  for (Id id : stream) {
    if (id < 0 || static_cast<std::size_t>(id) >= model.dims().vocab) {
      throw LoadError("evaluate_perplexity: token id " + std::to_string(id) +
                      " is outside the model vocabulary of " + std::to_string(model.dims().vocab));
    }
  }
  PerplexityResult res;
  CarryState carry = model.initial_state(batch_size);
  for (const auto& batch : batchify(stream, batch_size, bptt)) {
    auto out = model.forward(batch.input, carry, false);
    carry = std::move(out.carry);
    for (std::size_t t = 0; t < out.steps.size(); ++t) {
      const Matrix& logits = out.steps[t].logits;
      for (std::size_t r = 0; r < logits.rows(); ++r) {
        auto row = logits.row(r);
        double mx = row[0];
        for (double v : row) mx = std::max(mx, v);
        double z = 0.0;
        for (double v : row) z += std::exp(v - mx);
        const double nll = std::log(z) + mx - row[static_cast<std::size_t>(batch.target(r, t))];
        res.total_nll += nll;
        if (keep_token_nll) res.token_nll.push_back(nll);
        ++res.tokens;
      }
    }
  }
  res.ppl = std::exp(res.total_nll / static_cast<double>(res.tokens));
  return res;
}

TrainResult train_lm(const TrainConfig& cfg, const LmData& data, const BehaviorNet* behavior) {
  GatedLm model = make_initial_model(cfg, data.vocab, behavior);
  RunMetrics metrics;
  metrics.config = cfg;
  metrics.config.dims.vocab = data.vocab;
  metrics.param_count = model.params().scalar_count();
  metrics.trainable_count = model.params().scalar_count(true);
  const bool branch = model.spec().behavior_branch;
  if (branch) metrics.frozen_checksum_before = to_hex(model.frozen_checksum());

  const auto batches = batchify(data.train, cfg.batch_size, cfg.bptt_len);
  Rng dropout_rng(mix_seed(cfg.seed, 2));

  GatedLm best = model.clone();
  double best_valid = std::numeric_limits<double>::infinity();
  if (cfg.epochs == 0) best_valid = evaluate_perplexity(model, data.valid, cfg.batch_size, cfg.bptt_len).ppl;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double lr = cfg.lr_at(epoch);
    CarryState carry = model.initial_state(cfg.batch_size);
    double total = 0.0;
    for (const auto& batch : batches) {
      auto out = model.forward(batch.input, carry, true, cfg.dropout_p, &dropout_rng);
      const auto loss = lm_loss(out.steps, batch.target);
      if (!std::isfinite(loss.loss)) {
        throw NumericError("train_lm: non-finite loss in epoch " + std::to_string(epoch) +
                           " (lr " + std::to_string(lr) + "); lower lr_initial or clip_norm");
      }
      model.backward(out.cache, loss.dlogits);
      clip_global_norm(model.params(), cfg.clip_norm);
      sgd_step(model.params(), lr);
      carry = std::move(out.carry);
      total += loss.loss;
    }
    EpochMetrics em;
    em.epoch = epoch;
    em.lr = lr;
    em.train_ppl = std::exp(total / static_cast<double>(batches.size()));
    em.valid_ppl = evaluate_perplexity(model, data.valid, cfg.batch_size, cfg.bptt_len).ppl;
    em.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!std::isfinite(em.valid_ppl)) throw NumericError("train_lm: non-finite validation perplexity");
    metrics.epochs.push_back(em);
    if (em.valid_ppl < best_valid) {
      best_valid = em.valid_ppl;
      best = model.clone();
      metrics.best_epoch = epoch;
    }
  }

  metrics.best_valid_ppl = best_valid;
  metrics.test_ppl = evaluate_perplexity(best, data.test, cfg.batch_size, cfg.bptt_len).ppl;
  if (branch) metrics.frozen_checksum_after = to_hex(model.frozen_checksum());
  return {std::move(best), std::move(metrics)};
}

double relative_improvement(double base_ppl, double new_ppl) {
  if (!(base_ppl > 0.0)) throw DomainError("relative_improvement: base perplexity must be positive");
  return 100.0 * (base_ppl - new_ppl) / base_ppl;
}

}  // namespace bglm
