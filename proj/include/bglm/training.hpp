#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bglm/behavior.hpp"
#include "bglm/gated_lm.hpp"

namespace bglm {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 20;
  std::size_t bptt_len = 20;
  double lr_initial = 1.0;
  double lr_decay = 0.5;
  std::size_t decay_start_epoch = 4;
  double clip_norm = 5.0;
  double dropout_p = 0.0;
  double init_range = 0.08;
  std::uint64_t seed = 1;
  GateSource mode = GateSource::Hidden;
  bool gating_enabled = false;
  LmDims dims{};  // dims.vocab is taken from the corpus
  std::size_t behavior_hidden = 50;  // expected width of the frozen classifier

  void validate() const;
  /// lr for a 1-based epoch: lr_initial · lr_decay^max(0, epoch − decay_start_epoch).
  double lr_at(std::size_t epoch) const;
};

/// Token streams for one experiment (each split concatenated, eos included).
struct LmData {
  std::size_t vocab = 0;
  std::vector<Id> train, valid, test;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_ppl = 0.0;
  double valid_ppl = 0.0;
  double lr = 0.0;
  double wall_seconds = 0.0;
};

struct RunMetrics {
  TrainConfig config;
  std::vector<EpochMetrics> epochs;
  std::size_t best_epoch = 0;  // 0 = initialization (only when no epoch ran)
  double best_valid_ppl = 0.0;
  double test_ppl = 0.0;
  std::size_t param_count = 0;
  std::size_t trainable_count = 0;
  std::string frozen_checksum_before;
  std::string frozen_checksum_after;
};

struct TrainResult {
  GatedLm model;  // best-validation checkpoint
  RunMetrics metrics;
};

/// Builds the model (baseline, or gated around `behavior`), initializes it
/// from cfg.seed, and trains with truncated BPTT + clipped SGD. Test
/// perplexity is computed once, on the best-validation checkpoint.
TrainResult train_lm(const TrainConfig& cfg, const LmData& data, const BehaviorNet* behavior);

/// Constructs and initializes the model train_lm would start from.
GatedLm make_initial_model(const TrainConfig& cfg, std::size_t vocab, const BehaviorNet* behavior);

struct PerplexityResult {
  double ppl = 0.0;
  double total_nll = 0.0;
  std::size_t tokens = 0;
  std::vector<double> token_nll;  // filled only when requested
};

/// exp(Σ NLL / N) over every batched token, dropout off, state carried
/// across windows.
PerplexityResult evaluate_perplexity(const GatedLm& model, std::span<const Id> stream,
                                     std::size_t batch_size, std::size_t bptt,
                                     bool keep_token_nll = false);

/// 100·(base − new)/base.
double relative_improvement(double base_ppl, double new_ppl);

// ---- grid search ------------------------------------------------------------

struct GridSpec {
  TrainConfig base;
  // Axis key (a TrainConfig key as accepted by the config file) -> candidate values.
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  std::size_t budget = 64;

  std::size_t size() const;
  void validate() const;
  /// Configuration for the cell at `index` (last axis varies fastest), with
  /// seed base.seed + index.
  TrainConfig cell(std::size_t index) const;
};

struct GridRow {
  std::size_t index = 0;
  RunMetrics metrics;
};

struct GridResult {
  std::vector<GridRow> ranked;
  TrainConfig best;
};

/// Ascending best-valid perplexity, then fewer parameters, then enumeration order.
void rank_grid_rows(std::vector<GridRow>& rows);

GridResult grid_search(const GridSpec& spec, const LmData& data, const BehaviorNet* behavior);

}  // namespace bglm
