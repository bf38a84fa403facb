#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>

#include "bglm/behavior.hpp"
#include "bglm/training.hpp"

namespace bglm {

// Metrics files are JSON Lines. Language-model runs write
//
//   {"record":"config", <every TrainConfig key>}
//   {"record":"epoch","epoch":1,"lr":..,"train_ppl":..,"valid_ppl":..}   one per epoch
//   {"record":"summary","best_epoch":..,"best_valid_ppl":..,"test_ppl":..,
//    "param_count":..,"trainable_param_count":..,
//    "frozen_checksum_before":"<hex>","frozen_checksum_after":"<hex>"}
//
// Behavior runs write {"record":"epoch","epoch","lr","train_bce","valid_bce","valid_macro_f1"}
// per epoch and a summary with best_epoch plus per-behavior test F1.
//
// Wall-clock time varies run to run, so it goes to a separate timing file
// ({"record":"timing","epoch":..,"wall_seconds":..}) and the metrics file
// stays byte-reproducible.

void write_run_metrics(std::ostream& out, const RunMetrics& m);
void write_run_timing(std::ostream& out, const RunMetrics& m);

struct BehaviorRunSummary {
  std::size_t best_epoch = 0;
  BehaviorEval valid;
  BehaviorEval test;
};

void write_behavior_metrics(std::ostream& out, std::span<const BehaviorEpoch> history,
                            const BehaviorRunSummary& summary);
void write_behavior_timing(std::ostream& out, std::span<const BehaviorEpoch> history);

/// Opens `path` for writing and calls `fn(stream)`; IoError on failure.
template <typename Fn>
void write_file(const std::filesystem::path& path, Fn&& fn);

}  // namespace bglm

#include <fstream>

#include "bglm/errors.hpp"

template <typename Fn>
void bglm::write_file(const std::filesystem::path& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  fn(out);
  if (!out) throw IoError("write failure on " + path.string());
}
