#include "bglm/metrics_io.hpp"

#include <ostream>

#include "bglm/config.hpp"
#include "json.hpp"

namespace bglm {

namespace {

using json = nlohmann::ordered_json;

void emit(std::ostream& out, const json& rec) { out << rec.dump() << '\n'; }

}  // namespace

void write_run_metrics(std::ostream& out, const RunMetrics& m) {
  json cfg{{"record", "config"}};
  for (const auto& [k, v] : train_config_items(m.config)) cfg[k] = v;
  emit(out, cfg);
  for (const auto& e : m.epochs) {
    emit(out, {{"record", "epoch"},
               {"epoch", e.epoch},
               {"lr", e.lr},
               {"train_ppl", e.train_ppl},
               {"valid_ppl", e.valid_ppl}});
  }
  emit(out, {{"record", "summary"},
             {"best_epoch", m.best_epoch},
             {"best_valid_ppl", m.best_valid_ppl},
             {"test_ppl", m.test_ppl},
             {"param_count", m.param_count},
             {"trainable_param_count", m.trainable_count},
             {"frozen_checksum_before", m.frozen_checksum_before},
             {"frozen_checksum_after", m.frozen_checksum_after}});
}

void write_run_timing(std::ostream& out, const RunMetrics& m) {
  for (const auto& e : m.epochs) {
    emit(out, {{"record", "timing"}, {"epoch", e.epoch}, {"wall_seconds", e.wall_seconds}});
  }
}

void write_behavior_metrics(std::ostream& out, std::span<const BehaviorEpoch> history,
                            const BehaviorRunSummary& summary) {
  for (const auto& e : history) {
    emit(out, {{"record", "epoch"},
               {"epoch", e.epoch},
               {"lr", e.lr},
               {"train_bce", e.train_bce},
               {"valid_bce", e.valid_bce},
               {"valid_macro_f1", e.valid_macro_f1}});
  }
  json s{{"record", "summary"},
         {"best_epoch", summary.best_epoch},
         {"valid_bce", summary.valid.bce},
         {"valid_macro_f1", summary.valid.macro_f1},
         {"test_bce", summary.test.bce},
         {"test_macro_f1", summary.test.macro_f1}};
  for (std::size_t k = 0; k < kNumBehaviors; ++k) {
    s["test_f1_" + std::string(kBehaviorNames[k])] = summary.test.per_behavior_f1[k];
  }
  emit(out, s);
}

void write_behavior_timing(std::ostream& out, std::span<const BehaviorEpoch> history) {
  for (const auto& e : history) {
    emit(out, {{"record", "timing"}, {"epoch", e.epoch}, {"wall_seconds", e.wall_seconds}});
  }
}

}  // namespace bglm
