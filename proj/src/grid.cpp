#include <algorithm>
#include <exception>

#include "bglm/config.hpp"
#include "bglm/training.hpp"

namespace bglm {

std::size_t GridSpec::size() const {
  std::size_t n = 1;
  for (const auto& [_, values] : axes) n *= values.size();
  return n;
}

void GridSpec::validate() const {
  for (const auto& [key, values] : axes) {
    if (values.empty()) throw ConfigError("grid axis '" + key + "' has no values");
  }
  if (budget == 0) throw ConfigError("grid budget (max_runs) must be positive");
  if (size() > budget) {
    throw ConfigError("grid has " + std::to_string(size()) + " cells, over the budget of " +
                      std::to_string(budget) + " (max_runs)");
  }
}

TrainConfig GridSpec::cell(std::size_t index) const {
  TrainConfig cfg = base;
  std::size_t rest = index;
  bool seed_axis = false;
  for (std::size_t a = axes.size(); a-- > 0;) {
    const auto& [key, values] = axes[a];
    apply_train_key(cfg, key, values[rest % values.size()]);
    rest /= values.size();
    seed_axis = seed_axis || key == "seed";
  }
  if (!seed_axis) cfg.seed = base.seed + index;
  return cfg;
}

void rank_grid_rows(std::vector<GridRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const GridRow& a, const GridRow& b) {
    if (a.metrics.best_valid_ppl != b.metrics.best_valid_ppl) {
      return a.metrics.best_valid_ppl < b.metrics.best_valid_ppl;
    }
    if (a.metrics.param_count != b.metrics.param_count) {
      return a.metrics.param_count < b.metrics.param_count;
    }
    return a.index < b.index;
  });
}

GridResult grid_search(const GridSpec& spec, const LmData& data, const BehaviorNet* behavior) {
  spec.validate();
  const std::size_t n = spec.size();
  std::vector<TrainConfig> cells;
  for (std::size_t i = 0; i < n; ++i) {
    cells.push_back(spec.cell(i));
    cells.back().validate();
    if (cells.back().gating_enabled && behavior == nullptr) {
      throw ConfigError("grid cell " + std::to_string(i) + " enables gating without a behavior checkpoint");
    }
  }

  std::vector<GridRow> rows(n);
  std::vector<std::exception_ptr> failures(n);
  const auto count = static_cast<std::int64_t>(n);
  // Cells are independent; each owns its model and RNG streams.
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      auto run = train_lm(cells[i], data, behavior);
      rows[i] = GridRow{static_cast<std::size_t>(i), std::move(run.metrics)};
    } catch (...) {
      failures[i] = std::current_exception();
    }
  }
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  rank_grid_rows(rows);
  GridResult res;
  res.best = rows.front().metrics.config;
  res.ranked = std::move(rows);
  return res;
}

}  // namespace bglm
