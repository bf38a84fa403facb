#include <chrono>
#include <cmath>

#include "bglm/config.hpp"
#include "bglm/training.hpp"
#include "doctest.h"
#include "lm_fixtures.hpp"

using namespace bglm;

namespace {

std::vector<Id> random_stream(std::size_t n, std::size_t vocab, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Id> s(n);
  for (auto& v : s) v = Id(rng.below(vocab));
  return s;
}

LmData toy_data(std::size_t vocab = 12) {
  return {vocab, random_stream(400, vocab, 1), random_stream(200, vocab, 2), random_stream(200, vocab, 3)};
}

TrainConfig small_cfg() {
  TrainConfig c;
  c.epochs = 3;
  c.batch_size = 4;
  c.bptt_len = 5;
  c.dims = {0, 6, 8, 1, 5};
  c.behavior_hidden = 6;
  return c;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("learning-rate schedule") {
  TrainConfig c;
  c.lr_initial = 1.0;
  c.lr_decay = 0.5;
  c.decay_start_epoch = 4;
  CHECK(c.lr_at(1) == 1.0);
  CHECK(c.lr_at(4) == 1.0);
  CHECK(c.lr_at(5) == 0.5);
  CHECK(c.lr_at(7) == 0.125);
}

TEST_CASE("config invariants") {
  auto bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), ConfigError);
  };
  bad([](TrainConfig& c) { c.lr_initial = 0; });
  bad([](TrainConfig& c) { c.lr_decay = 1.5; });
  bad([](TrainConfig& c) { c.lr_decay = 0; });
  bad([](TrainConfig& c) { c.dropout_p = 1.0; });
  bad([](TrainConfig& c) { c.init_range = 0; });
  bad([](TrainConfig& c) { c.batch_size = 0; });
}

TEST_CASE("zero-parameter model has perplexity equal to the vocabulary size") {
  const auto m = GatedLm::baseline({37, 4, 5, 2, 3});
  const auto r = evaluate_perplexity(m, random_stream(500, 37, 9), 3, 7);
  CHECK(std::abs(r.ppl - 37.0) < 1e-9);
}

TEST_CASE("perplexity recomposes from per-token NLL") {
  auto m = GatedLm::baseline({15, 4, 6, 1, 3});
  Rng rng(3);
  m.init_uniform(rng, 0.5);
  const auto r = evaluate_perplexity(m, random_stream(700, 15, 4), 3, 6, true);
  REQUIRE(r.token_nll.size() == r.tokens);
  double s = 0;
  for (double v : r.token_nll) s += v;
  CHECK(std::abs(std::exp(s / double(r.tokens)) - r.ppl) <= 1e-12 * r.ppl);
}

TEST_CASE("perplexity barely depends on the batch layout") {
  auto m = GatedLm::baseline({15, 4, 6, 1, 3});
  Rng rng(5);
  m.init_uniform(rng, 0.5);
  const auto s = random_stream(4002, 15, 6);
  const double p1 = evaluate_perplexity(m, s, 1, 20).ppl;
  const double p2 = evaluate_perplexity(m, s, 2, 20).ppl;
  CHECK(std::abs(p1 - p2) / p1 < 1e-3);
}

TEST_CASE("out-of-vocabulary ids are a load error") {
  const auto m = GatedLm::baseline({10, 4, 5, 1, 3});
  CHECK_THROWS_AS(evaluate_perplexity(m, random_stream(100, 11, 1), 2, 5), LoadError);
}

TEST_CASE("relative improvement") {
  CHECK(relative_improvement(66.32, 64.71) == doctest::Approx(2.43).epsilon(0.01 / 2.43));
  CHECK(std::abs(relative_improvement(159.65, 148.78) - 6.81) <= 0.01);
  CHECK(std::abs(relative_improvement(60.0, 59.15) - 1.42) <= 0.01);
  CHECK(std::abs(relative_improvement(57.3, 56.92) - 0.66) <= 0.01);
  CHECK(relative_improvement(10, 10) == 0.0);
  CHECK_THROWS_AS(relative_improvement(0.0, 1.0), DomainError);
  CHECK_THROWS_AS(relative_improvement(-3.0, 1.0), DomainError);
}

TEST_CASE("zero epochs keep the initialization") {
  auto cfg = small_cfg();
  cfg.epochs = 0;
  const auto data = toy_data();
  const auto res = train_lm(cfg, data, nullptr);
  const auto init = make_initial_model(cfg, data.vocab, nullptr);
  for (const auto& [name, p] : init.params()) CHECK(res.model.params().at(name).value == p.value);
  CHECK(res.metrics.epochs.empty());
  CHECK(res.metrics.best_epoch == 0);
  CHECK(std::abs(res.metrics.best_valid_ppl - 12.0) / 12.0 < 0.05);
}

TEST_CASE("gating without a behavior net is a config error") {
  auto cfg = small_cfg();
  cfg.gating_enabled = true;
  CHECK_THROWS_AS(train_lm(cfg, toy_data(), nullptr), ConfigError);
}

TEST_CASE("best checkpoint has the lowest validation perplexity and test is scored on it") {
  auto cfg = small_cfg();
  cfg.epochs = 6;
  cfg.lr_initial = 2.0;
  const auto data = toy_data();
  const auto res = train_lm(cfg, data, nullptr);
  for (const auto& e : res.metrics.epochs) CHECK(res.metrics.best_valid_ppl <= e.valid_ppl);
  CHECK(res.metrics.epochs[res.metrics.best_epoch - 1].valid_ppl == res.metrics.best_valid_ppl);
  CHECK(evaluate_perplexity(res.model, data.valid, cfg.batch_size, cfg.bptt_len).ppl == res.metrics.best_valid_ppl);
  CHECK(evaluate_perplexity(res.model, data.test, cfg.batch_size, cfg.bptt_len).ppl == res.metrics.test_ppl);
}

TEST_CASE("gated training keeps the frozen branch and is deterministic") {
  auto cfg = small_cfg();
  cfg.gating_enabled = true;
  cfg.dropout_p = 0.2;
  const auto beh = testing::random_behavior(12, 5, 6, 31);
  const auto data = toy_data();
  const auto a = train_lm(cfg, data, &beh);
  const auto b = train_lm(cfg, data, &beh);
  CHECK(!a.metrics.frozen_checksum_before.empty());
  CHECK(a.metrics.frozen_checksum_before == a.metrics.frozen_checksum_after);
  for (const auto& [name, p] : beh.params()) CHECK(a.model.params().at(name).value == p.value);
  CHECK(a.metrics.test_ppl == b.metrics.test_ppl);
  for (std::size_t e = 0; e < a.metrics.epochs.size(); ++e) {
    CHECK(a.metrics.epochs[e].train_ppl == b.metrics.epochs[e].train_ppl);
  }
  for (const auto& [name, p] : a.model.params()) CHECK(b.model.params().at(name).value == p.value);
}

TEST_CASE("non-finite loss aborts training") {
  auto cfg = small_cfg();
  cfg.init_range = 1e300;
  CHECK_THROWS_AS(train_lm(cfg, toy_data(), nullptr), NumericError);
}

TEST_CASE("config files") {
  const auto cfg = parse_config(
      "# comment\n"
      "epochs = 7   # trailing\n"
      "\n"
      "beta=1.5\n"
      "mode = posterior\n"
      "gating_enabled = true\n"
      "beh_hidden_dim = 12\n");
  CHECK(cfg.train.epochs == 7);
  CHECK(cfg.synth.beta == 1.5);
  CHECK(cfg.train.mode == GateSource::Posterior);
  CHECK(cfg.train.gating_enabled);
  CHECK(cfg.beh_hidden_dim == 12);
  CHECK(cfg.train.behavior_hidden == 12);

  CHECK_THROWS_AS(parse_config("epoch = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("epochs = 3\nepochs = 4\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("epochs 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("epochs = three\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("mode = both\n"), ConfigError);
  try {
    parse_config("epochs = 1\nbogus_key = 3\n", "run.cfg");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("run.cfg:2") != std::string::npos);
    CHECK(std::string(e.what()).find("bogus_key") != std::string::npos);
  }

  TrainConfig t;
  t.lr_initial = 0.1 + 0.2;
  t.seed = 123456789012345ULL;
  t.mode = GateSource::Posterior;
  TrainConfig back;
  for (const auto& [k, v] : train_config_items(t)) CHECK(apply_train_key(back, k, v));
  CHECK(back.lr_initial == t.lr_initial);
  CHECK(back.seed == t.seed);
  CHECK(back.mode == t.mode);
}

TEST_CASE("grid files and enumeration") {
  const auto g = parse_grid("max_runs = 8\nlr_initial = 0.5, 1.0\nbatch_size = 2,4\nepochs = 2\n");
  CHECK(g.budget == 8);
  CHECK(g.size() == 4);
  CHECK(g.base.epochs == 2);
  CHECK(g.cell(0).lr_initial == 0.5);
  CHECK(g.cell(0).batch_size == 2);
  CHECK(g.cell(1).batch_size == 4);
  CHECK(g.cell(2).lr_initial == 1.0);
  CHECK(g.cell(3).seed == g.base.seed + 3);
  CHECK_THROWS_AS(parse_grid("lr_initial = 0.5, abc\n"), ConfigError);
  CHECK_THROWS_AS(parse_grid("nope = 1, 2\n"), ConfigError);

  const auto seeded = parse_grid("seed = 5, 9\n");
  CHECK(seeded.cell(1).seed == 9);
}

TEST_CASE("over-budget grid fails before training") {
  auto g = parse_grid("max_runs = 3\nlr_initial = 0.5, 1.0\nbatch_size = 2,4\n");
  const auto start = std::chrono::steady_clock::now();
  CHECK_THROWS_AS(grid_search(g, toy_data(), nullptr), ConfigError);
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(1));
}

TEST_CASE("singleton grid equals one training run") {
  GridSpec g;
  g.base = small_cfg();
  const auto data = toy_data();
  const auto res = grid_search(g, data, nullptr);
  const auto run = train_lm(g.base, data, nullptr);
  REQUIRE(res.ranked.size() == 1);
  CHECK(res.ranked[0].metrics.test_ppl == run.metrics.test_ppl);
  CHECK(res.ranked[0].metrics.best_valid_ppl == run.metrics.best_valid_ppl);
}

TEST_CASE("two-cell grid is deterministic") {
  GridSpec g;
  g.base = small_cfg();
  g.axes = {{"lr_initial", {"0.5", "1.0"}}};
  const auto data = toy_data();
  const auto a = grid_search(g, data, nullptr), b = grid_search(g, data, nullptr);
  REQUIRE(a.ranked.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(a.ranked[i].index == b.ranked[i].index);
    CHECK(a.ranked[i].metrics.best_valid_ppl == b.ranked[i].metrics.best_valid_ppl);
  }
  CHECK(a.ranked[0].metrics.best_valid_ppl <= a.ranked[1].metrics.best_valid_ppl);
  CHECK(a.best.lr_initial == a.ranked[0].metrics.config.lr_initial);
}

TEST_CASE("ranking ties prefer fewer parameters then earlier cells") {
  auto row = [](std::size_t index, double valid, std::size_t params) {
    GridRow r;
    r.index = index;
    r.metrics.best_valid_ppl = valid;
    r.metrics.param_count = params;
    return r;
  };
  std::vector<GridRow> rows{row(0, 30.0, 900), row(1, 20.0, 500), row(2, 20.0, 400), row(3, 20.0, 400),
                            row(4, 10.0, 999)};
  rank_grid_rows(rows);
  std::vector<std::size_t> order;
  for (const auto& r : rows) order.push_back(r.index);
  CHECK(order == std::vector<std::size_t>{4, 2, 3, 1, 0});
}

}  // TEST_SUITE
