#include <cmath>

#include "bglm/gated_lm.hpp"
#include "bglm/ops.hpp"
#include "doctest.h"
#include "fd.hpp"
#include "lm_fixtures.hpp"
#include "reference_lm.hpp"

using namespace bglm;
using testing::random_ids;

namespace {

constexpr LmDims kTiny{20, 8, 8, 1, 6};

GatedLm tiny_gated(GateSource mode, std::uint64_t seed, double range = 0.5) {
  auto beh = testing::random_behavior(20, 7, 5, seed + 100);
  auto m = GatedLm::with_behavior(kTiny, beh, mode, 5);
  Rng rng(seed);
  m.init_uniform(rng, range);
  m.set_gating_enabled(true);
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
  return d;
}

}  // namespace

TEST_SUITE("gated_lm") {

TEST_CASE("disabled gating reproduces the baseline exactly") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto gated = tiny_gated(GateSource::Hidden, seed);
    gated.set_gating_enabled(false);
    auto base = GatedLm::baseline(kTiny);
    testing::copy_trunk(gated, base);
    Rng rng(seed);
    const auto ids = random_ids(rng, 2, 5, 20);
    const auto a = gated.forward(ids, gated.initial_state(2));
    const auto b = base.forward(ids, base.initial_state(2));
    for (std::size_t t = 0; t < 5; ++t) CHECK(a.steps[t].logits == b.steps[t].logits);
  }
}

TEST_CASE("saturated open gate matches the baseline") {
  auto gated = tiny_gated(GateSource::Posterior, 3);
  gated.params().at("gate.proj.w").value.fill(0.0);
  gated.params().at("gate.proj.b").value.fill(40.0);
  auto base = GatedLm::baseline(kTiny);
  testing::copy_trunk(gated, base);
  Rng rng(4);
  const auto ids = random_ids(rng, 2, 5, 20);
  const auto a = gated.forward(ids, gated.initial_state(2));
  const auto b = base.forward(ids, base.initial_state(2));
  for (std::size_t t = 0; t < 5; ++t) CHECK(max_abs_diff(a.steps[t].logits, b.steps[t].logits) < 1e-10);
}

TEST_CASE("closed gate leaves only the head bias") {
  auto gated = tiny_gated(GateSource::Hidden, 5);
  gated.params().at("gate.proj.w").value.fill(0.0);
  gated.params().at("gate.proj.b").value.fill(-40.0);
  Rng rng(6);
  const auto ids = random_ids(rng, 2, 5, 20);
  const auto tgt = random_ids(rng, 2, 5, 20);
  const auto out = gated.forward(ids, gated.initial_state(2));
  const Matrix& hb = gated.params().at("lm.head.b").value;
  double expected = 0.0;
  for (std::size_t t = 0; t < 5; ++t) {
    for (std::size_t r = 0; r < 2; ++r) {
      for (std::size_t v = 0; v < 20; ++v) CHECK(std::abs(out.steps[t].logits(r, v) - hb(0, v)) < 1e-14);
      Matrix row(1, 20);
      for (std::size_t v = 0; v < 20; ++v) row(0, v) = hb(0, v);
      const std::vector<Id> one{tgt(r, t)};
      expected += softmax_xent(row, one).loss;
    }
  }
  CHECK(std::abs(lm_loss(out.steps, tgt).loss - expected / 10.0) < 1e-12);
}

TEST_CASE("gate values lie in (0,1) and are ones when disabled") {
  auto gated = tiny_gated(GateSource::Hidden, 7);
  Rng rng(8);
  const auto ids = random_ids(rng, 2, 5, 20);
  for (const auto& s : gated.forward(ids, gated.initial_state(2)).steps) {
    for (double g : s.gate_values.data()) CHECK((g > 0.0 && g < 1.0));
  }
  gated.set_gating_enabled(false);
  for (const auto& s : gated.forward(ids, gated.initial_state(2)).steps) CHECK(s.gate_values == Matrix(2, 8, 1.0));
}

TEST_CASE("gating disabled leaves gate gradients exactly zero") {
  auto gated = tiny_gated(GateSource::Hidden, 9);
  gated.set_gating_enabled(false);
  Rng rng(10);
  const auto ids = random_ids(rng, 2, 5, 20), tgt = random_ids(rng, 2, 5, 20);
  gated.params().zero_grad();
  auto out = gated.forward(ids, gated.initial_state(2));
  gated.backward(out.cache, lm_loss(out.steps, tgt).dlogits);
  bool trunk_moved = false;
  for (const auto& [name, p] : gated.params()) {
    const Matrix zero(p.value.rows(), p.value.cols());
    if (name.rfind("gate.", 0) == 0 || name.rfind("beh.", 0) == 0) CHECK(p.grad == zero);
    if (name.rfind("lm.", 0) == 0 && !(p.grad == zero)) trunk_moved = true;
  }
  CHECK(trunk_moved);
}

TEST_CASE("independent long-double forward agrees with the model") {
  for (auto mode : {GateSource::Hidden, GateSource::Posterior}) {
    for (bool on : {true, false}) {
      auto m = tiny_gated(mode, 21);
      m.set_gating_enabled(on);
      Rng rng(22);
      auto ids = random_ids(rng, 2, 5, 20);
      ids(1, 1) = 1;
      const auto tgt = random_ids(rng, 2, 5, 20);
      const double ref = double(testing::reference_window_loss(testing::RefModel(m), ids, tgt));
      CHECK(std::abs(ref - testing::window_loss(m, ids, tgt)) < 1e-12);
    }
  }
}

TEST_CASE("full gated model gradients match finite differences") {
  for (auto mode : {GateSource::Hidden, GateSource::Posterior}) {
    auto m = tiny_gated(mode, 11);
    Rng rng(12);
    auto ids = random_ids(rng, 2, 5, 20);
    ids(0, 2) = 1;  // an eos inside the window exercises the behavior reset
    const auto tgt = random_ids(rng, 2, 5, 20);
    m.params().zero_grad();
    auto out = m.forward(ids, m.initial_state(2));
    m.backward(out.cache, lm_loss(out.steps, tgt).dlogits);
    const auto rep = testing::reference_fd_check(m, ids, tgt);
    CHECK_MESSAGE(rep.worst < 1e-5, rep.where);
    CHECK(rep.checked == m.params().scalar_count(true));
  }
}

TEST_CASE("two-layer trunk with dropout matches finite differences under a fixed mask") {
  LmDims d{12, 5, 6, 2, 4};
  auto beh = testing::random_behavior(12, 4, 3, 77);
  auto m = GatedLm::with_behavior(d, beh, GateSource::Hidden, 3);
  Rng init(13);
  m.init_uniform(init, 0.5);
  m.set_gating_enabled(true);
  Rng rng(14);
  const auto ids = random_ids(rng, 3, 4, 12), tgt = random_ids(rng, 3, 4, 12);
  m.params().zero_grad();
  Rng drop(99);
  auto out = m.forward(ids, m.initial_state(3), true, 0.3, &drop);
  m.backward(out.cache, lm_loss(out.steps, tgt).dlogits);
  const double ref = double(testing::reference_window_loss(testing::RefModel(m), ids, tgt, &out.cache));
  CHECK(std::abs(ref - lm_loss(out.steps, tgt).loss) < 1e-12);
  const auto rep = testing::reference_fd_check(m, ids, tgt, &out.cache);
  CHECK_MESSAGE(rep.worst < 1e-5, rep.where);
}

TEST_CASE("frozen branch is untouched by a train step") {
  auto m = tiny_gated(GateSource::Hidden, 15);
  const auto before = m.frozen_checksum();
  ParamStore snapshot = m.params();
  Rng rng(16);
  const auto ids = random_ids(rng, 2, 5, 20), tgt = random_ids(rng, 2, 5, 20);
  m.params().zero_grad();
  auto out = m.forward(ids, m.initial_state(2));
  m.backward(out.cache, lm_loss(out.steps, tgt).dlogits);
  for (const auto& [name, p] : m.params()) {
    if (!p.trainable) CHECK(p.grad == Matrix(p.value.rows(), p.value.cols()));
  }
  clip_global_norm(m.params(), 5.0);
  sgd_step(m.params(), 1.0);
  for (const auto& [name, p] : m.params()) {
    if (!p.trainable) CHECK(p.value == snapshot.at(name).value);
    if (name == "lm.head.b") CHECK(!(p.value == snapshot.at(name).value));
  }
  CHECK(m.frozen_checksum() == before);
}

TEST_CASE("behavior width and vocabulary are checked") {
  auto beh = testing::random_behavior(20, 7, 5, 1);
  CHECK_THROWS_AS(GatedLm::with_behavior(kTiny, beh, GateSource::Hidden, 50), LoadError);
  auto other = testing::random_behavior(21, 7, 5, 1);
  CHECK_THROWS_AS(GatedLm::with_behavior(kTiny, other, GateSource::Hidden, 5), LoadError);
  auto base = GatedLm::baseline(kTiny);
  CHECK_THROWS_AS(base.set_gating_enabled(true), ConfigError);
}

TEST_CASE("sequence loss") {
  const std::vector<StepOutput> uniform(3, StepOutput{Matrix(2, 10), Matrix(2, 4, 1.0)});
  IdMatrix tgt(2, 3, 4);
  CHECK(std::abs(lm_loss(uniform, tgt).loss - std::log(10.0)) < 1e-12);

  std::vector<StepOutput> sharp(3, StepOutput{Matrix(2, 10), Matrix(2, 4, 1.0)});
  for (auto& s : sharp) {
    s.logits(0, 4) = 1e6;
    s.logits(1, 4) = 1e6;
  }
  CHECK(lm_loss(sharp, tgt).loss < 1e-12);

  Rng rng(17);
  std::vector<StepOutput> outs;
  for (int t = 0; t < 3; ++t) outs.push_back({testing::random_matrix(rng, 2, 10, 3.0), Matrix(2, 4, 1.0)});
  const auto targets = random_ids(rng, 2, 3, 10);
  double composed = 0;
  for (std::size_t t = 0; t < 3; ++t) composed += softmax_xent(outs[t].logits, targets.column(t)).loss;
  CHECK(std::abs(lm_loss(outs, targets).loss - composed / 3.0) < 1e-12);

  IdMatrix wrong(3, 3);
  CHECK_THROWS_AS(lm_loss(outs, wrong), DimensionError);
}

}  // TEST_SUITE
