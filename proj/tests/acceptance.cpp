// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails. Pass criterion names as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bglm/checkpoint.hpp"
#include "bglm/cli.hpp"
#include "bglm/ops.hpp"
#include "bglm/training.hpp"
#include "lm_fixtures.hpp"
#include "reference_lm.hpp"

using namespace bglm;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---- shared synthetic experiment ------------------------------------------------

// Model sizes for the gated-vs-baseline comparison. Both models share the same
// LM trunk; the gated one adds the frozen classifier and the gate RNN.
TrainConfig comparison_config() {
  TrainConfig c;
  c.epochs = 15;
  c.batch_size = 20;
  c.bptt_len = 20;
  c.lr_initial = 3.0;
  c.lr_decay = 0.7;
  c.decay_start_epoch = 8;
  c.clip_norm = 5.0;
  c.init_range = 0.08;
  c.mode = GateSource::Posterior;
  c.dims = {0, 32, 64, 1, 32};
  c.behavior_hidden = 50;
  return c;
}

struct Experiment {
  SynthConfig synth;
  SynthCorpus corpus;
  EntropyBounds bounds;
  std::optional<BehaviorTrainResult> behavior;
  double behavior_seconds = 0;
  BehaviorEval behavior_test;
};

Experiment& experiment() {
  static Experiment e = [] {
    Experiment x;
    x.corpus = synth_generate(x.synth);
    x.bounds = entropy_oracle(x.synth);
    return x;
  }();
  return e;
}

const BehaviorNet& trained_behavior() {
  auto& e = experiment();
  if (!e.behavior) {
    const auto t0 = Clock::now();
    const BehaviorDims dims{e.corpus.vocab.size(), 50, 50};
    e.behavior = train_behavior(dims, e.corpus.train, e.corpus.valid, BehaviorTrainConfig{});
    e.behavior_test = eval_behavior(e.behavior->best, e.corpus.test);
    e.behavior_seconds = seconds_since(t0);
  }
  return e.behavior->best;
}

LmData synthetic_lm_data() {
  const auto& c = experiment().corpus;
  return {c.vocab.size(), c.train.stream(), c.valid.stream(), c.test.stream()};
}

struct ComparisonRun {
  std::uint64_t seed;
  RunMetrics base, gated;
  bool frozen_values_equal = false;
};

struct Comparison {
  std::vector<ComparisonRun> runs;
  double seconds = 0;
};

const Comparison& comparison() {
  static std::optional<Comparison> cached;
  if (cached) return *cached;
  const auto& beh = trained_behavior();
  const auto t0 = Clock::now();
  Comparison cmp;
  const auto data = synthetic_lm_data();
  for (std::uint64_t seed : {1, 2, 3}) {
    ComparisonRun run{seed, {}, {}, true};
    auto cfg = comparison_config();
    cfg.seed = seed;
    run.base = train_lm(cfg, data, nullptr).metrics;
    cfg.gating_enabled = true;
    auto gated = train_lm(cfg, data, &beh);
    for (const auto& [name, p] : beh.params()) {
      run.frozen_values_equal = run.frozen_values_equal && gated.model.params().at(name).value == p.value;
    }
    run.gated = std::move(gated.metrics);
    std::printf("  seed %llu: baseline test ppl %.4f (valid %.4f), gated test ppl %.4f (valid %.4f)\n",
                static_cast<unsigned long long>(seed), run.base.test_ppl, run.base.best_valid_ppl,
                run.gated.test_ppl, run.gated.best_valid_ppl);
    std::fflush(stdout);
    cmp.runs.push_back(std::move(run));
  }
  cmp.seconds = seconds_since(t0);
  cached = std::move(cmp);
  return *cached;
}

double median3(double a, double b, double c) { return std::max(std::min(a, b), std::min(std::max(a, b), c)); }

// ---- criteria -------------------------------------------------------------------

Outcome gradient_check() {
  const auto t0 = Clock::now();
  const LmDims dims{20, 8, 8, 1, 6};
  double worst = 0;
  std::string where;
  std::size_t checked = 0;
  for (auto mode : {GateSource::Hidden, GateSource::Posterior}) {
    const auto beh = testing::random_behavior(20, 50, 50, 5, 0.3);
    auto m = GatedLm::with_behavior(dims, beh, mode, 50);
    Rng init(17);
    m.init_uniform(init, 0.3);
    m.set_gating_enabled(true);
    Rng rng(18);
    auto ids = testing::random_ids(rng, 2, 5, 20);
    ids(1, 2) = 1;  // eos mid-window
    const auto tgt = testing::random_ids(rng, 2, 5, 20);
    m.params().zero_grad();
    auto out = m.forward(ids, m.initial_state(2));
    m.backward(out.cache, lm_loss(out.steps, tgt).dlogits);
    const auto rep = testing::reference_fd_check(m, ids, tgt);
    checked += rep.checked;
    if (rep.worst >= worst) {
      worst = rep.worst;
      where = rep.where;
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-5 && secs < 60.0,
          fmt("%zu trainable entries (hidden+posterior), worst rel err %.3e at %s, %.1fs (limit 60s)", checked, worst,
              where.c_str(), secs)};
}

Outcome gating_off_reduction() {
  Rng cfg_rng(2718);
  std::size_t identical = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const LmDims d{3 + cfg_rng.below(38), 1 + cfg_rng.below(12), 1 + cfg_rng.below(12), 1 + cfg_rng.below(3),
                   1 + cfg_rng.below(8)};
    const std::size_t bh = 1 + cfg_rng.below(10), be = 1 + cfg_rng.below(10);
    const std::size_t B = 1 + cfg_rng.below(4), T = 1 + cfg_rng.below(8);
    const auto mode = cfg_rng.bernoulli(0.5) ? GateSource::Hidden : GateSource::Posterior;
    const auto beh = testing::random_behavior(d.vocab, be, bh, cfg_rng.next_u64());
    auto gated = GatedLm::with_behavior(d, beh, mode, bh);
    Rng init(cfg_rng.next_u64());
    gated.init_uniform(init, 0.5);
    gated.set_gating_enabled(false);
    auto base = GatedLm::baseline(d);
    testing::copy_trunk(gated, base);

    bool same = true;
    auto cg = gated.initial_state(B);
    auto cb = base.initial_state(B);
    for (int w = 0; w < 2; ++w) {
      const auto ids = testing::random_ids(cfg_rng, B, T, d.vocab), tgt = testing::random_ids(cfg_rng, B, T, d.vocab);
      auto og = gated.forward(ids, cg);
      auto ob = base.forward(ids, cb);
      for (std::size_t t = 0; t < T; ++t) same = same && og.steps[t].logits == ob.steps[t].logits;
      same = same && lm_loss(og.steps, tgt).loss == lm_loss(ob.steps, tgt).loss;
      gated.params().zero_grad();
      base.params().zero_grad();
      gated.backward(og.cache, lm_loss(og.steps, tgt).dlogits);
      base.backward(ob.cache, lm_loss(ob.steps, tgt).dlogits);
      for (const auto& [name, p] : base.params()) same = same && gated.params().at(name).grad == p.grad;
      cg = std::move(og.carry);
      cb = std::move(ob.carry);
    }
    identical += same;
  }
  return {identical == 100, fmt("%zu/100 random configurations bit-identical (logits, loss, trunk grads)", identical)};
}

Outcome frozen_checksum() {
  const auto& cmp = comparison();
  std::size_t ok = 0;
  std::string first;
  for (const auto& r : cmp.runs) {
    const bool same = !r.gated.frozen_checksum_before.empty() &&
                      r.gated.frozen_checksum_before == r.gated.frozen_checksum_after && r.frozen_values_equal;
    ok += same;
    if (first.empty()) first = r.gated.frozen_checksum_before.substr(0, 16);
  }
  return {ok == cmp.runs.size(),
          fmt("%zu/%zu gated training runs keep SHA-256 %s... and every frozen value", ok, cmp.runs.size(),
              first.c_str())};
}

Outcome perplexity_sanity() {
  // Untrained model with a zeroed softmax head: every prediction is uniform.
  const auto data = synthetic_lm_data();
  const auto& beh = trained_behavior();
  double worst = 0;
  for (bool gated : {false, true}) {
    auto cfg = comparison_config();
    cfg.gating_enabled = gated;
    auto m = make_initial_model(cfg, data.vocab, gated ? &beh : nullptr);
    m.params().at("lm.head.w").value.fill(0.0);
    m.params().at("lm.head.b").value.fill(0.0);
    const double ppl = evaluate_perplexity(m, data.test, 20, 20).ppl;
    worst = std::max(worst, std::abs(ppl - double(data.vocab)));
  }

  // Overfit a 100-token corpus.
  const auto& seqs = experiment().corpus.train.sequences;
  std::vector<Id> toy;
  for (const auto& s : seqs) {
    for (Id id : s) {
      if (toy.size() < 100) toy.push_back(id);
    }
  }
  TrainConfig cfg;
  cfg.epochs = 150;
  cfg.batch_size = 1;
  cfg.bptt_len = 11;
  cfg.lr_initial = 1.0;
  cfg.lr_decay = 1.0;
  cfg.decay_start_epoch = 0;
  cfg.init_range = 0.1;
  cfg.dims = {0, 32, 64, 1, 8};
  const auto run = train_lm(cfg, LmData{data.vocab, toy, toy, toy}, nullptr);
  const double train_ppl = run.metrics.epochs.back().train_ppl;
  return {worst <= 1e-9 && train_ppl < 1.2,
          fmt("zero-head |ppl - %zu| = %.2e (limit 1e-9); 100-token overfit train ppl %.4f after %zu epochs (limit 1.2)",
              data.vocab, worst, train_ppl, cfg.epochs)};
}

Outcome behavior_f1() {
  trained_behavior();
  const auto& e = experiment();
  const auto& f = e.behavior_test.per_behavior_f1;
  return {e.behavior_test.macro_f1 >= 0.9 && e.behavior_seconds < 600.0,
          fmt("held-out macro-F1 %.4f (per behavior %.3f %.3f %.3f %.3f %.3f; limit >= 0.9), best epoch %zu, "
              "%.0fs (limit 600s)",
              e.behavior_test.macro_f1, f[0], f[1], f[2], f[3], f[4], e.behavior->best_epoch, e.behavior_seconds)};
}

Outcome gated_vs_baseline() {
  const auto& cmp = comparison();
  const auto& b = experiment().bounds;
  const auto& r = cmp.runs;
  const double base = median3(r[0].base.test_ppl, r[1].base.test_ppl, r[2].base.test_ppl);
  const double gated = median3(r[0].gated.test_ppl, r[1].gated.test_ppl, r[2].gated.test_ppl);
  const double improvement = relative_improvement(base, gated);
  const double limit = 1.15 * b.ppl_bound_conditional;
  const bool base_near_marginal =
      std::abs(base - b.ppl_bound_marginal) < std::abs(base - b.ppl_bound_conditional);
  const double total = cmp.seconds + experiment().behavior_seconds;
  return {improvement >= 2.0 && gated <= limit && base_near_marginal && total < 1800.0,
          fmt("median test ppl baseline %.4f (%zu params) vs gated %.4f (%zu params, %zu trainable): "
              "improvement %.2f%% (limit >= 2%%); gated limit %.2f (bounds: conditional %.4f, marginal %.4f); "
              "baseline nearer marginal: %s; %.0fs (limit 1800s)",
              base, r[0].base.param_count, gated, r[0].gated.param_count, r[0].gated.trainable_count, improvement,
              limit, b.ppl_bound_conditional, b.ppl_bound_marginal, base_near_marginal ? "yes" : "no", total)};
}

Outcome relative_improvement_pairs() {
  struct Case {
    double base, gated, expected;
  };
  const Case cases[] = {{66.32, 64.71, 2.43}, {159.65, 148.78, 6.81}, {60.0, 59.15, 1.42}, {57.3, 56.92, 0.66}};
  bool ok = true;
  std::string detail;
  for (const auto& c : cases) {
    const double v = relative_improvement(c.base, c.gated);
    ok = ok && std::abs(v - c.expected) <= 0.01;
    detail += fmt("(%.2f, %.2f) -> %.4f [%.2f] ", c.base, c.gated, v, c.expected);
  }
  return {ok, detail + "(tolerance 0.01)"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
  const auto root = fs::temp_directory_path() / "bglm_acceptance_determinism";
  fs::remove_all(root);
  const char* config =
      "n_sequences = 400\nseq_len = 20\n"
      "beh_epochs = 2\nbeh_embed_dim = 16\nbeh_hidden_dim = 50\n"
      "epochs = 2\nbatch_size = 10\nbptt_len = 10\ndropout_p = 0.2\n"
      "embed_dim = 16\nhidden_dim = 24\ngate_dim = 12\ngating_enabled = true\nmode = posterior\n";
  std::vector<std::string> artifacts;
  for (const char* run : {"a", "b"}) {
    const auto dir = root / run;
    fs::create_directories(dir);
    std::ofstream(dir / "pipeline.cfg") << config;
    const auto cfg = (dir / "pipeline.cfg").string(), corpus = (dir / "corpus").string();
    std::ostringstream out, err;
    const std::vector<std::vector<std::string>> steps{
        {"synth", "--config", cfg, "--out-dir", corpus},
        {"train-behavior", "--config", cfg, "--corpus", corpus, "--out", (dir / "beh.bglm").string()},
        {"train-lm", "--config", cfg, "--corpus", corpus, "--behavior-ckpt", (dir / "beh.bglm").string(), "--out",
         (dir / "lm.bglm").string()}};
    for (const auto& s : steps) {
      if (run_cli(s, out, err) != 0) return {false, "pipeline step '" + s[0] + "' failed: " + err.str()};
    }
  }
  const char* files[] = {"corpus/train.txt", "corpus/train.labels", "corpus/vocab.txt",  "beh.bglm",
                         "beh.bglm.metrics.jsonl", "lm.bglm", "lm.bglm.metrics.jsonl"};
  std::size_t same = 0, n = 0, bytes = 0;
  for (const char* f : files) {
    const auto a = slurp(root / "a" / f), b = slurp(root / "b" / f);
    ++n;
    same += !a.empty() && a == b;
    bytes += a.size();
  }
  return {same == n, fmt("%zu/%zu artifacts byte-identical across two seeded pipeline runs (%zu bytes compared)", same,
                         n, bytes)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient-check", gradient_check},
      {"gating-off-reduction", gating_off_reduction},
      {"relative-improvement", relative_improvement_pairs},
      {"determinism", determinism},
      {"behavior-f1", behavior_f1},
      {"perplexity-sanity", perplexity_sanity},
      {"gated-vs-baseline", gated_vs_baseline},
      {"frozen-checksum", frozen_checksum},
  };
  std::set<std::string> only(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
