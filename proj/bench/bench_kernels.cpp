// Serial reference kernels vs the OpenMP versions on LM-shaped problems.
// Args: {rows n, in, out}; rows = batch, in/out = layer widths.

#include <benchmark/benchmark.h>

#include <vector>

#include "bglm/kernels.hpp"
#include "bglm/rng.hpp"

namespace {

namespace k = bglm::kernels;

struct Problem {
  std::size_t n, in, out;
  std::vector<double> x, w, bias, y, dy, dw, dx;

  Problem(std::size_t n_, std::size_t in_, std::size_t out_)
      : n(n_), in(in_), out(out_), x(n * in), w(in * out), bias(out), y(n * out), dy(n * out),
        dw(in * out), dx(n * in) {
    bglm::Rng rng(7);
    for (auto* v : {&x, &w, &bias, &dy}) {
      for (double& e : *v) e = rng.uniform(-1.0, 1.0);
    }
  }
};

Problem make(const benchmark::State& s) {
  return Problem(std::size_t(s.range(0)), std::size_t(s.range(1)), std::size_t(s.range(2)));
}

template <auto Fn>
void bm_affine(benchmark::State& s) {
  auto p = make(s);
  for (auto _ : s) {
    Fn(p.x, p.w, p.bias, p.y, p.n, p.in, p.out);
    benchmark::DoNotOptimize(p.y.data());
  }
  s.SetItemsProcessed(s.iterations() * std::int64_t(p.n * p.in * p.out));
}

template <auto Fn>
void bm_xt_dy(benchmark::State& s) {
  auto p = make(s);
  for (auto _ : s) {
    Fn(p.x, p.dy, p.dw, p.n, p.in, p.out);
    benchmark::DoNotOptimize(p.dw.data());
  }
  s.SetItemsProcessed(s.iterations() * std::int64_t(p.n * p.in * p.out));
}

template <auto Fn>
void bm_dy_wt(benchmark::State& s) {
  auto p = make(s);
  for (auto _ : s) {
    Fn(p.dy, p.w, p.dx, p.n, p.in, p.out);
    benchmark::DoNotOptimize(p.dx.data());
  }
  s.SetItemsProcessed(s.iterations() * std::int64_t(p.n * p.in * p.out));
}

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({20, 32, 256});    // LSTM input projection, E=32, 4H=256
  b->Args({20, 64, 1000});   // softmax head on a 1k vocabulary
  b->Args({20, 650, 2600});  // medium PTB-scale layer
}

}  // namespace

BENCHMARK(bm_affine<k::reference::affine>)->Apply(shapes);
BENCHMARK(bm_affine<k::affine>)->Apply(shapes);
BENCHMARK(bm_xt_dy<k::reference::accumulate_xt_dy>)->Apply(shapes);
BENCHMARK(bm_xt_dy<k::accumulate_xt_dy>)->Apply(shapes);
BENCHMARK(bm_dy_wt<k::reference::dy_wt>)->Apply(shapes);
BENCHMARK(bm_dy_wt<k::dy_wt>)->Apply(shapes);

BENCHMARK_MAIN();
