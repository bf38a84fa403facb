#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace bglm {

/// Seeded random source. Wraps mt19937_64 and derives every variate with
/// explicit formulas so streams are identical across standard libraries
/// (the std:: distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool bernoulli(double p) { return uniform() < p; }
  // Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller (one variate per call).
  double normal();
  // Index drawn from an inclusive cumulative distribution (last entry = total mass).
  std::size_t categorical_cdf(std::span<const double> cdf);

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace bglm
