#pragma once

#include <cstddef>
#include <span>

// Dense inner loops behind the affine layers. Two implementations with
// identical signatures and identical per-element summation order:
//
//   bglm::kernels            OpenMP, parallel over output rows
//   bglm::kernels::reference serial, kept as the test oracle and benchmark baseline
//
// Because every output element is reduced by exactly one thread in the same
// order as the serial loop, the two paths agree bit-for-bit.
//
// Shapes: x is [n×in], w is [in×out], dy is [n×out], all row-major.

namespace bglm::kernels {

// y = x·w + bias (bias broadcast over rows; may be empty for no bias).
void affine(std::span<const double> x, std::span<const double> w, std::span<const double> bias,
            std::span<double> y, std::size_t n, std::size_t in, std::size_t out);

// dw += xᵀ·dy
void accumulate_xt_dy(std::span<const double> x, std::span<const double> dy, std::span<double> dw,
                      std::size_t n, std::size_t in, std::size_t out);

// db += column sums of dy
void accumulate_colsum(std::span<const double> dy, std::span<double> db, std::size_t n,
                       std::size_t out);

// dx = dy·wᵀ (overwrites dx)
void dy_wt(std::span<const double> dy, std::span<const double> w, std::span<double> dx,
           std::size_t n, std::size_t in, std::size_t out);

// Work (multiply-adds) below which the OpenMP path runs inline.
inline constexpr std::size_t kParallelThreshold = 1u << 15;

namespace reference {

void affine(std::span<const double> x, std::span<const double> w, std::span<const double> bias,
            std::span<double> y, std::size_t n, std::size_t in, std::size_t out);
void accumulate_xt_dy(std::span<const double> x, std::span<const double> dy, std::span<double> dw,
                      std::size_t n, std::size_t in, std::size_t out);
void accumulate_colsum(std::span<const double> dy, std::span<double> db, std::size_t n,
                       std::size_t out);
void dy_wt(std::span<const double> dy, std::span<const double> w, std::span<double> dx,
           std::size_t n, std::size_t in, std::size_t out);

}  // namespace reference
}  // namespace bglm::kernels
