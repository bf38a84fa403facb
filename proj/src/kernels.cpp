#include "bglm/kernels.hpp"

#include <algorithm>
#include <cstdint>

namespace bglm::kernels {

namespace {
bool wide(std::size_t n, std::size_t in, std::size_t out) {
  return n * in * out >= kParallelThreshold;
}
}  // namespace

void affine(std::span<const double> x, std::span<const double> w, std::span<const double> bias,
            std::span<double> y, std::size_t n, std::size_t in, std::size_t out) {
  const double* xp = x.data();
  const double* wp = w.data();
  const double* bp = bias.empty() ? nullptr : bias.data();
  double* yp = y.data();
  const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (wide(n, in, out))
  for (std::int64_t r = 0; r < rows; ++r) {
    double* yr = yp + r * out;
    if (bp) {
      std::copy(bp, bp + out, yr);
    } else {
      std::fill(yr, yr + out, 0.0);
    }
    const double* xr = xp + r * in;
    for (std::size_t k = 0; k < in; ++k) {
      const double a = xr[k];
      const double* wk = wp + k * out;
      for (std::size_t c = 0; c < out; ++c) yr[c] += a * wk[c];
    }
  }
}

void accumulate_xt_dy(std::span<const double> x, std::span<const double> dy, std::span<double> dw,
                      std::size_t n, std::size_t in, std::size_t out) {
  const double* xp = x.data();
  const double* gp = dy.data();
  double* dwp = dw.data();
  const auto inputs = static_cast<std::int64_t>(in);
  // Each thread owns whole rows of dw; rows of dy are visited in order.
#pragma omp parallel for schedule(static) if (wide(n, in, out))
  for (std::int64_t k = 0; k < inputs; ++k) {
    double* dwk = dwp + k * out;
    for (std::size_t r = 0; r < n; ++r) {
      const double a = xp[r * in + k];
      const double* gr = gp + r * out;
      for (std::size_t c = 0; c < out; ++c) dwk[c] += a * gr[c];
    }
  }
}

void accumulate_colsum(std::span<const double> dy, std::span<double> db, std::size_t n,
                       std::size_t out) {
  const double* gp = dy.data();
  double* dbp = db.data();
  const auto cols = static_cast<std::int64_t>(out);
#pragma omp parallel for schedule(static) if (n * out >= kParallelThreshold)
  for (std::int64_t c = 0; c < cols; ++c) {
    double acc = dbp[c];
    for (std::size_t r = 0; r < n; ++r) acc += gp[r * out + c];
    dbp[c] = acc;
  }
}

void dy_wt(std::span<const double> dy, std::span<const double> w, std::span<double> dx,
           std::size_t n, std::size_t in, std::size_t out) {
  const double* gp = dy.data();
  const double* wp = w.data();
  double* dxp = dx.data();
  const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (wide(n, in, out))
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* gr = gp + r * out;
    double* dxr = dxp + r * in;
    for (std::size_t k = 0; k < in; ++k) {
      const double* wk = wp + k * out;
      double acc = 0.0;
      for (std::size_t c = 0; c < out; ++c) acc += gr[c] * wk[c];
      dxr[k] = acc;
    }
  }
}

namespace reference {

void affine(std::span<const double> x, std::span<const double> w, std::span<const double> bias,
            std::span<double> y, std::size_t n, std::size_t in, std::size_t out) {
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < out; ++c) y[r * out + c] = bias.empty() ? 0.0 : bias[c];
    for (std::size_t k = 0; k < in; ++k) {
      for (std::size_t c = 0; c < out; ++c) y[r * out + c] += x[r * in + k] * w[k * out + c];
    }
  }
}

void accumulate_xt_dy(std::span<const double> x, std::span<const double> dy, std::span<double> dw,
                      std::size_t n, std::size_t in, std::size_t out) {
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < in; ++k) {
      for (std::size_t c = 0; c < out; ++c) dw[k * out + c] += x[r * in + k] * dy[r * out + c];
    }
  }
}

void accumulate_colsum(std::span<const double> dy, std::span<double> db, std::size_t n,
                       std::size_t out) {
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < out; ++c) db[c] += dy[r * out + c];
  }
}

void dy_wt(std::span<const double> dy, std::span<const double> w, std::span<double> dx,
           std::size_t n, std::size_t in, std::size_t out) {
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < in; ++k) {
      double acc = 0.0;
      for (std::size_t c = 0; c < out; ++c) acc += dy[r * out + c] * w[k * out + c];
      dx[r * in + k] = acc;
    }
  }
}

}  // namespace reference
}  // namespace bglm::kernels
