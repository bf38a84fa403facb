#include "bglm/param_store.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bglm/rng.hpp"

namespace bglm {

// ---- Matrix ---------------------------------------------------------------

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("from_rows: ragged initializer");
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string Matrix::shape_str() const {
  return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
}

std::vector<Id> IdMatrix::column(std::size_t c) const {
  std::vector<Id> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = (*this)(r, c);
  return out;
}

void require_shape(bool ok, const char* what, const Matrix& a, const Matrix& b) {
  if (!ok) {
    throw DimensionError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
  }
}

void add_inplace(Matrix& dst, const Matrix& src) {
  require_shape(dst.same_shape(src), "add_inplace", dst, src);
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_shape(a.same_shape(b), "hadamard", a, b);
  Matrix out(a.rows(), a.cols());
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  return out;
}

double sum_squares(const Matrix& m) {
  double acc = 0.0;
  for (double v : m.data()) acc += v * v;
  return acc;
}

bool all_finite(const Matrix& m) {
  return std::all_of(m.data().begin(), m.data().end(), [](double v) { return std::isfinite(v); });
}

// ---- Rng ------------------------------------------------------------------

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) return 0;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return v % n;
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::size_t Rng::categorical_cdf(std::span<const double> cdf) {
  const double u = uniform() * cdf.back();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) --it;
  return static_cast<std::size_t>(it - cdf.begin());
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// ---- ParamStore -------------------------------------------------------------

Param& ParamStore::add(const std::string& name, Matrix value, bool trainable) {
  if (entries_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  Matrix grad(value.rows(), value.cols());
  auto [it, _] = entries_.emplace(name, Param{std::move(value), std::move(grad), trainable});
  return it->second;
}

Param& ParamStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw IndexError("unknown parameter: " + name);
  return it->second;
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw IndexError("unknown parameter: " + name);
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [_, p] : entries_) p.grad.fill(0.0);
}

std::size_t ParamStore::scalar_count(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& [_, p] : entries_) {
    if (!trainable_only || p.trainable) n += p.value.size();
  }
  return n;
}

void ParamStore::assign_values(const ParamStore& snapshot) {
  if (snapshot.size() != size()) throw DimensionError("assign_values: entry count differs");
  for (auto& [name, p] : entries_) {
    const Param& src = snapshot.at(name);
    require_shape(src.value.same_shape(p.value), name.c_str(), src.value, p.value);
    p.value = src.value;
  }
}

}  // namespace bglm
