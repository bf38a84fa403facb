#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "bglm/errors.hpp"

namespace bglm {

using Id = std::int32_t;

/// Dense row-major matrix of doubles. Every real-valued tensor in the
/// toolkit (activations, parameters, gradients, logits) is one of these.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  void fill(double v);
  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  std::string shape_str() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Dense row-major matrix of token ids (B×T windows, label-free).
struct IdMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Id> data;

  IdMatrix() = default;
  IdMatrix(std::size_t r, std::size_t c, Id fill = 0) : rows(r), cols(c), data(r * c, fill) {}

  Id& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  Id operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::vector<Id> column(std::size_t c) const;

  friend bool operator==(const IdMatrix&, const IdMatrix&) = default;
};

// Throws DimensionError naming both shapes unless `ok`.
void require_shape(bool ok, const char* what, const Matrix& a, const Matrix& b);

// Elementwise helpers used by the layer code.
void add_inplace(Matrix& dst, const Matrix& src);
Matrix hadamard(const Matrix& a, const Matrix& b);
double sum_squares(const Matrix& m);
bool all_finite(const Matrix& m);

}  // namespace bglm
