// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace ef {

/// Dense row-major matrix of doubles.
///
/// Every constructor that accepts caller data rejects NaN and Inf, so a Matrix
/// built from external values is always finite. Arithmetic helpers do not
/// re-check.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  [[nodiscard]] std::span<double> row(std::size_t r) noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  [[nodiscard]] std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  [[nodiscard]] std::span<double> values() noexcept { return data_; }
  [[nodiscard]] std::span<const double> values() const noexcept { return data_; }
  [[nodiscard]] double* data() noexcept { return data_.data(); }
  [[nodiscard]] const double* data() const noexcept { return data_.data(); }

  [[nodiscard]] bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  /// Rows selected by index, in the given order.
  [[nodiscard]] Matrix gather_rows(std::span<const std::size_t> indices) const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Throws std::invalid_argument naming `what` if the shapes differ.
void require_same_shape(const Matrix& a, const Matrix& b, const char* what);

/// Index of the largest entry of each row; ties go to the lowest index.
[[nodiscard]] std::vector<std::size_t> argmax_rows(const Matrix& m);
[[nodiscard]] std::size_t argmax(std::span<const double> values);

/// Largest |row sum - 1| over all rows.
[[nodiscard]] double max_row_sum_error(const Matrix& m);

namespace linalg {

// out = a * b^T      (a: n x k, b: m x k)
[[nodiscard]] Matrix mul_abt(const Matrix& a, const Matrix& b);
// out = a^T * b      (a: n x m, b: n x k)
[[nodiscard]] Matrix mul_atb(const Matrix& a, const Matrix& b);
// out = a * b        (a: n x k, b: k x m)
[[nodiscard]] Matrix mul_ab(const Matrix& a, const Matrix& b);

}  // namespace linalg

}  // namespace ef
