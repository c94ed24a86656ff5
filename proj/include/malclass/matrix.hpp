#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace malclass {

/// Dense row-major table of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  /// Rows in the given order (indices may repeat).
  Matrix select_rows(std::span<const std::size_t> indices) const;

  /// Columns [first, first + count).
  Matrix column_block(std::size_t first, std::size_t count) const;

  /// Side-by-side concatenation; all parts must have equal row counts.
  static Matrix hconcat(std::span<const Matrix* const> parts);

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

}  // namespace malclass
