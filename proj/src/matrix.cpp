#include "malclass/matrix.hpp"

#include <algorithm>

#include "malclass/errors.hpp"

namespace malclass {

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows_) throw InvariantError("select_rows: row index out of range");
    std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(indices[i] * cols_), cols_,
                out.values_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
  }
  return out;
}

Matrix Matrix::column_block(std::size_t first, std::size_t count) const {
  if (first + count > cols_) throw InvariantError("column_block: range out of bounds");
  Matrix out(rows_, count);
  for (std::size_t r = 0; r < rows_; ++r) {
    auto src = row(r).subspan(first, count);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

Matrix Matrix::hconcat(std::span<const Matrix* const> parts) {
  if (parts.empty()) return {};
  const std::size_t rows = parts.front()->rows();
  std::size_t cols = 0;
  for (const Matrix* m : parts) {
    if (m->rows() != rows) throw InvariantError("hconcat: row counts differ");
    cols += m->cols();
  }
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    auto dst = out.row(r).begin();
    for (const Matrix* m : parts) dst = std::copy(m->row(r).begin(), m->row(r).end(), dst);
  }
  return out;
}

}  // namespace malclass
