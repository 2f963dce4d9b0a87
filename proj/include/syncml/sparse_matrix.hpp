#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace syncml {

using Index = std::uint32_t;

struct Triplet {
  Index row;
  Index col;
  double value;
};

// Column-compressed sparse matrix. Columns are the features c_i, rows the
// samples r_i. The row-compressed view of A is obtained as transposed():
// the CSC layout of A^T is the CSR layout of A.
class SparseMatrix {
 public:
  struct Column {
    std::span<const Index> rows;
    std::span<const double> values;
    std::size_t nnz() const { return rows.size(); }
  };

  SparseMatrix() : col_ptr_(1, 0) {}

  // Validates every layout invariant; throws DimensionError on violation.
  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> col_ptr,
               std::vector<Index> row_idx, std::vector<double> values);

  // Entries may come in any order; duplicates are rejected.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<Triplet> entries);

  // Row-major dense input, mostly for tests. Zeros are not stored.
  static SparseMatrix from_dense(std::size_t rows, std::size_t cols,
                                 std::span<const double> row_major);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  std::span<const std::size_t> col_ptr() const { return col_ptr_; }
  std::span<const Index> row_idx() const { return row_idx_; }
  std::span<const double> values() const { return values_; }

  Column column(std::size_t j) const {
    const auto begin = col_ptr_[j];
    const auto len = col_ptr_[j + 1] - begin;
    return {std::span<const Index>(row_idx_).subspan(begin, len),
            std::span<const double>(values_).subspan(begin, len)};
  }
  std::size_t col_nnz(std::size_t j) const { return col_ptr_[j + 1] - col_ptr_[j]; }

  SparseMatrix transposed() const;

  // Keeps the listed columns in the given order; the row dimension is preserved.
  SparseMatrix select_columns(std::span<const Index> cols) const;

  // Keeps the listed rows (renumbered 0..k-1 in the given order); the column
  // dimension is preserved.
  SparseMatrix select_rows(std::span<const Index> rows) const;

  // out = A x
  void multiply(std::span<const double> x, std::span<double> out) const;
  // out = A^T x
  void multiply_transpose(std::span<const double> x, std::span<double> out) const;

  std::vector<double> column_sqnorms() const;
  std::vector<std::size_t> row_nnz() const;

  std::vector<double> to_dense() const;  // row-major

  bool operator==(const SparseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> col_ptr_;
  std::vector<Index> row_idx_;
  std::vector<double> values_;
};

inline double dot(SparseMatrix::Column c, std::span<const double> x) {
  double s = 0.0;
  for (std::size_t p = 0; p < c.rows.size(); ++p) s += c.values[p] * x[c.rows[p]];
  return s;
}

inline void axpy(double a, SparseMatrix::Column c, std::span<double> x) {
  for (std::size_t p = 0; p < c.rows.size(); ++p) x[c.rows[p]] += a * c.values[p];
}

}  // namespace syncml
