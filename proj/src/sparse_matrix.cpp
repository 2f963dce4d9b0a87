#include "syncml/sparse_matrix.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "syncml/error.hpp"

namespace syncml {

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> col_ptr,
                           std::vector<Index> row_idx, std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      col_ptr_(std::move(col_ptr)),
      row_idx_(std::move(row_idx)),
      values_(std::move(values)) {
  if (rows_ > std::numeric_limits<Index>::max() || cols_ > std::numeric_limits<Index>::max())
    throw DimensionError("matrix dimensions exceed 32-bit index range");
  if (col_ptr_.size() != cols_ + 1) throw DimensionError("col_ptr must have n_cols+1 entries");
  if (col_ptr_.front() != 0) throw DimensionError("col_ptr[0] must be 0");
  if (row_idx_.size() != values_.size())
    throw DimensionError("row_idx and values differ in length");
  if (col_ptr_.back() != values_.size()) throw DimensionError("col_ptr[n_cols] must equal nnz");
  for (std::size_t j = 0; j < cols_; ++j) {
    if (col_ptr_[j + 1] < col_ptr_[j]) throw DimensionError("col_ptr must be nondecreasing");
    for (std::size_t p = col_ptr_[j]; p < col_ptr_[j + 1]; ++p) {
      if (row_idx_[p] >= rows_)
        throw DimensionError("row index out of range in column " + std::to_string(j));
      if (p > col_ptr_[j] && row_idx_[p] <= row_idx_[p - 1])
        throw DimensionError("row indices not strictly increasing in column " +
                             std::to_string(j));
    }
  }
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> entries) {
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.col != b.col ? a.col < b.col : a.row < b.row;
  });
  std::vector<std::size_t> col_ptr(cols + 1, 0);
  std::vector<Index> row_idx;
  std::vector<double> values;
  row_idx.reserve(entries.size());
  values.reserve(entries.size());
  for (const auto& t : entries) {
    if (t.col >= cols || t.row >= rows) throw DimensionError("triplet out of range");
    ++col_ptr[t.col + 1];
    row_idx.push_back(t.row);
    values.push_back(t.value);
  }
  for (std::size_t j = 0; j < cols; ++j) col_ptr[j + 1] += col_ptr[j];
  return SparseMatrix(rows, cols, std::move(col_ptr), std::move(row_idx), std::move(values));
}

SparseMatrix SparseMatrix::from_dense(std::size_t rows, std::size_t cols,
                                      std::span<const double> row_major) {
  if (row_major.size() != rows * cols) throw DimensionError("dense buffer size mismatch");
  std::vector<std::size_t> col_ptr(cols + 1, 0);
  std::vector<Index> row_idx;
  std::vector<double> values;
  for (std::size_t j = 0; j < cols; ++j) {
    for (std::size_t i = 0; i < rows; ++i) {
      const double x = row_major[i * cols + j];
      if (x != 0.0) {
        row_idx.push_back(static_cast<Index>(i));
        values.push_back(x);
      }
    }
    col_ptr[j + 1] = values.size();
  }
  return SparseMatrix(rows, cols, std::move(col_ptr), std::move(row_idx), std::move(values));
}

SparseMatrix SparseMatrix::transposed() const {
  std::vector<std::size_t> ptr(rows_ + 1, 0);
  for (Index r : row_idx_) ++ptr[r + 1];
  for (std::size_t i = 0; i < rows_; ++i) ptr[i + 1] += ptr[i];
  std::vector<Index> idx(nnz());
  std::vector<double> val(nnz());
  std::vector<std::size_t> next(ptr.begin(), ptr.end() - 1);
  // Walking columns in order keeps the output row indices sorted.
  for (std::size_t j = 0; j < cols_; ++j) {
    for (std::size_t p = col_ptr_[j]; p < col_ptr_[j + 1]; ++p) {
      const auto dst = next[row_idx_[p]]++;
      idx[dst] = static_cast<Index>(j);
      val[dst] = values_[p];
    }
  }
  return SparseMatrix(cols_, rows_, std::move(ptr), std::move(idx), std::move(val));
}

SparseMatrix SparseMatrix::select_columns(std::span<const Index> cols) const {
  std::vector<std::size_t> ptr(cols.size() + 1, 0);
  std::size_t total = 0;
  for (std::size_t k = 0; k < cols.size(); ++k) {
    if (cols[k] >= cols_) throw DimensionError("column id out of range");
    total += col_nnz(cols[k]);
    ptr[k + 1] = total;
  }
  std::vector<Index> idx;
  std::vector<double> val;
  idx.reserve(total);
  val.reserve(total);
  for (Index c : cols) {
    const auto begin = col_ptr_[c];
    const auto end = col_ptr_[c + 1];
    idx.insert(idx.end(), row_idx_.begin() + begin, row_idx_.begin() + end);
    val.insert(val.end(), values_.begin() + begin, values_.begin() + end);
  }
  return SparseMatrix(rows_, cols.size(), std::move(ptr), std::move(idx), std::move(val));
}

SparseMatrix SparseMatrix::select_rows(std::span<const Index> rows) const {
  constexpr Index kAbsent = std::numeric_limits<Index>::max();
  std::vector<Index> remap(rows_, kAbsent);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= rows_) throw DimensionError("row id out of range");
    remap[rows[k]] = static_cast<Index>(k);
  }
  std::vector<std::size_t> ptr(cols_ + 1, 0);
  std::vector<Index> idx;
  std::vector<double> val;
  std::vector<std::pair<Index, double>> scratch;
  for (std::size_t j = 0; j < cols_; ++j) {
    scratch.clear();
    for (std::size_t p = col_ptr_[j]; p < col_ptr_[j + 1]; ++p) {
      const Index r = remap[row_idx_[p]];
      if (r != kAbsent) scratch.emplace_back(r, values_[p]);
    }
    std::sort(scratch.begin(), scratch.end());
    for (const auto& [r, v] : scratch) {
      idx.push_back(r);
      val.push_back(v);
    }
    ptr[j + 1] = idx.size();
  }
  return SparseMatrix(rows.size(), cols_, std::move(ptr), std::move(idx), std::move(val));
}

void SparseMatrix::multiply(std::span<const double> x, std::span<double> out) const {
  if (x.size() != cols_ || out.size() != rows_) throw DimensionError("multiply: size mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t j = 0; j < cols_; ++j) {
    if (x[j] != 0.0) axpy(x[j], column(j), out);
  }
}

void SparseMatrix::multiply_transpose(std::span<const double> x, std::span<double> out) const {
  if (x.size() != rows_ || out.size() != cols_)
    throw DimensionError("multiply_transpose: size mismatch");
  for (std::size_t j = 0; j < cols_; ++j) out[j] = dot(column(j), x);
}

std::vector<double> SparseMatrix::column_sqnorms() const {
  std::vector<double> out(cols_, 0.0);
  for (std::size_t j = 0; j < cols_; ++j) {
    double s = 0.0;
    for (std::size_t p = col_ptr_[j]; p < col_ptr_[j + 1]; ++p) s += values_[p] * values_[p];
    out[j] = s;
  }
  return out;
}

std::vector<std::size_t> SparseMatrix::row_nnz() const {
  std::vector<std::size_t> out(rows_, 0);
  for (Index r : row_idx_) ++out[r];
  return out;
}

std::vector<double> SparseMatrix::to_dense() const {
  std::vector<double> out(rows_ * cols_, 0.0);
  for (std::size_t j = 0; j < cols_; ++j)
    for (std::size_t p = col_ptr_[j]; p < col_ptr_[j + 1]; ++p)
      out[row_idx_[p] * cols_ + j] = values_[p];
  return out;
}

}  // namespace syncml
