#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "stochlyap/system.hpp"

namespace stochlyap {

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Compressed sparse row matrix with sorted, duplicate-free columns per row.
/// Products use a fixed summation order, so results are reproducible bit for bit.
class SparseMatrix {
 public:
  struct Entry {
    std::size_t col;
    double value;
  };

  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols);

  /// Duplicates are summed; exact zeros are dropped.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets);
  /// Each row's entries must already be sorted by column with no duplicates.
  static SparseMatrix from_rows(std::size_t cols, const std::vector<std::vector<Entry>>& rows);
  static SparseMatrix from_dense(const std::vector<std::vector<double>>& dense);
  static SparseMatrix identity(std::size_t n);

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] std::size_t nnz() const noexcept { return values_.size(); }

  [[nodiscard]] std::span<const std::size_t> row_cols(std::size_t i) const;
  [[nodiscard]] std::span<const double> row_values(std::size_t i) const;

  [[nodiscard]] double at(std::size_t i, std::size_t j) const;
  [[nodiscard]] double row_sum(std::size_t i) const;

  /// Row-vector action mu * A (measures are pushed forward).
  [[nodiscard]] Vector left_multiply(std::span<const double> mu) const;
  /// Column action A * f (observables are pulled back).
  [[nodiscard]] Vector right_multiply(std::span<const double> f) const;

  [[nodiscard]] SparseMatrix multiply(const SparseMatrix& rhs) const;
  [[nodiscard]] SparseMatrix transpose() const;
  [[nodiscard]] std::vector<std::vector<double>> to_dense() const;

  [[nodiscard]] const std::vector<std::size_t>& row_pointers() const noexcept { return row_ptr_; }
  [[nodiscard]] const std::vector<std::size_t>& column_indices() const noexcept { return col_idx_; }
  [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }

  friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
};

}  // namespace stochlyap
