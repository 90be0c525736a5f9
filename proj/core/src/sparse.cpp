#include "stochlyap/sparse.hpp"

#include <algorithm>
#include <utility>

#include "stochlyap/errors.hpp"

namespace stochlyap {

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row >= rows || t.col >= cols) throw InvalidArgument("sparse: triplet index out of range");
  }
  std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  SparseMatrix m(rows, cols);
  std::size_t k = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    while (k < triplets.size() && triplets[k].row == i) {
      const std::size_t col = triplets[k].col;
      double sum = 0.0;
      while (k < triplets.size() && triplets[k].row == i && triplets[k].col == col) sum += triplets[k++].value;
      if (sum != 0.0) {
        m.col_idx_.push_back(col);
        m.values_.push_back(sum);
      }
    }
    m.row_ptr_[i + 1] = m.values_.size();
  }
  return m;
}

SparseMatrix SparseMatrix::from_rows(std::size_t cols, const std::vector<std::vector<Entry>>& rows) {
  SparseMatrix m(rows.size(), cols);
  std::size_t total = 0;
  for (const auto& r : rows) total += r.size();
  m.col_idx_.reserve(total);
  m.values_.reserve(total);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::size_t previous = 0;
    bool first = true;
    for (const auto& e : rows[i]) {
      if (e.col >= cols || (!first && e.col <= previous)) {
        throw InvalidArgument("sparse: row entries must be sorted, unique and in range");
      }
      previous = e.col;
      first = false;
      m.col_idx_.push_back(e.col);
      m.values_.push_back(e.value);
    }
    m.row_ptr_[i + 1] = m.values_.size();
  }
  return m;
}

SparseMatrix SparseMatrix::from_dense(const std::vector<std::vector<double>>& dense) {
  const std::size_t cols = dense.empty() ? 0 : dense.front().size();
  std::vector<std::vector<Entry>> rows(dense.size());
  for (std::size_t i = 0; i < dense.size(); ++i) {
    if (dense[i].size() != cols) throw InvalidArgument("sparse: ragged dense matrix");
    for (std::size_t j = 0; j < cols; ++j) {
      if (dense[i][j] != 0.0) rows[i].push_back({j, dense[i][j]});
    }
  }
  return from_rows(cols, rows);
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  SparseMatrix m(n, n);
  m.col_idx_.resize(n);
  m.values_.assign(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    m.col_idx_[i] = i;
    m.row_ptr_[i + 1] = i + 1;
  }
  return m;
}

std::span<const std::size_t> SparseMatrix::row_cols(std::size_t i) const {
  return std::span(col_idx_).subspan(row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]);
}

std::span<const double> SparseMatrix::row_values(std::size_t i) const {
  return std::span(values_).subspan(row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]);
}

double SparseMatrix::at(std::size_t i, std::size_t j) const {
  if (i >= rows_ || j >= cols_) throw InvalidArgument("sparse: index out of range");
  const auto cols = row_cols(i);
  const auto it = std::lower_bound(cols.begin(), cols.end(), j);
  if (it == cols.end() || *it != j) return 0.0;
  return values_[row_ptr_[i] + static_cast<std::size_t>(it - cols.begin())];
}

double SparseMatrix::row_sum(std::size_t i) const {
  double s = 0.0;
  for (double v : row_values(i)) s += v;
  return s;
}

Vector SparseMatrix::left_multiply(std::span<const double> mu) const {
  if (mu.size() != rows_) throw InvalidArgument("sparse: left operand length mismatch");
  Vector out(cols_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    const double w = mu[i];
    if (w == 0.0) continue;
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) out[col_idx_[k]] += w * values_[k];
  }
  return out;
}

Vector SparseMatrix::right_multiply(std::span<const double> f) const {
  if (f.size() != cols_) throw InvalidArgument("sparse: right operand length mismatch");
  Vector out(rows_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += values_[k] * f[col_idx_[k]];
    out[i] = s;
  }
  return out;
}

SparseMatrix SparseMatrix::multiply(const SparseMatrix& rhs) const {
  if (cols_ != rhs.rows_) throw InvalidArgument("sparse: inner dimensions differ");
  SparseMatrix out(rows_, rhs.cols_);
  // Gustavson's algorithm with a dense accumulator.
  Vector accumulator(rhs.cols_, 0.0);
  std::vector<char> occupied(rhs.cols_, 0);
  std::vector<std::size_t> touched;
  for (std::size_t i = 0; i < rows_; ++i) {
    touched.clear();
    for (std::size_t a = row_ptr_[i]; a < row_ptr_[i + 1]; ++a) {
      const std::size_t k = col_idx_[a];
      const double v = values_[a];
      for (std::size_t b = rhs.row_ptr_[k]; b < rhs.row_ptr_[k + 1]; ++b) {
        const std::size_t j = rhs.col_idx_[b];
        if (!occupied[j]) {
          occupied[j] = 1;
          touched.push_back(j);
        }
        accumulator[j] += v * rhs.values_[b];
      }
    }
    std::sort(touched.begin(), touched.end());
    for (std::size_t j : touched) {
      if (accumulator[j] != 0.0) {
        out.col_idx_.push_back(j);
        out.values_.push_back(accumulator[j]);
      }
      accumulator[j] = 0.0;
      occupied[j] = 0;
    }
    out.row_ptr_[i + 1] = out.values_.size();
  }
  return out;
}

SparseMatrix SparseMatrix::transpose() const {
  SparseMatrix t(cols_, rows_);
  std::vector<std::size_t> counts(cols_ + 1, 0);
  for (std::size_t j : col_idx_) ++counts[j + 1];
  for (std::size_t j = 0; j < cols_; ++j) counts[j + 1] += counts[j];
  t.row_ptr_ = counts;
  t.col_idx_.resize(nnz());
  t.values_.resize(nnz());
  std::vector<std::size_t> cursor(counts.begin(), counts.end() - 1);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      const std::size_t slot = cursor[col_idx_[k]]++;
      t.col_idx_[slot] = i;
      t.values_[slot] = values_[k];
    }
  }
  return t;
}

std::vector<std::vector<double>> SparseMatrix::to_dense() const {
  std::vector<std::vector<double>> dense(rows_, std::vector<double>(cols_, 0.0));
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) dense[i][col_idx_[k]] = values_[k];
  }
  return dense;
}

}  // namespace stochlyap
