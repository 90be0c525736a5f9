#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <vector>

#include "stochlyap/system.hpp"

namespace stochlyap {

using CellIndex = std::size_t;

/// Axis-aligned box [lower, upper) with per-axis end-to-end identification.
struct Domain {
  Vector lower;
  Vector upper;
  std::vector<bool> wrap;

  [[nodiscard]] std::size_t dim() const noexcept { return lower.size(); }
  [[nodiscard]] double period(std::size_t axis) const { return upper[axis] - lower[axis]; }
  [[nodiscard]] double volume() const;
  void validate() const;
};

/// Sorted set of unique cell indices.
class CellSet {
 public:
  CellSet() = default;
  CellSet(std::initializer_list<CellIndex> cells);
  explicit CellSet(std::vector<CellIndex> cells);

  [[nodiscard]] bool contains(CellIndex cell) const;
  [[nodiscard]] std::size_t size() const noexcept { return cells_.size(); }
  [[nodiscard]] bool empty() const noexcept { return cells_.empty(); }
  [[nodiscard]] const std::vector<CellIndex>& indices() const noexcept { return cells_; }
  [[nodiscard]] auto begin() const noexcept { return cells_.begin(); }
  [[nodiscard]] auto end() const noexcept { return cells_.end(); }
  [[nodiscard]] CellIndex operator[](std::size_t i) const { return cells_[i]; }

  /// Cells of [0, total) not in this set.
  [[nodiscard]] CellSet complement(std::size_t total) const;

  friend bool operator==(const CellSet&, const CellSet&) = default;

 private:
  std::vector<CellIndex> cells_;
};

/// Regular grid of half-open boxes over a Domain. Axis 0 varies fastest in the
/// flat cell index.
class Partition {
 public:
  Partition(Domain domain, std::vector<std::size_t> counts);

  [[nodiscard]] const Domain& domain() const noexcept { return domain_; }
  [[nodiscard]] std::size_t dim() const noexcept { return counts_.size(); }
  [[nodiscard]] const std::vector<std::size_t>& counts() const noexcept { return counts_; }
  [[nodiscard]] std::size_t cell_count() const noexcept { return total_; }

  /// k-th grid coordinate on an axis; boundary(axis, counts[axis]) == upper exactly.
  [[nodiscard]] double boundary(std::size_t axis, std::size_t k) const;

  [[nodiscard]] std::vector<std::size_t> multi_index(CellIndex cell) const;
  [[nodiscard]] CellIndex flat_index(std::span<const std::size_t> multi) const;

  [[nodiscard]] Vector cell_lower(CellIndex cell) const;
  [[nodiscard]] Vector cell_upper(CellIndex cell) const;
  [[nodiscard]] Vector cell_center(CellIndex cell) const;
  [[nodiscard]] double cell_volume(CellIndex cell) const;

  /// Reduces x into [lower, upper) on a wrapped axis; identity otherwise.
  [[nodiscard]] double wrap_coordinate(std::size_t axis, double x) const;

  /// Cell containing x after wrapping, or nullopt when a non-wrapped
  /// coordinate lies outside the domain. Throws InvalidState on NaN.
  [[nodiscard]] std::optional<CellIndex> locate(std::span<const double> x) const;

  /// Moves x onto the closed domain: wraps wrapped axes, clamps the others
  /// to [lower, nextbelow(upper)].
  void clamp_into(std::span<double> x) const;

  /// The k-th of a cell's uniform samples, keyed by (seed, cell, k); strictly
  /// inside the cell.
  void sample_point(CellIndex cell, std::size_t k, std::uint64_t seed, std::span<double> out) const;

  [[nodiscard]] std::vector<Vector> sample_cell(CellIndex cell, std::size_t count, std::uint64_t seed) const;

  /// Cells intersecting the closed l-infinity ball of radius epsilon around x.
  [[nodiscard]] CellSet attractor_cells(std::span<const double> x, double epsilon) const;

 private:
  [[nodiscard]] std::size_t axis_cell(std::size_t axis, double x) const;

  Domain domain_;
  std::vector<std::size_t> counts_;
  std::vector<std::size_t> strides_;
  std::size_t total_ = 1;
};

}  // namespace stochlyap
