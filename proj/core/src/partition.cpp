#include "stochlyap/partition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "stochlyap/errors.hpp"
#include "stochlyap/random.hpp"

namespace stochlyap {

double Domain::volume() const {
  double v = 1.0;
  for (std::size_t i = 0; i < dim(); ++i) v *= period(i);
  return v;
}

void Domain::validate() const {
  if (lower.empty()) throw InvalidArgument("domain: dimension must be positive");
  if (upper.size() != lower.size()) throw InvalidArgument("domain: lower/upper dimension mismatch");
  if (wrap.size() != lower.size()) throw InvalidArgument("domain: wrap flags dimension mismatch");
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(lower[i] < upper[i])) {
      throw InvalidArgument("domain: need finite lower < upper on axis " + std::to_string(i));
    }
  }
}

CellSet::CellSet(std::initializer_list<CellIndex> cells) : CellSet(std::vector<CellIndex>(cells)) {}

CellSet::CellSet(std::vector<CellIndex> cells) : cells_(std::move(cells)) {
  std::sort(cells_.begin(), cells_.end());
  cells_.erase(std::unique(cells_.begin(), cells_.end()), cells_.end());
}

bool CellSet::contains(CellIndex cell) const { return std::binary_search(cells_.begin(), cells_.end(), cell); }

CellSet CellSet::complement(std::size_t total) const {
  std::vector<CellIndex> out;
  out.reserve(total > size() ? total - size() : 0);
  auto it = cells_.begin();
  for (CellIndex c = 0; c < total; ++c) {
    while (it != cells_.end() && *it < c) ++it;
    if (it == cells_.end() || *it != c) out.push_back(c);
  }
  return CellSet(std::move(out));
}

Partition::Partition(Domain domain, std::vector<std::size_t> counts)
    : domain_(std::move(domain)), counts_(std::move(counts)) {
  domain_.validate();
  if (counts_.size() != domain_.dim()) throw InvalidArgument("partition: counts dimension mismatch");
  strides_.resize(counts_.size());
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    if (counts_[i] == 0) throw InvalidArgument("partition: every axis needs at least one cell");
    strides_[i] = total_;
    if (total_ > std::numeric_limits<std::size_t>::max() / counts_[i]) {
      throw InvalidArgument("partition: cell count overflows");
    }
    total_ *= counts_[i];
  }
}

double Partition::boundary(std::size_t axis, std::size_t k) const {
  const double lo = domain_.lower[axis];
  const double hi = domain_.upper[axis];
  const std::size_t n = counts_[axis];
  if (k == 0) return lo;
  if (k >= n) return hi;
  return lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n);
}

std::vector<std::size_t> Partition::multi_index(CellIndex cell) const {
  if (cell >= total_) throw InvalidArgument("cell index out of range");
  std::vector<std::size_t> multi(dim());
  for (std::size_t i = 0; i < dim(); ++i) {
    multi[i] = cell % counts_[i];
    cell /= counts_[i];
  }
  return multi;
}

CellIndex Partition::flat_index(std::span<const std::size_t> multi) const {
  if (multi.size() != dim()) throw InvalidArgument("multi-index has wrong dimension");
  CellIndex flat = 0;
  for (std::size_t i = 0; i < dim(); ++i) {
    if (multi[i] >= counts_[i]) throw InvalidArgument("multi-index out of range");
    flat += multi[i] * strides_[i];
  }
  return flat;
}

Vector Partition::cell_lower(CellIndex cell) const {
  const auto m = multi_index(cell);
  Vector out(dim());
  for (std::size_t i = 0; i < dim(); ++i) out[i] = boundary(i, m[i]);
  return out;
}

Vector Partition::cell_upper(CellIndex cell) const {
  const auto m = multi_index(cell);
  Vector out(dim());
  for (std::size_t i = 0; i < dim(); ++i) out[i] = boundary(i, m[i] + 1);
  return out;
}

Vector Partition::cell_center(CellIndex cell) const {
  const auto m = multi_index(cell);
  Vector out(dim());
  for (std::size_t i = 0; i < dim(); ++i) out[i] = 0.5 * (boundary(i, m[i]) + boundary(i, m[i] + 1));
  return out;
}

double Partition::cell_volume(CellIndex cell) const {
  const auto m = multi_index(cell);
  double v = 1.0;
  for (std::size_t i = 0; i < dim(); ++i) v *= boundary(i, m[i] + 1) - boundary(i, m[i]);
  return v;
}

double Partition::wrap_coordinate(std::size_t axis, double x) const {
  if (!domain_.wrap[axis]) return x;
  const double lo = domain_.lower[axis];
  const double hi = domain_.upper[axis];
  if (x >= lo && x < hi) return x;
  const double period = hi - lo;
  double r = std::fmod(x - lo, period);
  if (r < 0.0) r += period;
  double y = lo + r;
  if (y >= hi) y = lo;  // rounding can land exactly on the identified end
  return y;
}

std::size_t Partition::axis_cell(std::size_t axis, double x) const {
  const double lo = domain_.lower[axis];
  const double hi = domain_.upper[axis];
  const std::size_t n = counts_[axis];
  const double scaled = (x - lo) / (hi - lo) * static_cast<double>(n);
  std::size_t k = scaled <= 0.0 ? 0 : std::min(n - 1, static_cast<std::size_t>(scaled));
  // Reconcile the floating-point guess with the exact boundary() coordinates.
  while (k > 0 && x < boundary(axis, k)) --k;
  while (k + 1 < n && x >= boundary(axis, k + 1)) ++k;
  return k;
}

std::optional<CellIndex> Partition::locate(std::span<const double> x) const {
  if (x.size() != dim()) throw InvalidArgument("locate: point has wrong dimension");
  CellIndex flat = 0;
  for (std::size_t i = 0; i < dim(); ++i) {
    if (std::isnan(x[i])) throw InvalidState("locate: NaN coordinate on axis " + std::to_string(i));
    if (std::isinf(x[i])) return std::nullopt;
    const double xi = wrap_coordinate(i, x[i]);
    if (xi < domain_.lower[i] || xi >= domain_.upper[i]) return std::nullopt;
    flat += axis_cell(i, xi) * strides_[i];
  }
  return flat;
}

void Partition::clamp_into(std::span<double> x) const {
  for (std::size_t i = 0; i < dim(); ++i) {
    if (std::isnan(x[i])) throw InvalidState("clamp: NaN coordinate on axis " + std::to_string(i));
    if (domain_.wrap[i] && std::isfinite(x[i])) {
      x[i] = wrap_coordinate(i, x[i]);
    } else {
      const double top = std::nextafter(domain_.upper[i], domain_.lower[i]);
      x[i] = std::clamp(x[i], domain_.lower[i], top);
    }
  }
}

void Partition::sample_point(CellIndex cell, std::size_t k, std::uint64_t seed, std::span<double> out) const {
  const CounterRng rng(seed, cell);
  CellIndex rest = cell;
  for (std::size_t i = 0; i < dim(); ++i) {
    const std::size_t m = rest % counts_[i];
    rest /= counts_[i];
    const double a = boundary(i, m);
    const double b = boundary(i, m + 1);
    double v = a + (b - a) * rng.uniform(static_cast<std::uint64_t>(k) * dim() + i);
    if (v >= b) v = std::nextafter(b, a);
    if (v < a) v = a;
    out[i] = v;
  }
}

std::vector<Vector> Partition::sample_cell(CellIndex cell, std::size_t count, std::uint64_t seed) const {
  if (cell >= total_) throw InvalidArgument("sample_cell: cell index out of range");
  if (count == 0) throw InvalidArgument("sample_cell: sample count must be positive");
  std::vector<Vector> points(count, Vector(dim()));
  for (std::size_t k = 0; k < count; ++k) sample_point(cell, k, seed, points[k]);
  return points;
}

CellSet Partition::attractor_cells(std::span<const double> x, double epsilon) const {
  if (!(epsilon >= 0.0)) throw InvalidArgument("attractor_cells: epsilon must be >= 0");
  if (x.size() != dim()) throw InvalidArgument("attractor_cells: point has wrong dimension");
  for (std::size_t i = 0; i < dim(); ++i) {
    if (std::isnan(x[i]) || (!domain_.wrap[i] && (x[i] < domain_.lower[i] || x[i] >= domain_.upper[i]))) {
      throw InvalidArgument("attractor_cells: equilibrium lies outside the domain");
    }
  }
  // Per-axis index lists of cells [b_k, b_{k+1}) meeting the closed interval [a, c].
  std::vector<std::vector<std::size_t>> per_axis(dim());
  for (std::size_t i = 0; i < dim(); ++i) {
    const std::size_t n = counts_[i];
    const double lo = domain_.lower[i];
    const double hi = domain_.upper[i];
    std::vector<bool> hit(n, false);
    const auto mark = [&](double a, double c) {
      for (std::size_t k = 0; k < n; ++k) {
        if (boundary(i, k) <= c && boundary(i, k + 1) > a) hit[k] = true;
      }
    };
    if (domain_.wrap[i]) {
      if (2.0 * epsilon >= hi - lo) {
        hit.assign(n, true);
      } else {
        const double center = wrap_coordinate(i, x[i]);
        const double a = center - epsilon;
        const double c = center + epsilon;
        mark(std::max(a, lo), std::min(c, hi));
        if (a < lo) mark(a + (hi - lo), hi);
        if (c >= hi) mark(lo, c - (hi - lo));
      }
    } else {
      mark(x[i] - epsilon, x[i] + epsilon);
    }
    for (std::size_t k = 0; k < n; ++k) {
      if (hit[k]) per_axis[i].push_back(k);
    }
  }
  std::vector<CellIndex> cells;
  std::vector<std::size_t> pos(dim(), 0);
  std::vector<std::size_t> multi(dim());
  while (true) {
    for (std::size_t i = 0; i < dim(); ++i) multi[i] = per_axis[i][pos[i]];
    cells.push_back(flat_index(multi));
    std::size_t axis = 0;
    while (axis < dim() && ++pos[axis] == per_axis[axis].size()) pos[axis++] = 0;
    if (axis == dim()) break;
  }
  return CellSet(std::move(cells));
}

}  // namespace stochlyap
