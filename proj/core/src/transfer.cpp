#include "stochlyap/transfer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>

#include "stochlyap/errors.hpp"
#include "stochlyap/parallel.hpp"

namespace stochlyap {

std::string_view to_string(SinkPolicy policy) noexcept {
  switch (policy) {
    case SinkPolicy::SinkUnstable: return "sink_unstable";
    case SinkPolicy::Discard: return "discard";
    case SinkPolicy::Clamp: return "clamp";
  }
  return "sink_unstable";
}

SinkPolicy parse_sink_policy(std::string_view text) {
  if (text == "sink_unstable" || text == "SinkUnstable") return SinkPolicy::SinkUnstable;
  if (text == "discard" || text == "Discard") return SinkPolicy::Discard;
  if (text == "clamp" || text == "Clamp") return SinkPolicy::Clamp;
  throw InvalidArgument("unknown sink policy '" + std::string(text) + "'");
}

double TransferMatrix::escaped_mass() const {
  double total = 0.0;
  for (std::size_t i = 0; i < combined.rows(); ++i) total += combined.at(i, sink_column());
  return total;
}

double TransferMatrix::max_row_sum_error() const {
  double worst = 0.0;
  const auto scan = [&](const SparseMatrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) worst = std::max(worst, std::abs(m.row_sum(i) - 1.0));
  };
  scan(combined);
  for (const auto& p : per_atom) scan(p);
  return worst;
}

TransferMatrix build_transfer_matrix(const StochasticMap& map, const Partition& partition,
                                     const BuildOptions& options) {
  if (options.samples_per_cell == 0) throw InvalidArgument("build: samples per cell must be positive");
  if (map.state_dim() != partition.dim()) throw InvalidArgument("build: map and partition dimensions differ");

  const std::size_t cells = partition.cell_count();
  const std::size_t atoms = map.atom_count();
  const std::size_t samples = options.samples_per_cell;
  const std::size_t d = partition.dim();
  const std::size_t sink = cells;
  const double inv_samples = 1.0 / static_cast<double>(samples);
  const auto& probs = map.noise().probs;

  // rows[l][i] holds the sorted entries of row i of P^{w_l}.
  std::vector<std::vector<std::vector<SparseMatrix::Entry>>> rows(
      atoms, std::vector<std::vector<SparseMatrix::Entry>>(cells));
  std::vector<std::vector<SparseMatrix::Entry>> combined_rows(cells);

  parallel_for(cells, options.threads, [&](std::size_t cell) {
    std::vector<double> points(samples * d);
    for (std::size_t k = 0; k < samples; ++k) {
      partition.sample_point(cell, k, options.seed, std::span(points).subspan(k * d, d));
    }
    std::vector<std::size_t> targets(samples);
    std::array<double, kMaxStateDim> image{};
    const std::span<double> image_view(image.data(), d);
    std::vector<std::pair<std::size_t, std::size_t>> counts;  // (column, count) per atom
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> atom_counts(atoms);
    for (std::size_t l = 0; l < atoms; ++l) {
      for (std::size_t k = 0; k < samples; ++k) {
        map.step(std::span<const double>(points).subspan(k * d, d), l, image_view);
        std::optional<CellIndex> target;
        bool finite = true;
        for (std::size_t a = 0; a < d; ++a) finite = finite && std::isfinite(image[a]);
        if (finite) {
          target = partition.locate(image_view);
          if (!target && options.sink_policy == SinkPolicy::Clamp) {
            partition.clamp_into(image_view);
            target = partition.locate(image_view);
          }
        }
        targets[k] = target.value_or(sink);
      }
      std::sort(targets.begin(), targets.end());
      counts.clear();
      for (std::size_t k = 0; k < samples;) {
        std::size_t run = k;
        while (run < samples && targets[run] == targets[k]) ++run;
        counts.emplace_back(targets[k], run - k);
        k = run;
      }
      auto& row = rows[l][cell];
      row.reserve(counts.size());
      for (const auto& [col, n] : counts) row.push_back({col, static_cast<double>(n) * inv_samples});
      atom_counts[l] = counts;
    }
    // Combined row: merge atoms in index order so the summation order is fixed.
    std::vector<std::size_t> columns;
    for (const auto& ac : atom_counts) {
      for (const auto& c : ac) columns.push_back(c.first);
    }
    std::sort(columns.begin(), columns.end());
    columns.erase(std::unique(columns.begin(), columns.end()), columns.end());
    Vector accumulated(columns.size(), 0.0);
    for (std::size_t l = 0; l < atoms; ++l) {
      for (const auto& [col, n] : atom_counts[l]) {
        const auto pos = static_cast<std::size_t>(std::lower_bound(columns.begin(), columns.end(), col) -
                                                  columns.begin());
        accumulated[pos] += probs[l] * (static_cast<double>(n) * inv_samples);
      }
    }
    auto& crow = combined_rows[cell];
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (accumulated[c] != 0.0) crow.push_back({columns[c], accumulated[c]});
    }
  });

  TransferMatrix tm;
  tm.cell_count = cells;
  tm.sink_policy = options.sink_policy;
  tm.atom_probs = probs;
  tm.samples_per_cell = samples;
  tm.seed = options.seed;
  tm.per_atom.reserve(atoms);
  for (std::size_t l = 0; l < atoms; ++l) tm.per_atom.push_back(SparseMatrix::from_rows(cells + 1, rows[l]));
  tm.combined = SparseMatrix::from_rows(cells + 1, combined_rows);
  return tm;
}

SparseMatrix compose_power(const SparseMatrix& p, unsigned n) {
  if (n == 0) throw InvalidArgument("compose_power: n must be positive");
  if (p.cols() != p.rows() + 1) throw InvalidArgument("compose_power: expected an L x (L+1) matrix");
  if (n == 1) return p;
  // Square (L+1) x (L+1) chain with an absorbing sink.
  std::vector<Triplet> triplets;
  triplets.reserve(p.nnz() + 1);
  for (std::size_t i = 0; i < p.rows(); ++i) {
    const auto cols = p.row_cols(i);
    const auto vals = p.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) triplets.push_back({i, cols[k], vals[k]});
  }
  triplets.push_back({p.rows(), p.rows(), 1.0});
  const SparseMatrix chain = SparseMatrix::from_triplets(p.cols(), p.cols(), std::move(triplets));
  SparseMatrix power = chain;
  for (unsigned k = 1; k < n; ++k) power = power.multiply(chain);
  std::vector<std::vector<SparseMatrix::Entry>> rows(p.rows());
  for (std::size_t i = 0; i < p.rows(); ++i) {
    const auto cols = power.row_cols(i);
    const auto vals = power.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) rows[i].push_back({cols[k], vals[k]});
  }
  return SparseMatrix::from_rows(p.cols(), rows);
}

SparseMatrix compose_power(const TransferMatrix& tm, unsigned n) { return compose_power(tm.combined, n); }

Decomposition decompose(const TransferMatrix& tm, const CellSet& x0) {
  const std::size_t cells = tm.cell_count;
  if (x0.empty()) throw InvalidArgument("decompose: attractor set X0 is empty");
  if (x0.indices().back() >= cells) throw InvalidArgument("decompose: X0 cell index out of range");
  if (x0.size() == cells) throw InvalidArgument("decompose: X0 covers every cell, X1 would be empty");

  Decomposition dec;
  dec.x0 = x0;
  dec.x1 = x0.complement(cells);
  const std::size_t n1 = dec.x1.size();
  std::vector<std::size_t> local(cells + 1, static_cast<std::size_t>(-1));
  for (std::size_t k = 0; k < n1; ++k) local[dec.x1[k]] = k;

  dec.p0_mass.assign(n1, 0.0);
  dec.sink_mass.assign(n1, 0.0);
  std::vector<std::vector<SparseMatrix::Entry>> rows(n1);
  for (std::size_t k = 0; k < n1; ++k) {
    const std::size_t i = dec.x1[k];
    const auto cols = tm.combined.row_cols(i);
    const auto vals = tm.combined.row_values(i);
    for (std::size_t a = 0; a < cols.size(); ++a) {
      const std::size_t j = cols[a];
      if (j == tm.sink_column()) {
        dec.sink_mass[k] += vals[a];
      } else if (local[j] != static_cast<std::size_t>(-1)) {
        rows[k].push_back({local[j], vals[a]});
      } else {
        dec.p0_mass[k] += vals[a];
      }
    }
  }
  const bool leaks = std::any_of(dec.sink_mass.begin(), dec.sink_mass.end(), [](double m) { return m > 0.0; });
  dec.has_sink_state = tm.sink_policy == SinkPolicy::SinkUnstable && leaks;
  if (dec.has_sink_state) {
    for (std::size_t k = 0; k < n1; ++k) {
      if (dec.sink_mass[k] > 0.0) rows[k].push_back({n1, dec.sink_mass[k]});
    }
    rows.push_back({{n1, 1.0}});
  }
  const std::size_t size = rows.size();
  dec.p1 = SparseMatrix::from_rows(size, rows);
  return dec;
}

Vector koopman_apply(const TransferMatrix& tm, std::span<const double> f) {
  if (f.size() != tm.cell_count) throw InvalidArgument("koopman_apply: observable length must equal cell count");
  Vector extended(f.begin(), f.end());
  extended.push_back(0.0);
  return tm.combined.right_multiply(extended);
}

SparseMatrix attractor_closed_matrix(const TransferMatrix& tm, const CellSet& x0) {
  const std::size_t cells = tm.cell_count;
  std::vector<std::vector<SparseMatrix::Entry>> rows(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    const auto cols = tm.combined.row_cols(i);
    const auto vals = tm.combined.row_values(i);
    const bool attractor = x0.contains(i);
    double returned = 0.0;
    for (std::size_t a = 0; a < cols.size(); ++a) {
      const std::size_t j = cols[a];
      if (j == tm.sink_column()) {
        if (attractor) returned += vals[a];
      } else if (attractor && !x0.contains(j)) {
        returned += vals[a];
      } else {
        rows[i].push_back({j, vals[a]});
      }
    }
    if (attractor && returned > 0.0) {
      auto it = std::lower_bound(rows[i].begin(), rows[i].end(), i,
                                 [](const SparseMatrix::Entry& e, std::size_t c) { return e.col < c; });
      if (it != rows[i].end() && it->col == i) {
        it->value += returned;
      } else {
        rows[i].insert(it, {i, returned});
      }
    }
  }
  return SparseMatrix::from_rows(cells, rows);
}

}  // namespace stochlyap
