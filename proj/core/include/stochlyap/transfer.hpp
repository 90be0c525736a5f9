#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "stochlyap/partition.hpp"
#include "stochlyap/sparse.hpp"
#include "stochlyap/system.hpp"

namespace stochlyap {

/// What happens to sample mass that leaves a non-wrapped domain axis.
enum class SinkPolicy {
  SinkUnstable,  ///< escaped mass feeds an absorbing, non-attractor state
  Discard,       ///< escaped mass is dropped; P1 rows become sub-stochastic
  Clamp,         ///< escaped points are projected onto the domain boundary at build time
};

std::string_view to_string(SinkPolicy policy) noexcept;
SinkPolicy parse_sink_policy(std::string_view text);

struct BuildOptions {
  std::size_t samples_per_cell = 100;
  std::uint64_t seed = 0;
  SinkPolicy sink_policy = SinkPolicy::SinkUnstable;
  unsigned threads = 0;
};

/// Ulam approximation of the stochastic Perron-Frobenius operator. Every
/// matrix is L x (L+1); column L is the escape sink, so rows sum to one.
struct TransferMatrix {
  std::size_t cell_count = 0;
  SinkPolicy sink_policy = SinkPolicy::SinkUnstable;
  std::vector<double> atom_probs;
  std::vector<SparseMatrix> per_atom;
  SparseMatrix combined;
  std::size_t samples_per_cell = 0;
  std::uint64_t seed = 0;

  [[nodiscard]] std::size_t sink_column() const noexcept { return cell_count; }
  /// Sum over rows of the combined sink column (in units of one cell's mass).
  [[nodiscard]] double escaped_mass() const;
  /// max_i |row_sum_i - 1| over the combined and every per-atom matrix.
  [[nodiscard]] double max_row_sum_error() const;
};

/// P^{w_l}_{ij} = #{samples x in D_i : T(x, w_l) in D_j} / M, with escapes
/// credited to the sink column and P = sum_l p_l P^{w_l}. Deterministic in
/// (map, partition, M, seed) regardless of the thread count.
TransferMatrix build_transfer_matrix(const StochasticMap& map, const Partition& partition,
                                     const BuildOptions& options = {});

/// P^n with the sink treated as an absorbing state; result is L x (L+1).
SparseMatrix compose_power(const TransferMatrix& tm, unsigned n);
SparseMatrix compose_power(const SparseMatrix& p, unsigned n);

/// Split of P into the attractor block X0 and the sub-Markov block P1 over X1.
struct Decomposition {
  CellSet x0;
  CellSet x1;
  /// Square over the local X1 index space; under SinkUnstable, when any X1 row
  /// leaks, one extra absorbing sink state is appended as the last index.
  SparseMatrix p1;
  Vector p0_mass;    ///< per X1 row: mass flowing into X0
  Vector sink_mass;  ///< per X1 row: escaped mass (kept in p1 only as the sink state)
  bool has_sink_state = false;

  [[nodiscard]] std::size_t local_size() const noexcept { return p1.rows(); }
  /// Global cell index for a local P1 index, or cell_count for the sink state.
  [[nodiscard]] CellIndex global_cell(std::size_t local) const noexcept {
    return local < x1.size() ? x1[local] : static_cast<CellIndex>(-1);
  }
};

Decomposition decompose(const TransferMatrix& tm, const CellSet& x0);

/// Finite-dimensional Koopman action (P f)_i = sum_j P_ij f_j; the sink carries f = 0.
Vector koopman_apply(const TransferMatrix& tm, std::span<const double> f);

/// L x L matrix in the lower-triangular attractor form: X0 rows keep their
/// X0 -> X0 transitions and all other mass (including escapes) returns to
/// the diagonal, so X0 is closed. X1 rows are unchanged except that sink
/// mass is dropped.
SparseMatrix attractor_closed_matrix(const TransferMatrix& tm, const CellSet& x0);

}  // namespace stochlyap
