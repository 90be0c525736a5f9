#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "stochlyap/partition.hpp"
#include "stochlyap/sparse.hpp"
#include "stochlyap/transfer.hpp"

namespace stochlyap {

enum class Normalization { Probability, Raw };

struct MeasureVector {
  Vector values;
  Normalization normalization = Normalization::Raw;

  [[nodiscard]] double total() const;
  /// Throws InvalidArgument on negative entries, or on Probability vectors
  /// whose sum is off by more than 1e-10.
  void validate() const;
};

/// A finite-dimensional Lyapunov measure: (mu_bar P1)_j < gamma mu_bar_j on
/// every cell, with mu_bar > 0.
struct LyapunovCertificate {
  MeasureVector mu_bar;
  double gamma = 1.0;
  double alpha = 1.0;
  double residual = 0.0;  ///< max_j (mu_bar P1)_j - gamma mu_bar_j
  std::size_t terms = 0;  ///< series terms accumulated (0 for the direct solve)

  [[nodiscard]] bool valid() const;
};

struct Divergent {
  std::string reason;
};

struct Infeasible {
  std::string reason;
};

using SeriesOutcome = std::variant<LyapunovCertificate, Divergent>;
using SolveOutcome = std::variant<LyapunovCertificate, Infeasible>;

/// Closed strongly connected components of the transition graph of p1: the
/// classes with no outgoing edge and no leaked row mass. Empty iff p1 is
/// transient. Indices are local to p1.
std::vector<CellSet> find_closed_subpartitions(const SparseMatrix& p1);

struct TransienceResult {
  bool transient = false;
  double rho_estimate = 0.0;
  bool rho_converged = false;
  std::size_t iterations = 0;
};

/// The verdict comes from find_closed_subpartitions; rho_estimate is an
/// advisory power-iteration estimate of the spectral radius.
TransienceResult is_transient(const SparseMatrix& p1, double tol = 1e-12, std::size_t n_max = 20000);

/// Spectral radius estimate from the growth of ||v p1^k||_1 (geometric mean
/// of the ratios over a trailing window).
TransienceResult estimate_spectral_radius(const SparseMatrix& p1, double tol, std::size_t n_max);

/// mu_bar = sum_k alpha^k m P1^k, stopped once a term's 1-norm drops below
/// tol (1 - rate), rate being the larger of alpha rho_hat and the observed
/// term ratio. gamma = 1 / alpha.
SeriesOutcome lyapunov_measure_series(const SparseMatrix& p1, std::span<const double> m, double alpha = 1.0,
                                      double tol = 1e-12, std::size_t k_max = 1000000);

/// Direct sparse LU solve of mu_bar (alpha I - P1) = g; feasible exactly
/// when the solution is strictly positive (which holds iff rho(P1) < alpha).
SolveOutcome lyapunov_measure_solve(const SparseMatrix& p1, double alpha, std::span<const double> g);

struct CertificateCheck {
  bool valid = false;
  double residual = 0.0;
};

CertificateCheck verify_certificate(const SparseMatrix& p1, std::span<const double> mu_bar, double gamma);

struct DecayFit {
  double K = 0.0;
  double beta = 0.0;
  std::size_t points = 0;  ///< samples used in the least-squares fit
};

/// Least-squares fit of log ||m P1^n||_1 = log K + n log beta over the tail
/// half of n = 0..n_max. Diagnostic only.
DecayFit geometric_decay_fit(const SparseMatrix& p1, std::span<const double> m, std::size_t n_max);

struct InvariantMeasureResult {
  MeasureVector measure;
  double residual = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

/// Power iteration on the lazy chain (I + P)/2 from the uniform probability
/// vector; columns beyond the square block (the sink) are ignored and each
/// iterate is renormalised. residual = ||normalise(mu P) - mu||_1.
InvariantMeasureResult invariant_measure(const SparseMatrix& p, double tol = 1e-12, std::size_t n_max = 200000);

struct KoopmanLyapunov {
  Vector values;
  double contraction = 0.0;  ///< max_i (P1 V)_i / V_i
  std::size_t terms = 0;
};

using KoopmanOutcome = std::variant<KoopmanLyapunov, Divergent>;

/// V = sum_k P1^k f (column action), the resolvent (I - U)^{-1} f.
KoopmanOutcome koopman_lyapunov_function(const SparseMatrix& p1, std::span<const double> f, double tol = 1e-12,
                                         std::size_t k_max = 1000000);

/// f_i = ||center(D_i) - x_eq||_2^order for each listed cell.
Vector moment_observable(const Partition& partition, const CellSet& cells, std::span<const double> x_eq,
                         double order = 2.0);

enum class CertificateMethod { Series, Solve };

struct AnalysisOptions {
  CertificateMethod method = CertificateMethod::Series;
  double alpha_weight = 1.0;  ///< series weight (>= 1)
  double solve_alpha = 1.0;   ///< contraction level for the linear solve, in (0, 1]
  double tol = 1e-12;
  std::size_t k_max = 1000000;
  std::size_t power_iterations = 20000;
  std::size_t decay_steps = 200;
};

struct StabilityReport {
  bool transient = false;
  double rho_estimate = 0.0;
  bool rho_converged = false;
  DecayFit decay_fit;
  std::optional<LyapunovCertificate> certificate;
  std::string certificate_failure;
  std::vector<CellSet> obstructions;  ///< global cell indices
  bool sink_obstruction = false;      ///< the escape sink itself is a closed class
  double escaped_mass = 0.0;
  CellSet x0;
  CellSet x1;
  std::size_t sink_state_count = 0;
};

/// Decomposes, checks transience, builds and verifies a Lyapunov measure with
/// m = per-cell volume, and fits the decay rate.
StabilityReport analyze(const TransferMatrix& tm, const Partition& partition, const CellSet& x0,
                        const AnalysisOptions& options = {});

/// m used by analyze: cell volumes over X1 (mean volume for a sink state).
Vector reference_measure(const Partition& partition, const Decomposition& dec);

}  // namespace stochlyap
