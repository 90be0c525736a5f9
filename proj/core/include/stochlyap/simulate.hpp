#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "stochlyap/partition.hpp"
#include "stochlyap/system.hpp"

namespace stochlyap {

struct McConfig {
  std::size_t n_init = 2000;
  std::size_t n_steps = 2000;
  std::size_t n_noise_paths = 5;
  double epsilon = 0.2;  ///< l-infinity radius of the target neighbourhood
  double delta = 0.5;    ///< an initial condition is unstable when its failing-path fraction exceeds delta
  std::uint64_t seed = 0;
  unsigned threads = 0;
  bool record_verdicts = false;

  void validate() const;
};

struct InitialConditionVerdict {
  Vector x;
  double converged_fraction = 0.0;
  bool unstable = false;
};

struct McResult {
  double unstable_fraction = 0.0;
  double half_width = 0.0;  ///< 95% Wilson score half-width
  std::size_t unstable_count = 0;
  std::size_t escaped_paths = 0;     ///< paths that left a non-wrapped axis
  std::size_t non_finite_paths = 0;  ///< paths that produced NaN or infinity
  std::size_t horizon = 0;
  std::vector<InitialConditionVerdict> verdicts;  ///< filled when record_verdicts is set
};

/// Monte Carlo estimate of the measure of initial conditions whose sample
/// paths fail to reach the epsilon-neighbourhood of the equilibrium. Wrapped
/// axes are reduced every step; leaving a non-wrapped axis, or a non-finite
/// state, counts as non-convergent. Deterministic given cfg.seed.
McResult estimate_unstable_fraction(const StochasticMap& map, const Domain& domain, const McConfig& cfg);

}  // namespace stochlyap
