#include "stochlyap/simulate.hpp"

#include <array>
#include <cmath>

#include "stochlyap/errors.hpp"
#include "stochlyap/parallel.hpp"
#include "stochlyap/random.hpp"

namespace stochlyap {

void McConfig::validate() const {
  if (n_init == 0 || n_steps == 0 || n_noise_paths == 0) throw InvalidArgument("simulate: counts must be >= 1");
  if (!(epsilon > 0.0)) throw InvalidArgument("simulate: epsilon must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("simulate: delta must lie in (0, 1)");
}

namespace {

enum class PathOutcome { Converged, Outside, Escaped, NonFinite };

double wrap_into(double x, double lo, double hi) {
  if (x >= lo && x < hi) return x;
  const double period = hi - lo;
  double r = std::fmod(x - lo, period);
  if (r < 0.0) r += period;
  const double y = lo + r;
  return y >= hi ? lo : y;
}

// Distances on wrapped axes use the shorter way around.
double axis_distance(double x, double target, double period, bool wrapped) {
  double d = std::abs(x - target);
  if (wrapped) d = std::min(d, period - d);
  return d;
}

}  // namespace

McResult estimate_unstable_fraction(const StochasticMap& map, const Domain& domain, const McConfig& cfg) {
  cfg.validate();
  domain.validate();
  const std::size_t d = map.state_dim();
  if (domain.dim() != d) throw InvalidArgument("simulate: domain and map dimensions differ");
  const auto& probs = map.noise().probs;
  if (!map.has_equilibrium()) throw InvalidArgument("simulate: the map has no equilibrium to converge to");
  const auto& eq = map.equilibrium();

  // Cumulative atom probabilities for inverse-CDF sampling.
  std::vector<double> cdf(probs.size());
  double acc = 0.0;
  for (std::size_t l = 0; l < probs.size(); ++l) cdf[l] = (acc += probs[l]);

  struct Slot {
    std::size_t converged = 0;
    std::size_t escaped = 0;
    std::size_t non_finite = 0;
    Vector x;
  };
  std::vector<Slot> slots(cfg.n_init);

  // Streams: 2i for the initial condition, 2i+1 for its noise sequences.
  parallel_for(cfg.n_init, cfg.threads, [&](std::size_t i) {
    Slot& slot = slots[i];
    const CounterRng start_rng(cfg.seed, 2 * static_cast<std::uint64_t>(i));
    const CounterRng noise_rng(cfg.seed, 2 * static_cast<std::uint64_t>(i) + 1);
    slot.x.resize(d);
    for (std::size_t a = 0; a < d; ++a) {
      slot.x[a] = domain.lower[a] + domain.period(a) * start_rng.uniform(a);
      if (slot.x[a] >= domain.upper[a]) slot.x[a] = std::nextafter(domain.upper[a], domain.lower[a]);
    }
    std::array<double, kMaxStateDim> state{}, next{};
    const std::span<double> state_view(state.data(), d), next_view(next.data(), d);
    for (std::size_t path = 0; path < cfg.n_noise_paths; ++path) {
      std::copy(slot.x.begin(), slot.x.end(), state.begin());
      PathOutcome outcome = PathOutcome::Converged;
      const std::uint64_t base = static_cast<std::uint64_t>(path) * cfg.n_steps;
      for (std::size_t n = 0; n < cfg.n_steps && outcome == PathOutcome::Converged; ++n) {
        std::size_t atom = 0;
        if (cdf.size() > 1) {
          const double u = noise_rng.uniform(base + n);
          while (atom + 1 < cdf.size() && u >= cdf[atom]) ++atom;
        }
        map.step(state_view, atom, next_view);
        for (std::size_t a = 0; a < d; ++a) {
          double v = next[a];
          if (!std::isfinite(v)) {
            outcome = PathOutcome::NonFinite;
            break;
          }
          if (domain.wrap[a]) {
            v = wrap_into(v, domain.lower[a], domain.upper[a]);
          } else if (v < domain.lower[a] || v >= domain.upper[a]) {
            outcome = PathOutcome::Escaped;
            break;
          }
          state[a] = v;
        }
      }
      if (outcome == PathOutcome::Converged) {
        for (std::size_t a = 0; a < d; ++a) {
          if (axis_distance(state[a], eq[a], domain.period(a), domain.wrap[a]) > cfg.epsilon) {
            outcome = PathOutcome::Outside;
            break;
          }
        }
      }
      switch (outcome) {
        case PathOutcome::Converged: ++slot.converged; break;
        case PathOutcome::Escaped: ++slot.escaped; break;
        case PathOutcome::NonFinite: ++slot.non_finite; break;
        case PathOutcome::Outside: break;
      }
    }
  });

  McResult result;
  result.horizon = cfg.n_steps;
  const double paths = static_cast<double>(cfg.n_noise_paths);
  for (auto& slot : slots) {
    const double failed = static_cast<double>(cfg.n_noise_paths - slot.converged) / paths;
    const bool unstable = failed > cfg.delta;
    result.unstable_count += unstable ? 1 : 0;
    result.escaped_paths += slot.escaped;
    result.non_finite_paths += slot.non_finite;
    if (cfg.record_verdicts) {
      result.verdicts.push_back({std::move(slot.x), static_cast<double>(slot.converged) / paths, unstable});
    }
  }
  const double n = static_cast<double>(cfg.n_init);
  result.unstable_fraction = static_cast<double>(result.unstable_count) / n;
  // Wilson score interval.
  constexpr double z = 1.96;
  const double f = result.unstable_fraction;
  result.half_width = z / (1.0 + z * z / n) * std::sqrt(f * (1.0 - f) / n + z * z / (4.0 * n * n));
  return result;
}

}  // namespace stochlyap
