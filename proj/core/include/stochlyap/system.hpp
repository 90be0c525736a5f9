#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stochlyap {

using Vector = std::vector<double>;

/// Largest supported state dimension; integrator scratch space lives on the stack.
inline constexpr std::size_t kMaxStateDim = 16;

/// Finite noise support: atom values w_l (each a q-vector) with probabilities p_l.
struct NoiseAtoms {
  std::vector<Vector> values;
  std::vector<double> probs;

  [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
  [[nodiscard]] std::size_t dim() const noexcept { return values.empty() ? 0 : values.front().size(); }

  /// Throws InvalidArgument unless the atoms are non-empty, equally sized,
  /// and the probabilities are nonnegative summing to 1 within 1e-12.
  void validate() const;
};

/// Writes T(x, w) into out. Must be pure: callable concurrently.
using StepFunction =
    std::function<void(std::span<const double> x, std::span<const double> w, std::span<double> out)>;

/// Writes dx/dt = f(x, w) into out.
using VectorField = StepFunction;

/// A discrete-time stochastic map x_{n+1} = T(x_n, xi_n) with i.i.d. noise
/// drawn from finitely many atoms. Immutable after construction.
class StochasticMap {
 public:
  /// Validates the noise atoms and checks that the equilibrium (origin when
  /// empty) is fixed by every atom to within kEquilibriumTolerance.
  StochasticMap(std::size_t state_dim, NoiseAtoms noise, StepFunction step, Vector equilibrium = {},
                std::string name = "custom");

  /// A map with no distinguished fixed point, such as a cell permutation.
  /// equilibrium() is empty and no invariance check is made.
  static StochasticMap without_equilibrium(std::size_t state_dim, NoiseAtoms noise, StepFunction step,
                                           std::string name = "custom");

  static constexpr double kEquilibriumTolerance = 1e-9;

  [[nodiscard]] std::size_t state_dim() const noexcept { return state_dim_; }
  [[nodiscard]] const NoiseAtoms& noise() const noexcept { return noise_; }
  [[nodiscard]] std::size_t atom_count() const noexcept { return noise_.size(); }
  [[nodiscard]] const Vector& equilibrium() const noexcept { return equilibrium_; }
  [[nodiscard]] bool has_equilibrium() const noexcept { return !equilibrium_.empty(); }
  [[nodiscard]] const std::string& name() const noexcept { return name_; }
  [[nodiscard]] const StepFunction& step_function() const noexcept { return step_; }

  void step(std::span<const double> x, std::size_t atom, std::span<double> out) const {
    step_(x, noise_.values[atom], out);
  }
  [[nodiscard]] Vector operator()(const Vector& x, std::size_t atom) const;
  [[nodiscard]] Vector apply(const Vector& x, std::span<const double> w) const;

  /// Largest coordinate deviation of step(equilibrium, w_l) from the equilibrium.
  [[nodiscard]] double equilibrium_defect() const;

 private:
  struct NoEquilibrium {};
  StochasticMap(NoEquilibrium, std::size_t state_dim, NoiseAtoms noise, StepFunction step, std::string name);

  std::size_t state_dim_;
  NoiseAtoms noise_;
  StepFunction step_;
  Vector equilibrium_;
  std::string name_;
};

enum class IntegrationMethod { Euler, RK4 };

struct OdeSpec {
  std::size_t state_dim = 0;
  VectorField field;
  double dt = 0.1;
  IntegrationMethod method = IntegrationMethod::RK4;

  void validate() const;
};

/// Q equal-weight atoms at the midpoints of Q equal subintervals of [-alpha, alpha].
NoiseAtoms quantize_uniform_noise(double alpha, std::size_t count);

/// One explicit integration step of the field, with the noise held fixed over the step.
StepFunction integrator_step(const OdeSpec& spec);

StochasticMap discretize_ode(const OdeSpec& spec, NoiseAtoms noise, Vector equilibrium = {},
                             std::string name = "ode");

/// n-fold composition T^n(x, (w_1..w_n)); noise atoms are all Q^n tuples
/// (concatenated vectors, first step first) with product probabilities.
StochasticMap compose(const StochasticMap& map, unsigned n);

/// Damped pendulum with stochastic damping:
///   x1' = x2,  x2' = -sin x1 - (xi + 0.7) x2.
StochasticMap builtin_pendulum(double alpha, std::size_t atoms, double dt,
                               IntegrationMethod method = IntegrationMethod::RK4);

/// Stochastic version of Rantzer's almost-everywhere stable system:
///   x' = -2x + x^2 - y^2,  y' = -6y(1 + xi) + 2xy.
StochasticMap builtin_rantzer(double alpha, std::size_t atoms, double dt,
                              IntegrationMethod method = IntegrationMethod::RK4);

/// Scalar map x -> (rate + xi) x.
StochasticMap builtin_contraction(double rate, double alpha, std::size_t atoms);

StochasticMap builtin_identity(std::size_t dim);

/// Damped Newton iteration on x -> T(x, w) - x with a central-difference
/// Jacobian. Returns the refined fixed point, or nullopt when the residual
/// does not drop below tol within max_iterations.
std::optional<Vector> refine_fixed_point(const StochasticMap& map, std::span<const double> w, Vector start,
                                         double tol = 1e-12, std::size_t max_iterations = 100);

}  // namespace stochlyap
