#include "stochlyap/system.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <utility>

#include "stochlyap/errors.hpp"

namespace stochlyap {

void NoiseAtoms::validate() const {
  if (values.empty()) throw InvalidArgument("noise: at least one atom is required");
  if (values.size() != probs.size()) throw InvalidArgument("noise: values and probs differ in length");
  const std::size_t q = values.front().size();
  double total = 0.0;
  for (std::size_t l = 0; l < values.size(); ++l) {
    if (values[l].size() != q) throw InvalidArgument("noise: atoms have inconsistent dimension");
    if (!(probs[l] >= 0.0)) throw InvalidArgument("noise: negative probability");
    total += probs[l];
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidArgument("noise: probabilities do not sum to 1");
}

StochasticMap::StochasticMap(std::size_t state_dim, NoiseAtoms noise, StepFunction step, Vector equilibrium,
                             std::string name)
    : state_dim_(state_dim),
      noise_(std::move(noise)),
      step_(std::move(step)),
      equilibrium_(std::move(equilibrium)),
      name_(std::move(name)) {
  if (state_dim_ == 0 || state_dim_ > kMaxStateDim) {
    throw InvalidArgument("state dimension must be in [1, " + std::to_string(kMaxStateDim) + "]");
  }
  if (!step_) throw InvalidArgument("step function is empty");
  noise_.validate();
  if (equilibrium_.empty()) equilibrium_.assign(state_dim_, 0.0);
  if (equilibrium_.size() != state_dim_) throw InvalidArgument("equilibrium has wrong dimension");
  const double defect = equilibrium_defect();
  if (!(defect <= kEquilibriumTolerance)) {
    throw InvalidArgument("equilibrium is not a fixed point of every noise atom (defect " +
                          std::to_string(defect) + ")");
  }
}

StochasticMap::StochasticMap(NoEquilibrium, std::size_t state_dim, NoiseAtoms noise, StepFunction step,
                             std::string name)
    : state_dim_(state_dim), noise_(std::move(noise)), step_(std::move(step)), name_(std::move(name)) {
  if (state_dim_ == 0 || state_dim_ > kMaxStateDim) {
    throw InvalidArgument("state dimension must be in [1, " + std::to_string(kMaxStateDim) + "]");
  }
  if (!step_) throw InvalidArgument("step function is empty");
  noise_.validate();
}

StochasticMap StochasticMap::without_equilibrium(std::size_t state_dim, NoiseAtoms noise, StepFunction step,
                                                 std::string name) {
  return StochasticMap(NoEquilibrium{}, state_dim, std::move(noise), std::move(step), std::move(name));
}

Vector StochasticMap::operator()(const Vector& x, std::size_t atom) const {
  Vector out(state_dim_);
  step(x, atom, out);
  return out;
}

Vector StochasticMap::apply(const Vector& x, std::span<const double> w) const {
  Vector out(state_dim_);
  step_(x, w, out);
  return out;
}

double StochasticMap::equilibrium_defect() const {
  double worst = 0.0;
  Vector out(state_dim_);
  for (std::size_t l = 0; l < noise_.size(); ++l) {
    step(equilibrium_, l, out);
    for (std::size_t i = 0; i < state_dim_; ++i) {
      const double d = std::abs(out[i] - equilibrium_[i]);
      if (!(d <= worst)) worst = d;  // propagates NaN
    }
  }
  return worst;
}

void OdeSpec::validate() const {
  if (state_dim == 0 || state_dim > kMaxStateDim) throw InvalidArgument("ode: bad state dimension");
  if (!field) throw InvalidArgument("ode: vector field is empty");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("ode: dt must be positive");
}

NoiseAtoms quantize_uniform_noise(double alpha, std::size_t count) {
  if (count == 0) throw InvalidArgument("noise.Q must be at least 1");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidArgument("noise.alpha must be >= 0");
  NoiseAtoms atoms;
  atoms.values.reserve(count);
  const double q = static_cast<double>(count);
  for (std::size_t l = 0; l < count; ++l) {
    // Midpoint (2l+1-Q)/Q * alpha; the integer numerator keeps atoms exactly symmetric.
    const double numerator = 2.0 * static_cast<double>(l) + 1.0 - q;
    atoms.values.push_back({numerator * alpha / q});
  }
  atoms.probs.assign(count, 1.0 / q);
  return atoms;
}

StepFunction integrator_step(const OdeSpec& spec) {
  spec.validate();
  const std::size_t d = spec.state_dim;
  const double h = spec.dt;
  if (spec.method == IntegrationMethod::Euler) {
    return [field = spec.field, d, h](std::span<const double> x, std::span<const double> w, std::span<double> out) {
      std::array<double, kMaxStateDim> k{};
      field(x, w, std::span(k.data(), d));
      for (std::size_t i = 0; i < d; ++i) out[i] = x[i] + h * k[i];
    };
  }
  return [field = spec.field, d, h](std::span<const double> x, std::span<const double> w, std::span<double> out) {
    std::array<double, kMaxStateDim> k1{}, k2{}, k3{}, k4{}, tmp{};
    const auto view = [d](std::array<double, kMaxStateDim>& a) { return std::span(a.data(), d); };
    field(x, w, view(k1));
    for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
    field(view(tmp), w, view(k2));
    for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
    field(view(tmp), w, view(k3));
    for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + h * k3[i];
    field(view(tmp), w, view(k4));
    for (std::size_t i = 0; i < d; ++i) out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  };
}

StochasticMap discretize_ode(const OdeSpec& spec, NoiseAtoms noise, Vector equilibrium, std::string name) {
  return StochasticMap(spec.state_dim, std::move(noise), integrator_step(spec), std::move(equilibrium),
                       std::move(name));
}

StochasticMap compose(const StochasticMap& map, unsigned n) {
  if (n == 0) throw InvalidArgument("compose: n must be positive");
  if (n == 1) return map;
  const NoiseAtoms& base = map.noise();
  const std::size_t q = base.dim();
  NoiseAtoms tuples;
  tuples.values.push_back({});
  tuples.probs.push_back(1.0);
  for (unsigned s = 0; s < n; ++s) {
    NoiseAtoms next;
    for (std::size_t t = 0; t < tuples.size(); ++t) {
      for (std::size_t l = 0; l < base.size(); ++l) {
        Vector v = tuples.values[t];
        v.insert(v.end(), base.values[l].begin(), base.values[l].end());
        next.values.push_back(std::move(v));
        next.probs.push_back(tuples.probs[t] * base.probs[l]);
      }
    }
    tuples = std::move(next);
  }
  const std::size_t d = map.state_dim();
  auto inner = map.step_function();
  StepFunction step = [inner, d, q, n](std::span<const double> x, std::span<const double> w, std::span<double> out) {
    std::array<double, kMaxStateDim> a{}, b{};
    std::copy(x.begin(), x.end(), a.begin());
    for (unsigned s = 0; s < n; ++s) {
      inner(std::span<const double>(a.data(), d), w.subspan(s * q, q), std::span(b.data(), d));
      a = b;
    }
    std::copy_n(a.begin(), d, out.begin());
  };
  std::string name = map.name() + "^" + std::to_string(n);
  if (!map.has_equilibrium()) {
    return StochasticMap::without_equilibrium(d, std::move(tuples), std::move(step), std::move(name));
  }
  return StochasticMap(d, std::move(tuples), std::move(step), map.equilibrium(), std::move(name));
}

StochasticMap builtin_pendulum(double alpha, std::size_t atoms, double dt, IntegrationMethod method) {
  OdeSpec spec;
  spec.state_dim = 2;
  spec.dt = dt;
  spec.method = method;
  spec.field = [](std::span<const double> x, std::span<const double> w, std::span<double> dx) {
    dx[0] = x[1];
    dx[1] = -std::sin(x[0]) - (w[0] + 0.7) * x[1];
  };
  return discretize_ode(spec, quantize_uniform_noise(alpha, atoms), {0.0, 0.0}, "pendulum");
}

StochasticMap builtin_rantzer(double alpha, std::size_t atoms, double dt, IntegrationMethod method) {
  OdeSpec spec;
  spec.state_dim = 2;
  spec.dt = dt;
  spec.method = method;
  spec.field = [](std::span<const double> x, std::span<const double> w, std::span<double> dx) {
    dx[0] = -2.0 * x[0] + x[0] * x[0] - x[1] * x[1];
    dx[1] = -6.0 * x[1] * (1.0 + w[0]) + 2.0 * x[0] * x[1];
  };
  return discretize_ode(spec, quantize_uniform_noise(alpha, atoms), {0.0, 0.0}, "rantzer");
}

StochasticMap builtin_contraction(double rate, double alpha, std::size_t atoms) {
  StepFunction step = [rate](std::span<const double> x, std::span<const double> w, std::span<double> out) {
    out[0] = (rate + w[0]) * x[0];
  };
  return StochasticMap(1, quantize_uniform_noise(alpha, atoms), std::move(step), {0.0}, "contraction");
}

StochasticMap builtin_identity(std::size_t dim) {
  StepFunction step = [](std::span<const double> x, std::span<const double>, std::span<double> out) {
    std::copy(x.begin(), x.end(), out.begin());
  };
  return StochasticMap(dim, quantize_uniform_noise(0.0, 1), std::move(step), {}, "identity");
}

namespace {

// Solves a small dense system in place by Gaussian elimination with partial
// pivoting. Returns false when the matrix is numerically singular.
bool solve_dense(std::vector<double>& a, std::vector<double>& b, std::size_t n) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
    }
    if (std::abs(a[pivot * n + col]) < 1e-300) return false;
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
      std::swap(b[col], b[pivot]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / a[col * n + col];
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i * n + c] * b[c];
    b[i] = s / a[i * n + i];
  }
  return true;
}

double max_abs(const Vector& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

std::optional<Vector> refine_fixed_point(const StochasticMap& map, std::span<const double> w, Vector start,
                                         double tol, std::size_t max_iterations) {
  const std::size_t d = map.state_dim();
  if (start.size() != d) throw InvalidArgument("refine_fixed_point: start has wrong dimension");
  const auto residual = [&](const Vector& x) {
    Vector r = map.apply(x, w);
    for (std::size_t i = 0; i < d; ++i) r[i] -= x[i];
    return r;
  };
  Vector x = std::move(start);
  Vector g = residual(x);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    if (max_abs(g) < tol) return x;
    std::vector<double> jac(d * d);
    for (std::size_t c = 0; c < d; ++c) {
      const double h = 1e-6 * std::max(1.0, std::abs(x[c]));
      Vector xp = x, xm = x;
      xp[c] += h;
      xm[c] -= h;
      const Vector gp = residual(xp), gm = residual(xm);
      for (std::size_t r = 0; r < d; ++r) jac[r * d + c] = (gp[r] - gm[r]) / (2.0 * h);
    }
    Vector delta(g.begin(), g.end());
    if (!solve_dense(jac, delta, d)) return std::nullopt;
    // Backtracking damping: halve the Newton step until the residual decreases.
    double lambda = 1.0;
    const double current = max_abs(g);
    Vector candidate(d);
    Vector g_candidate;
    for (int halvings = 0; halvings < 30; ++halvings, lambda *= 0.5) {
      for (std::size_t i = 0; i < d; ++i) candidate[i] = x[i] - lambda * delta[i];
      g_candidate = residual(candidate);
      if (max_abs(g_candidate) < current) break;
    }
    if (!(max_abs(g_candidate) < current)) return max_abs(g) < tol ? std::optional(x) : std::nullopt;
    x = candidate;
    g = std::move(g_candidate);
  }
  if (max_abs(g) < tol) return x;
  return std::nullopt;
}

}  // namespace stochlyap
