#include "stochlyap/stability.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <utility>

#include "stochlyap/errors.hpp"

namespace stochlyap {

namespace {

// Rows that lose more than this much mass count as leaking out of their class.
constexpr double kLeakTolerance = 1e-12;

double norm1(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

void require_square(const SparseMatrix& p1, const char* what) {
  if (p1.rows() != p1.cols()) throw InvalidArgument(std::string(what) + ": P1 must be square");
}

void require_positive(std::span<const double> v, std::size_t n, const char* what) {
  if (v.size() != n) throw InvalidArgument(std::string(what) + ": vector length does not match P1");
  for (double x : v) {
    if (!(x > 0.0) || !std::isfinite(x)) throw InvalidArgument(std::string(what) + ": entries must be positive");
  }
}

// Iterative Tarjan; returns the component id of every vertex.
std::vector<std::size_t> strongly_connected_components(const SparseMatrix& g, std::size_t& count) {
  const std::size_t n = g.rows();
  constexpr std::size_t kUnvisited = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> index(n, kUnvisited), low(n, 0), component(n, kUnvisited);
  std::vector<char> on_stack(n, 0);
  std::vector<std::size_t> stack;
  std::vector<std::pair<std::size_t, std::size_t>> call;  // (vertex, next edge offset)
  std::size_t next_index = 0;
  count = 0;
  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != kUnvisited) continue;
    call.emplace_back(root, 0);
    while (!call.empty()) {
      auto& [v, edge] = call.back();
      if (edge == 0 && index[v] == kUnvisited) {
        index[v] = low[v] = next_index++;
        stack.push_back(v);
        on_stack[v] = 1;
      }
      const auto cols = g.row_cols(v);
      if (edge < cols.size()) {
        const std::size_t w = cols[edge++];
        if (index[w] == kUnvisited) {
          call.emplace_back(w, 0);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      if (low[v] == index[v]) {
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          component[w] = count;
        } while (w != v);
        ++count;
      }
      const std::size_t finished = v;
      call.pop_back();
      if (!call.empty()) {
        auto& parent = call.back().first;
        low[parent] = std::min(low[parent], low[finished]);
      }
    }
  }
  return component;
}

}  // namespace

double MeasureVector::total() const { return std::accumulate(values.begin(), values.end(), 0.0); }

void MeasureVector::validate() const {
  for (double v : values) {
    if (!(v >= 0.0)) throw InvalidArgument("measure: entries must be nonnegative");
  }
  if (normalization == Normalization::Probability && std::abs(total() - 1.0) > 1e-10) {
    throw InvalidArgument("measure: probability vector does not sum to 1");
  }
}

bool LyapunovCertificate::valid() const {
  if (!(residual < 0.0)) return false;
  return std::all_of(mu_bar.values.begin(), mu_bar.values.end(), [](double v) { return v > 0.0; });
}

std::vector<CellSet> find_closed_subpartitions(const SparseMatrix& p1) {
  require_square(p1, "find_closed_subpartitions");
  std::size_t count = 0;
  const auto component = strongly_connected_components(p1, count);
  std::vector<char> closed(count, 1);
  for (std::size_t i = 0; i < p1.rows(); ++i) {
    if (p1.row_sum(i) < 1.0 - kLeakTolerance) closed[component[i]] = 0;
    for (std::size_t j : p1.row_cols(i)) {
      if (component[j] != component[i]) closed[component[i]] = 0;
    }
  }
  std::vector<std::vector<CellIndex>> members(count);
  for (std::size_t i = 0; i < p1.rows(); ++i) {
    if (closed[component[i]]) members[component[i]].push_back(i);
  }
  std::vector<CellSet> out;
  for (auto& m : members) {
    if (!m.empty()) out.emplace_back(std::move(m));
  }
  std::sort(out.begin(), out.end(), [](const CellSet& a, const CellSet& b) { return a[0] < b[0]; });
  return out;
}

TransienceResult estimate_spectral_radius(const SparseMatrix& p1, double tol, std::size_t n_max) {
  require_square(p1, "estimate_spectral_radius");
  if (!(tol > 0.0)) throw InvalidArgument("spectral radius: tol must be positive");
  TransienceResult result;
  const std::size_t n = p1.rows();
  if (n == 0) {
    result.rho_converged = true;
    return result;
  }
  constexpr std::size_t kWindow = 64;
  Vector v(n, 1.0 / static_cast<double>(n));
  std::deque<double> log_ratios;
  double previous_ratio = -1.0;
  double previous_window = -1.0;
  for (std::size_t k = 1; k <= n_max; ++k) {
    Vector w = p1.left_multiply(v);
    const double s = norm1(w);
    result.iterations = k;
    if (s == 0.0) {
      result.rho_estimate = 0.0;
      result.rho_converged = true;
      return result;
    }
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / s;
    if (std::abs(s - previous_ratio) <= tol * s) {
      result.rho_estimate = s;
      result.rho_converged = true;
      return result;
    }
    previous_ratio = s;
    log_ratios.push_back(std::log(s));
    if (log_ratios.size() > kWindow) log_ratios.pop_front();
    result.rho_estimate = s;
    if (k % kWindow == 0) {
      const double window =
          std::exp(std::accumulate(log_ratios.begin(), log_ratios.end(), 0.0) / static_cast<double>(kWindow));
      result.rho_estimate = window;
      if (previous_window > 0.0 && std::abs(window - previous_window) <= std::sqrt(tol) * window) {
        result.rho_converged = true;
        return result;
      }
      previous_window = window;
    }
  }
  if (!log_ratios.empty()) {
    result.rho_estimate = std::exp(std::accumulate(log_ratios.begin(), log_ratios.end(), 0.0) /
                                   static_cast<double>(log_ratios.size()));
  }
  return result;
}

TransienceResult is_transient(const SparseMatrix& p1, double tol, std::size_t n_max) {
  TransienceResult result = estimate_spectral_radius(p1, tol, n_max);
  result.transient = find_closed_subpartitions(p1).empty();
  return result;
}

CertificateCheck verify_certificate(const SparseMatrix& p1, std::span<const double> mu_bar, double gamma) {
  require_square(p1, "verify_certificate");
  if (mu_bar.size() != p1.rows()) throw InvalidArgument("verify_certificate: mu_bar length does not match P1");
  const Vector pushed = p1.left_multiply(mu_bar);
  CertificateCheck check;
  check.residual = -std::numeric_limits<double>::infinity();
  bool positive = true;
  for (std::size_t j = 0; j < mu_bar.size(); ++j) {
    check.residual = std::max(check.residual, pushed[j] - gamma * mu_bar[j]);
    positive = positive && mu_bar[j] > 0.0;
  }
  check.valid = positive && check.residual < 0.0;
  return check;
}

SeriesOutcome lyapunov_measure_series(const SparseMatrix& p1, std::span<const double> m, double alpha, double tol,
                                      std::size_t k_max) {
  require_square(p1, "lyapunov_measure_series");
  require_positive(m, p1.rows(), "lyapunov_measure_series");
  if (!(alpha >= 1.0) || !std::isfinite(alpha)) throw InvalidArgument("lyapunov_measure_series: alpha must be >= 1");
  if (!(tol > 0.0)) throw InvalidArgument("lyapunov_measure_series: tol must be positive");

  if (!find_closed_subpartitions(p1).empty()) return Divergent{"P1 has a closed sub-partition (rho = 1)"};
  const TransienceResult spectral = estimate_spectral_radius(p1, 1e-12, 20000);
  const double predicted = alpha * spectral.rho_estimate;
  if (spectral.rho_converged && predicted >= 1.0) {
    return Divergent{"alpha * rho(P1) >= 1, series terms do not decay"};
  }

  Vector sum(m.begin(), m.end());
  Vector term(m.begin(), m.end());
  double previous = norm1(term);
  std::size_t k = 0;
  bool converged = previous == 0.0;
  while (!converged && k < k_max) {
    term = p1.left_multiply(term);
    for (double& t : term) t *= alpha;
    ++k;
    for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += term[j];
    const double current = norm1(term);
    if (current == 0.0) {
      converged = true;
      break;
    }
    const double rate = std::max(predicted, current / previous);
    if (rate < 1.0 && current < tol * (1.0 - rate)) converged = true;
    previous = current;
  }
  if (!converged) return Divergent{"series did not converge within k_max terms"};

  LyapunovCertificate cert;
  cert.alpha = alpha;
  cert.gamma = 1.0 / alpha;
  cert.terms = k;
  cert.mu_bar.values = std::move(sum);
  cert.mu_bar.normalization = Normalization::Raw;
  cert.residual = verify_certificate(p1, cert.mu_bar.values, cert.gamma).residual;
  return cert;
}

SolveOutcome lyapunov_measure_solve(const SparseMatrix& p1, double alpha, std::span<const double> g) {
  require_square(p1, "lyapunov_measure_solve");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("lyapunov_measure_solve: alpha must lie in (0, 1]");
  require_positive(g, p1.rows(), "lyapunov_measure_solve");
  const auto n = static_cast<Eigen::Index>(p1.rows());

  // mu (alpha I - P1) = g  <=>  (alpha I - P1)^T mu^T = g^T
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(p1.nnz() + p1.rows());
  for (std::size_t i = 0; i < p1.rows(); ++i) {
    triplets.emplace_back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i), alpha);
    const auto cols = p1.row_cols(i);
    const auto vals = p1.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      triplets.emplace_back(static_cast<Eigen::Index>(cols[k]), static_cast<Eigen::Index>(i), -vals[k]);
    }
  }
  Eigen::SparseMatrix<double> system(n, n);
  system.setFromTriplets(triplets.begin(), triplets.end());
  system.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.analyzePattern(system);
  lu.factorize(system);
  if (lu.info() != Eigen::Success) return Infeasible{"alpha I - P1 is singular"};
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) rhs[i] = g[static_cast<std::size_t>(i)];
  const Eigen::VectorXd solution = lu.solve(rhs);
  if (lu.info() != Eigen::Success) return Infeasible{"sparse solve failed"};

  LyapunovCertificate cert;
  cert.alpha = alpha;
  cert.gamma = alpha;
  cert.mu_bar.values.assign(solution.data(), solution.data() + n);
  for (double v : cert.mu_bar.values) {
    if (!(v > 0.0) || !std::isfinite(v)) return Infeasible{"solution is not strictly positive (rho(P1) >= alpha)"};
  }
  cert.residual = verify_certificate(p1, cert.mu_bar.values, cert.gamma).residual;
  return cert;
}

DecayFit geometric_decay_fit(const SparseMatrix& p1, std::span<const double> m, std::size_t n_max) {
  require_square(p1, "geometric_decay_fit");
  if (n_max < 2) throw InvalidArgument("geometric_decay_fit: n_max must be at least 2");
  if (m.size() != p1.rows()) throw InvalidArgument("geometric_decay_fit: m length does not match P1");
  Vector s(n_max + 1, 0.0);
  Vector v(m.begin(), m.end());
  s[0] = norm1(v);
  for (std::size_t n = 1; n <= n_max; ++n) {
    v = p1.left_multiply(v);
    s[n] = norm1(v);
  }
  std::size_t end = n_max + 1;
  std::size_t positive_tail = 0;
  for (std::size_t n = n_max / 2; n <= n_max; ++n) positive_tail += (s[n] > 0.0 && std::isfinite(s[n])) ? 1 : 0;
  if (positive_tail < 2) {
    // Underflow: fit over the tail half of the nonzero prefix.
    end = 0;
    while (end <= n_max && s[end] > 0.0 && std::isfinite(s[end])) ++end;
  }
  DecayFit fit;
  if (end == 0) return fit;
  if (end == 1) {
    fit.K = s[0];
    fit.points = 1;
    return fit;
  }
  const std::size_t begin = (end - 1) / 2;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t count = 0;
  for (std::size_t n = begin; n < end; ++n) {
    if (!(s[n] > 0.0) || !std::isfinite(s[n])) continue;
    const double x = static_cast<double>(n);
    const double y = std::log(s[n]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++count;
  }
  fit.points = count;
  if (count < 2) {
    fit.K = s[0];
    return fit;
  }
  const double c = static_cast<double>(count);
  const double slope = (c * sxy - sx * sy) / (c * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / c;
  fit.beta = std::exp(slope);
  fit.K = std::exp(intercept);
  return fit;
}

InvariantMeasureResult invariant_measure(const SparseMatrix& p, double tol, std::size_t n_max) {
  const std::size_t n = p.rows();
  if (n == 0 || p.cols() < n) throw InvalidArgument("invariant_measure: need an L x L or L x (L+1) matrix");
  if (!(tol > 0.0)) throw InvalidArgument("invariant_measure: tol must be positive");
  InvariantMeasureResult result;
  Vector mu(n, 1.0 / static_cast<double>(n));
  Vector next(n);
  for (std::size_t it = 0; it <= n_max; ++it) {
    const Vector pushed = p.left_multiply(mu);
    double mass = 0.0;
    for (std::size_t j = 0; j < n; ++j) mass += pushed[j];
    result.iterations = it;
    if (!(mass > 0.0)) break;  // every cell leaks all of its mass
    double residual = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      next[j] = pushed[j] / mass;
      residual += std::abs(next[j] - mu[j]);
    }
    result.residual = residual;
    if (residual < tol) {
      result.converged = true;
      break;
    }
    if (it == n_max) break;
    // Lazy (Cesaro) step: same fixed points, no periodic cycling.
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      mu[j] = 0.5 * (mu[j] + next[j]);
      total += mu[j];
    }
    for (double& x : mu) x /= total;
  }
  result.measure.values = std::move(mu);
  result.measure.normalization = Normalization::Probability;
  return result;
}

KoopmanOutcome koopman_lyapunov_function(const SparseMatrix& p1, std::span<const double> f, double tol,
                                         std::size_t k_max) {
  require_square(p1, "koopman_lyapunov_function");
  if (f.size() != p1.rows()) throw InvalidArgument("koopman_lyapunov_function: f length does not match P1");
  for (double x : f) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidArgument("koopman_lyapunov_function: f must be nonnegative");
  }
  if (!find_closed_subpartitions(p1).empty()) return Divergent{"P1 is not transient"};
  const double rho = estimate_spectral_radius(p1, 1e-12, 20000).rho_estimate;

  KoopmanLyapunov out;
  out.values.assign(f.begin(), f.end());
  Vector term(f.begin(), f.end());
  double previous = norm1(term);
  bool converged = previous == 0.0;
  std::size_t k = 0;
  while (!converged && k < k_max) {
    term = p1.right_multiply(term);
    ++k;
    for (std::size_t i = 0; i < term.size(); ++i) out.values[i] += term[i];
    const double current = norm1(term);
    if (current == 0.0) {
      converged = true;
      break;
    }
    const double rate = std::max(rho, current / previous);
    if (rate < 1.0 && current < tol * (1.0 - rate)) converged = true;
    previous = current;
  }
  if (!converged) return Divergent{"resolvent series did not converge within k_max terms"};
  out.terms = k;
  const Vector pulled = p1.right_multiply(out.values);
  for (std::size_t i = 0; i < pulled.size(); ++i) {
    if (out.values[i] > 0.0) out.contraction = std::max(out.contraction, pulled[i] / out.values[i]);
  }
  return out;
}

Vector moment_observable(const Partition& partition, const CellSet& cells, std::span<const double> x_eq,
                         double order) {
  if (x_eq.size() != partition.dim()) throw InvalidArgument("moment_observable: equilibrium has wrong dimension");
  Vector f;
  f.reserve(cells.size());
  for (CellIndex c : cells) {
    const Vector center = partition.cell_center(c);
    double r2 = 0.0;
    for (std::size_t i = 0; i < center.size(); ++i) r2 += (center[i] - x_eq[i]) * (center[i] - x_eq[i]);
    f.push_back(std::pow(std::sqrt(r2), order));
  }
  return f;
}

Vector reference_measure(const Partition& partition, const Decomposition& dec) {
  Vector m;
  m.reserve(dec.local_size());
  double total = 0.0;
  for (CellIndex c : dec.x1) {
    m.push_back(partition.cell_volume(c));
    total += m.back();
  }
  if (dec.has_sink_state) m.push_back(total / static_cast<double>(dec.x1.size()));
  return m;
}

StabilityReport analyze(const TransferMatrix& tm, const Partition& partition, const CellSet& x0,
                        const AnalysisOptions& options) {
  if (partition.cell_count() != tm.cell_count) throw InvalidArgument("analyze: partition does not match matrix");
  const Decomposition dec = decompose(tm, x0);
  StabilityReport report;
  report.x0 = dec.x0;
  report.x1 = dec.x1;
  report.escaped_mass = tm.escaped_mass();
  report.sink_state_count = dec.has_sink_state ? 1 : 0;

  for (const CellSet& local : find_closed_subpartitions(dec.p1)) {
    std::vector<CellIndex> global;
    for (std::size_t k : local) {
      if (k < dec.x1.size()) {
        global.push_back(dec.x1[k]);
      } else {
        report.sink_obstruction = true;
      }
    }
    if (!global.empty()) report.obstructions.emplace_back(std::move(global));
  }
  report.transient = report.obstructions.empty() && !report.sink_obstruction;

  const TransienceResult spectral = estimate_spectral_radius(dec.p1, options.tol, options.power_iterations);
  report.rho_estimate = spectral.rho_estimate;
  report.rho_converged = spectral.rho_converged;

  const Vector m = reference_measure(partition, dec);
  if (options.method == CertificateMethod::Series) {
    auto outcome = lyapunov_measure_series(dec.p1, m, options.alpha_weight, options.tol, options.k_max);
    if (auto* cert = std::get_if<LyapunovCertificate>(&outcome)) {
      report.certificate = std::move(*cert);
    } else {
      report.certificate_failure = std::get<Divergent>(outcome).reason;
    }
  } else {
    auto outcome = lyapunov_measure_solve(dec.p1, options.solve_alpha, m);
    if (auto* cert = std::get_if<LyapunovCertificate>(&outcome)) {
      report.certificate = std::move(*cert);
    } else {
      report.certificate_failure = std::get<Infeasible>(outcome).reason;
    }
  }
  if (report.certificate && !report.certificate->valid()) {
    report.certificate_failure = "certificate inequality not satisfied (residual >= 0)";
    report.certificate.reset();
  }
  if (report.certificate && !report.transient) {
    // A valid certificate forces rho(P1) < 1, which rules out closed classes.
    report.certificate_failure = "numerical certificate contradicts the closed-class test";
    report.certificate.reset();
  }
  report.decay_fit = geometric_decay_fit(dec.p1, m, std::max<std::size_t>(2, options.decay_steps));
  return report;
}

}  // namespace stochlyap
