#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <variant>

#include "oracles.hpp"
#include "stochlyap/stability.hpp"
#include "stochlyap/transfer.hpp"

using namespace stochlyap;

namespace {

double norm1(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

// Sparse sub-Markov matrix whose rows carry at most max_mass.
std::vector<std::vector<double>> random_leaky(std::size_t n, double max_mass, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  for (auto& row : a) {
    double s = 0.0;
    for (auto& v : row) {
      v = u(rng) < 0.6 ? 0.0 : u(rng);
      s += v;
    }
    if (s == 0.0) continue;
    const double mass = max_mass * u(rng);
    for (auto& v : row) v *= mass / s;
  }
  return a;
}

}  // namespace

TEST_SUITE("properties") {
  TEST_CASE("closed-class test agrees with brute-force powers") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 300; ++trial) {
      const auto sample = oracle::random_sub_markov(8, rng);
      const auto p1 = SparseMatrix::from_dense(sample.p);
      const auto p64 = oracle::power(oracle::to_long(sample.p), 64);
      bool vanishes = true;
      for (const auto& row : p64)
        for (long double v : row) vanishes = vanishes && v < 1e-9L;
      CHECK(is_transient(p1).transient == vanishes);
      CHECK(find_closed_subpartitions(p1).empty() == vanishes);
    }
  }

  TEST_CASE("series satisfies the resolvent identity and dominates m") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    for (int trial = 0; trial < 40; ++trial) {
      const std::size_t n = 3 + trial % 10;
      const auto a = random_leaky(n, 0.7, rng);
      const auto p1 = SparseMatrix::from_dense(a);
      std::vector<double> m(n);
      for (auto& v : m) v = u(rng);
      const double alpha = 1.0 + 0.3 * (trial % 4) / 3.0;
      const auto outcome = lyapunov_measure_series(p1, m, alpha);
      REQUIRE(std::holds_alternative<LyapunovCertificate>(outcome));
      const auto& c = std::get<LyapunovCertificate>(outcome);
      const auto pushed = p1.left_multiply(c.mu_bar.values);
      const double scale = norm1(c.mu_bar.values);
      for (std::size_t j = 0; j < n; ++j) {
        CHECK(std::abs(c.mu_bar.values[j] - alpha * pushed[j] - m[j]) <= 1e-10 * scale);
        CHECK(c.mu_bar.values[j] >= m[j]);
      }
      const auto ref = oracle::resolvent_row(oracle::to_long(a), m, alpha);
      for (std::size_t j = 0; j < n; ++j) {
        CHECK(std::abs(c.mu_bar.values[j] - static_cast<double>(ref[j])) <= 1e-10 * scale);
      }
    }
  }

  TEST_CASE("a valid certificate implies geometric decay of the measure") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t n = 4 + trial % 6;
      const auto p1 = SparseMatrix::from_dense(random_leaky(n, 0.8, rng));
      const auto outcome = lyapunov_measure_series(p1, std::vector<double>(n, 1.0), 1.1);
      REQUIRE(std::holds_alternative<LyapunovCertificate>(outcome));
      const auto& c = std::get<LyapunovCertificate>(outcome);
      REQUIRE(c.valid());
      std::vector<double> mu = c.mu_bar.values;
      const double base = norm1(mu);
      double bound = base;
      for (int k = 1; k <= 50; ++k) {
        mu = p1.left_multiply(mu);
        bound *= c.gamma;
        CHECK(norm1(mu) <= bound * (1 + 1e-12));
      }
    }
  }

  TEST_CASE("solve and series agree where both apply") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 25; ++trial) {
      const std::size_t n = 5 + trial % 7;
      const auto a = random_leaky(n, 0.6, rng);
      const auto p1 = SparseMatrix::from_dense(a);
      const std::vector<double> g(n, 1.0);
      const auto solved = lyapunov_measure_solve(p1, 1.0, g);
      const auto series = lyapunov_measure_series(p1, g, 1.0);
      REQUIRE(std::holds_alternative<LyapunovCertificate>(solved));
      REQUIRE(std::holds_alternative<LyapunovCertificate>(series));
      const auto& x = std::get<LyapunovCertificate>(solved).mu_bar.values;
      const auto& y = std::get<LyapunovCertificate>(series).mu_bar.values;
      for (std::size_t j = 0; j < n; ++j) CHECK(x[j] == doctest::Approx(y[j]).epsilon(1e-9));
    }
  }

  TEST_CASE("Koopman function matches the column resolvent and the duality pairing") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t n = 3 + trial % 8;
      const auto a = random_leaky(n, 0.75, rng);
      const auto p1 = SparseMatrix::from_dense(a);
      std::vector<double> f(n), m(n);
      for (auto& v : f) v = u(rng);
      for (auto& v : m) v = u(rng);
      const auto V = std::get<KoopmanLyapunov>(koopman_lyapunov_function(p1, f));
      const auto mu = std::get<LyapunovCertificate>(lyapunov_measure_series(p1, m)).mu_bar.values;
      const auto ref = oracle::resolvent_column(oracle::to_long(a), f);
      double lhs = 0.0, rhs = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(V.values[i] == doctest::Approx(static_cast<double>(ref[i])).epsilon(1e-10));
        lhs += m[i] * V.values[i];
        rhs += mu[i] * f[i];
      }
      CHECK(std::abs(lhs - rhs) <= 1e-10 * std::abs(lhs));
      const auto pv = p1.right_multiply(V.values);
      for (std::size_t i = 0; i < n; ++i) CHECK(pv[i] <= V.contraction * V.values[i] * (1 + 1e-12));
    }
  }

  TEST_CASE("invariant measures are fixed points") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t n = 3 + trial % 6;
      std::vector<std::vector<double>> a(n, std::vector<double>(n));
      for (auto& row : a) {
        double s = 0.0;
        for (auto& v : row) s += (v = u(rng) + 0.01);
        for (auto& v : row) v /= s;
      }
      const auto result = invariant_measure(SparseMatrix::from_dense(a), 1e-12);
      CHECK(result.converged);
      const auto pushed = SparseMatrix::from_dense(a).left_multiply(result.measure.values);
      double diff = 0.0;
      for (std::size_t j = 0; j < n; ++j) diff += std::abs(pushed[j] - result.measure.values[j]);
      CHECK(diff < 1e-11);
    }
  }

  TEST_CASE("locate is periodic on wrapped axes and consistent with sampling") {
    constexpr double pi = std::numbers::pi;
    const Partition p({{-pi, -4.0}, {pi, 4.0}, {true, false}}, {13, 11});
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> ux(-pi, pi), uy(-4.0, 4.0);
    for (int k = 0; k < 2000; ++k) {
      const std::vector<double> x{ux(rng), uy(rng)};
      const auto c = p.locate(x);
      REQUIRE(c.has_value());
      CHECK(p.locate(std::vector{x[0] + 2 * pi, x[1]}) == c);
      CHECK(p.locate(std::vector{x[0] - 6 * pi, x[1]}) == c);
    }
    for (std::size_t c = 0; c < p.cell_count(); ++c) {
      for (const auto& x : p.sample_cell(c, 8, 77)) CHECK(p.locate(x) == c);
    }
  }
}
