#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "stochlyap/errors.hpp"
#include "stochlyap/system.hpp"

using namespace stochlyap;

namespace {

double atom_sum(const NoiseAtoms& n) {
  double s = 0.0;
  for (std::size_t l = 0; l < n.size(); ++l) s += n.values[l][0] * n.probs[l];
  return s;
}

}  // namespace

TEST_SUITE("system") {
  TEST_CASE("quantized uniform noise uses cell midpoints with equal weights") {
    const auto degenerate = quantize_uniform_noise(0.0, 1);
    REQUIRE(degenerate.size() == 1);
    CHECK(degenerate.values[0][0] == 0.0);
    CHECK(degenerate.probs[0] == 1.0);

    const auto five = quantize_uniform_noise(0.5, 5);
    const double expected[] = {-0.4, -0.2, 0.0, 0.2, 0.4};
    REQUIRE(five.size() == 5);
    for (std::size_t l = 0; l < 5; ++l) {
      CHECK(five.values[l][0] == doctest::Approx(expected[l]).epsilon(1e-15));
      CHECK(five.probs[l] == doctest::Approx(0.2));
    }

    const auto two = quantize_uniform_noise(1.0, 2);
    CHECK(two.values[0][0] == -0.5);
    CHECK(two.values[1][0] == 0.5);
    CHECK(two.probs[0] == 0.5);
  }

  TEST_CASE("noise quantization rejects zero atoms") {
    CHECK_THROWS_AS(quantize_uniform_noise(0.5, 0), InvalidArgument);
    CHECK_THROWS_AS(quantize_uniform_noise(-0.1, 3), InvalidArgument);
  }

  TEST_CASE("quantized atoms are symmetric with zero mean") {
    for (std::size_t q = 1; q <= 12; ++q) {
      for (double alpha : {0.0, 0.3, 1.0, 2.5}) {
        const auto n = quantize_uniform_noise(alpha, q);
        double prob = 0.0;
        for (double p : n.probs) prob += p;
        CHECK(prob == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(atom_sum(n)) < 1e-15);
        for (std::size_t l = 0; l < q; ++l) {
          CHECK(n.values[l][0] == -n.values[q - 1 - l][0]);
          CHECK(n.probs[l] == n.probs[q - 1 - l]);
        }
      }
    }
  }

  TEST_CASE("noise atom validation") {
    NoiseAtoms bad{{{0.0}, {1.0}}, {0.5, 0.6}};
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    NoiseAtoms empty;
    CHECK_THROWS_AS(empty.validate(), InvalidArgument);
    NoiseAtoms negative{{{0.0}, {1.0}}, {1.5, -0.5}};
    CHECK_THROWS_AS(negative.validate(), InvalidArgument);
  }

  TEST_CASE("Euler and RK4 steps of a linear decay") {
    const VectorField decay = [](std::span<const double> x, std::span<const double>, std::span<double> out) {
      out[0] = -x[0];
    };
    const auto euler = discretize_ode({1, decay, 0.1, IntegrationMethod::Euler}, quantize_uniform_noise(0.3, 3));
    for (std::size_t l = 0; l < 3; ++l) CHECK(euler({1.0}, l)[0] == doctest::Approx(0.9).epsilon(1e-15));

    const auto rk4 = discretize_ode({1, decay, 0.1, IntegrationMethod::RK4}, quantize_uniform_noise(0.0, 1));
    CHECK(rk4({1.0}, 0)[0] == doctest::Approx(0.9048375).epsilon(1e-7));
  }

  TEST_CASE("RK4 on linear fields equals the degree-4 Taylor polynomial") {
    for (double a : {-3.0, -1.0, -0.25, 0.5, 2.0}) {
      for (double h : {0.01, 0.1, 0.3}) {
        const VectorField field = [a](std::span<const double> x, std::span<const double>, std::span<double> out) {
          out[0] = a * x[0];
        };
        const auto map = discretize_ode({1, field, h, IntegrationMethod::RK4}, quantize_uniform_noise(0.0, 1));
        const double z = a * h;
        const double taylor = 1 + z + z * z / 2 + z * z * z / 6 + z * z * z * z / 24;
        CHECK(map({1.0}, 0)[0] == doctest::Approx(taylor).epsilon(1e-14));
      }
    }
  }

  TEST_CASE("ODE spec validation") {
    const VectorField zero = [](std::span<const double>, std::span<const double>, std::span<double> out) {
      out[0] = 0.0;
    };
    CHECK_THROWS_AS(OdeSpec({1, zero, 0.0, IntegrationMethod::RK4}).validate(), InvalidArgument);
    CHECK_THROWS_AS(OdeSpec({1, zero, -0.1, IntegrationMethod::RK4}).validate(), InvalidArgument);
    CHECK_NOTHROW(OdeSpec({1, zero, 0.1, IntegrationMethod::Euler}).validate());
  }

  TEST_CASE("pendulum keeps the origin fixed and matches a fine reference integrator") {
    const auto noisy = builtin_pendulum(0.5, 5, 0.1);
    for (std::size_t l = 0; l < noisy.atom_count(); ++l) {
      const auto y = noisy({0.0, 0.0}, l);
      CHECK(y[0] == 0.0);
      CHECK(y[1] == 0.0);
    }

    const auto det = builtin_pendulum(0.0, 1, 0.1);
    const auto y = det({0.1, 0.0}, 0);
    const auto ref = oracle::integrate(
        [](const std::vector<long double>& x) {
          return std::vector<long double>{x[1], -std::sin(x[0]) - 0.7L * x[1]};
        },
        {0.1L, 0.0L}, 0.1L, 4000);
    CHECK(std::abs(y[0] - static_cast<double>(ref[0])) < 1e-8);
    CHECK(std::abs(y[1] - static_cast<double>(ref[1])) < 1e-8);

    const auto wide = builtin_pendulum(1.0, 5, 0.1);
    const double atoms[] = {-0.8, -0.4, 0.0, 0.4, 0.8};
    for (std::size_t l = 0; l < 5; ++l) CHECK(wide.noise().values[l][0] == doctest::Approx(atoms[l]).epsilon(1e-15));
  }

  TEST_CASE("noise enters the pendulum damping term only") {
    const auto map = builtin_pendulum(1.0, 2, 0.1, IntegrationMethod::Euler);
    const auto lo = map({0.3, 0.2}, 0);
    const auto hi = map({0.3, 0.2}, 1);
    CHECK(lo[0] == hi[0]);
    CHECK(lo[1] - hi[1] == doctest::Approx(0.1 * 1.0 * 0.2).epsilon(1e-12));
  }

  TEST_CASE("Rantzer system fixed points") {
    const auto map = builtin_rantzer(0.5, 5, 0.1);
    for (std::size_t l = 0; l < map.atom_count(); ++l) {
      const auto y = map({0.0, 0.0}, l);
      CHECK(y[0] == 0.0);
      CHECK(y[1] == 0.0);
    }
    const auto det = builtin_rantzer(0.0, 1, 0.1);
    const double w[] = {0.0};
    const auto at_two = det({2.0, 0.0}, 0);
    CHECK(std::abs(at_two[0] - 2.0) < 1e-8);
    CHECK(std::abs(at_two[1]) < 1e-8);

    for (double sign : {1.0, -1.0}) {
      const auto fp = refine_fixed_point(det, w, {2.9, sign * 1.8});
      REQUIRE(fp.has_value());
      CHECK((*fp)[0] == doctest::Approx(3.0).epsilon(1e-9));
      CHECK((*fp)[1] == doctest::Approx(sign * std::sqrt(3.0)).epsilon(1e-9));
    }
  }

  TEST_CASE("fixed-point refinement converges from nearby starts") {
    const auto det = builtin_rantzer(0.0, 1, 0.1);
    const double w[] = {0.0};
    const auto origin = refine_fixed_point(det, w, {0.05, -0.04});
    REQUIRE(origin.has_value());
    CHECK(std::abs((*origin)[0]) < 1e-6);
    CHECK(std::abs((*origin)[1]) < 1e-6);
    const auto two = refine_fixed_point(det, w, {2.05, 0.03});
    REQUIRE(two.has_value());
    CHECK(std::abs((*two)[0] - 2.0) < 1e-6);
    CHECK(std::abs((*two)[1]) < 1e-6);
  }

  TEST_CASE("built-in equilibria are fixed for every atom") {
    for (const auto& map : {builtin_pendulum(1.0, 7, 0.1), builtin_rantzer(1.0, 7, 0.1),
                            builtin_contraction(0.5, 0.4, 4), builtin_pendulum(0.5, 3, 0.05, IntegrationMethod::Euler)}) {
      CHECK(map.equilibrium_defect() <= 1e-9);
    }
  }

  TEST_CASE("a map whose equilibrium is not fixed is rejected") {
    StepFunction shift = [](std::span<const double> x, std::span<const double>, std::span<double> out) {
      out[0] = x[0] + 1.0;
    };
    CHECK_THROWS_AS(StochasticMap(1, quantize_uniform_noise(0.0, 1), shift, {0.0}), InvalidArgument);
  }

  TEST_CASE("composition enumerates noise tuples") {
    const auto base = builtin_contraction(0.5, 0.2, 2);
    const auto twice = compose(base, 2);
    REQUIRE(twice.atom_count() == 4);
    double total = 0.0;
    for (double p : twice.noise().probs) total += p;
    CHECK(total == doctest::Approx(1.0));
    for (std::size_t a = 0; a < 2; ++a) {
      for (std::size_t b = 0; b < 2; ++b) {
        const auto expected = base(base({0.8}, a), b);
        bool found = false;
        for (std::size_t l = 0; l < 4; ++l) found = found || twice({0.8}, l)[0] == expected[0];
        CHECK(found);
      }
    }
  }
}
