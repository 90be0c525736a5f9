#include <doctest.h>

#include <limits>

#include "stochlyap/errors.hpp"
#include "stochlyap/simulate.hpp"

using namespace stochlyap;

namespace {

StochasticMap scale_map(double factor) {
  StepFunction step = [factor](std::span<const double> x, std::span<const double>, std::span<double> out) {
    out[0] = factor * x[0];
  };
  return StochasticMap(1, quantize_uniform_noise(0.0, 1), step, {0.0}, "scale");
}

const Domain kLine{{-1.0}, {1.0}, {false}};

}  // namespace

TEST_SUITE("simulate") {
  TEST_CASE("contraction converges everywhere") {
    McConfig cfg;
    cfg.n_init = 500;
    cfg.n_steps = 20;
    cfg.n_noise_paths = 2;
    cfg.epsilon = 0.01;
    const auto r = estimate_unstable_fraction(scale_map(0.5), kLine, cfg);
    CHECK(r.unstable_fraction == 0.0);
    CHECK(r.unstable_count == 0);
    CHECK(r.horizon == 20);
  }

  TEST_CASE("expansion escapes almost everywhere") {
    McConfig cfg;
    cfg.n_init = 500;
    cfg.n_steps = 40;
    cfg.n_noise_paths = 1;
    cfg.epsilon = 0.01;
    const auto r = estimate_unstable_fraction(scale_map(2.0), kLine, cfg);
    CHECK(r.unstable_fraction > 0.98);
    CHECK(r.escaped_paths > 0);
    CHECK(r.half_width > 0.0);
  }

  TEST_CASE("non-finite trajectories count as non-convergent") {
    StepFunction blow = [](std::span<const double> x, std::span<const double>, std::span<double> out) {
      out[0] = x[0] == 0.0 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
    };
    StochasticMap map(1, quantize_uniform_noise(0.0, 1), blow, {}, "nan");
    McConfig cfg;
    cfg.n_init = 50;
    cfg.n_steps = 3;
    const auto r = estimate_unstable_fraction(map, {{-1.0}, {1.0}, {true}}, cfg);
    CHECK(r.unstable_fraction == 1.0);
    CHECK(r.non_finite_paths == 50 * cfg.n_noise_paths);
  }

  TEST_CASE("a map without an equilibrium is rejected") {
    StepFunction step = [](std::span<const double> x, std::span<const double>, std::span<double> out) {
      out[0] = x[0] + 0.5;
    };
    const auto map = StochasticMap::without_equilibrium(1, quantize_uniform_noise(0.0, 1), step);
    CHECK_FALSE(map.has_equilibrium());
    CHECK_THROWS_AS(estimate_unstable_fraction(map, {{-1.0}, {1.0}, {true}}, McConfig{}), InvalidArgument);
  }

  TEST_CASE("pendulum with moderate noise is stable in simulation") {
    McConfig cfg;
    cfg.n_init = 300;
    cfg.n_steps = 2000;
    cfg.n_noise_paths = 3;
    const auto r = estimate_unstable_fraction(builtin_pendulum(0.5, 5, 0.1),
                                              {{-3.141592653589793, -3.141592653589793},
                                               {3.141592653589793, 3.141592653589793},
                                               {true, true}},
                                              cfg);
    CHECK(r.unstable_fraction < 0.01);
  }

  TEST_CASE("results are reproducible and thread-independent") {
    McConfig cfg;
    cfg.n_init = 200;
    cfg.n_steps = 100;
    cfg.seed = 5;
    cfg.record_verdicts = true;
    const auto map = builtin_contraction(0.9, 0.5, 5);
    cfg.threads = 1;
    const auto a = estimate_unstable_fraction(map, kLine, cfg);
    cfg.threads = 3;
    const auto b = estimate_unstable_fraction(map, kLine, cfg);
    CHECK(a.unstable_fraction == b.unstable_fraction);
    REQUIRE(a.verdicts.size() == 200);
    for (std::size_t i = 0; i < 200; ++i) {
      CHECK(a.verdicts[i].x == b.verdicts[i].x);
      CHECK(a.verdicts[i].converged_fraction == b.verdicts[i].converged_fraction);
    }
  }

  TEST_CASE("configuration validation") {
    McConfig cfg;
    cfg.n_init = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.epsilon = 0.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.delta = 1.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  }
}
