#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "stochlyap/errors.hpp"
#include "stochlyap/partition.hpp"

using namespace stochlyap;

namespace {

Partition unit_line(std::size_t cells) { return Partition({{0.0}, {1.0}, {false}}, {cells}); }

constexpr double pi = std::numbers::pi;

}  // namespace

TEST_SUITE("partition") {
  TEST_CASE("locate uses half-open cells") {
    const auto p = unit_line(4);
    CHECK(p.locate(std::vector{0.0}) == 0);
    CHECK(p.locate(std::vector{0.25}) == 1);
    CHECK(p.locate(std::vector{0.2499999}) == 0);
    CHECK(p.locate(std::vector{0.999999}) == 3);
    CHECK_FALSE(p.locate(std::vector{1.0}).has_value());
    CHECK_FALSE(p.locate(std::vector{-1e-12}).has_value());
  }

  TEST_CASE("wrapped axes reduce modulo the period") {
    const Partition p({{-pi}, {pi}, {true}}, {4});
    CHECK(p.locate(std::vector{3 * pi / 2}) == p.locate(std::vector{-pi / 2}));
    CHECK(p.locate(std::vector{pi}) == 0);
    CHECK(p.locate(std::vector{-pi - 0.1}) == 3);
    CHECK(p.locate(std::vector{101 * pi + 0.3}) == p.locate(std::vector{-pi + 0.3}));
  }

  TEST_CASE("NaN is an invalid state, infinity is outside") {
    const auto p = unit_line(4);
    CHECK_THROWS_AS((void)p.locate(std::vector{std::nan("")}), InvalidState);
    CHECK_FALSE(p.locate(std::vector{std::numeric_limits<double>::infinity()}).has_value());
  }

  TEST_CASE("domain and count validation") {
    CHECK_THROWS_AS(Partition({{1.0}, {0.0}, {false}}, {4}), InvalidArgument);
    CHECK_THROWS_AS(Partition({{0.0}, {1.0}, {false}}, {0}), InvalidArgument);
    CHECK_THROWS_AS(Partition({{0.0, 0.0}, {1.0, 1.0}, {false, false}}, {4}), InvalidArgument);
  }

  TEST_CASE("flat indices put axis 0 fastest") {
    const Partition p({{0.0, 0.0}, {2.0, 3.0}, {false, false}}, {2, 3});
    CHECK(p.cell_count() == 6);
    const std::size_t multi[] = {1, 2};
    CHECK(p.flat_index(multi) == 5);
    CHECK(p.multi_index(3) == std::vector<std::size_t>{1, 1});
    CHECK(p.locate(std::vector{1.5, 0.5}) == 1);
    CHECK(p.cell_center(4) == std::vector{0.5, 2.5});
  }

  TEST_CASE("cell volumes are equal and tile the domain") {
    const Partition p({{-pi, -4.0, 0.1}, {pi, 4.0, 0.7}, {true, false, false}}, {7, 5, 3});
    double total = 0.0;
    for (std::size_t c = 0; c < p.cell_count(); ++c) {
      total += p.cell_volume(c);
      CHECK(p.cell_volume(c) == doctest::Approx(p.cell_volume(0)).epsilon(1e-12));
    }
    CHECK(std::abs(total - p.domain().volume()) / p.domain().volume() < 1e-12);
  }

  TEST_CASE("samples fall inside their cell and are reproducible") {
    const Partition p({{-pi, -pi}, {pi, pi}, {true, true}}, {9, 7});
    for (std::size_t c = 0; c < p.cell_count(); ++c) {
      const auto pts = p.sample_cell(c, 20, 42);
      REQUIRE(pts.size() == 20);
      for (const auto& x : pts) {
        CHECK(p.locate(x) == c);
        for (std::size_t a = 0; a < 2; ++a) {
          CHECK(x[a] > p.cell_lower(c)[a]);
          CHECK(x[a] < p.cell_upper(c)[a]);
        }
      }
      CHECK(p.sample_cell(c, 20, 42) == pts);
    }
    CHECK(p.sample_cell(3, 5, 1) != p.sample_cell(3, 5, 2));
  }

  TEST_CASE("a single sample lies strictly inside the cell") {
    const auto p = unit_line(10);
    const auto pts = p.sample_cell(7, 1, 9);
    REQUIRE(pts.size() == 1);
    CHECK(pts[0][0] > 0.7);
    CHECK(pts[0][0] < 0.8);
  }

  TEST_CASE("sample means follow the uniform law") {
    const Partition p({{0.0, 0.0}, {1.0, 1.0}, {false, false}}, {1, 1});
    const auto pts = p.sample_cell(0, 10000, 7);
    double mean[2] = {0.0, 0.0};
    for (const auto& x : pts) {
      mean[0] += x[0] / 10000.0;
      mean[1] += x[1] / 10000.0;
    }
    CHECK(std::abs(mean[0] - 0.5) < 0.02);
    CHECK(std::abs(mean[1] - 0.5) < 0.02);
  }

  TEST_CASE("attractor cells intersect the closed box") {
    const Partition p({{0.0, 0.0}, {1.0, 1.0}, {false, false}}, {10, 10});
    const std::vector<double> x{0.55, 0.55};
    const auto single = p.attractor_cells(x, 0.0);
    REQUIRE(single.size() == 1);
    CHECK(single[0] == p.locate(x));

    const auto block = p.attractor_cells(x, 0.1);
    CHECK(block.size() == 9);

    const auto all = p.attractor_cells(x, 5.0);
    CHECK(all.size() == 100);

    const std::vector<double> corner{0.5, 0.5};
    CHECK(p.attractor_cells(corner, 0.0).size() == 1);
    CHECK(p.attractor_cells(corner, 1e-9).size() == 4);

    CHECK_THROWS_AS((void)p.attractor_cells(std::vector{1.5, 0.5}, 0.0), InvalidArgument);
  }

  TEST_CASE("attractor cells wrap around identified axes") {
    const Partition p({{-pi, -pi}, {pi, pi}, {true, true}}, {10, 10});
    const auto cells = p.attractor_cells(std::vector{-pi + 0.01, 0.01}, 0.1);
    bool has_far_column = false;
    for (CellIndex c : cells) has_far_column = has_far_column || p.multi_index(c)[0] == 9;
    CHECK(has_far_column);
  }

  TEST_CASE("CellSet keeps sorted unique indices") {
    const CellSet s{5, 1, 3, 1};
    CHECK(s.size() == 3);
    CHECK(s[0] == 1);
    CHECK(s.contains(3));
    CHECK_FALSE(s.contains(2));
    CHECK(s.complement(6) == CellSet{0, 2, 4});
  }

  TEST_CASE("clamp projects onto the closed domain") {
    const Partition p({{0.0, 0.0}, {1.0, 1.0}, {true, false}}, {4, 4});
    std::vector<double> x{1.25, 3.0};
    p.clamp_into(x);
    CHECK(x[0] == doctest::Approx(0.25));
    CHECK(x[1] < 1.0);
    CHECK(p.locate(x).has_value());
  }
}
