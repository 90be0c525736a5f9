#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "stochlyap/errors.hpp"
#include "stochlyap/io.hpp"

using namespace stochlyap;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "stochlyap_io_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("doubles round-trip exactly") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int k = 0; k < 2000; ++k) {
      const double x = u(rng) * std::pow(10.0, k % 40 - 20);
      CHECK(parse_double(format_double(x)) == x);
    }
    CHECK(format_double(0.1) == "0.1");
    CHECK(std::isinf(parse_double("-inf")));
    CHECK_THROWS_AS(parse_double("1.5x"), IoError);
  }

  TEST_CASE("matrix market round trip") {
    const auto id = SparseMatrix::identity(5);
    save_sparse_matrix(id, scratch("id.mtx"));
    CHECK(load_sparse_matrix(scratch("id.mtx")) == id);

    std::mt19937_64 rng(2);
    std::uniform_int_distribution<std::size_t> idx(0, 9999);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Triplet> t;
    for (int k = 0; k < 50000; ++k) t.push_back({idx(rng), idx(rng), u(rng) / 3.0});
    const auto big = SparseMatrix::from_triplets(10000, 10000, t);
    save_sparse_matrix(big, scratch("big.mtx"));
    const auto back = load_sparse_matrix(scratch("big.mtx"));
    CHECK(back.nnz() == big.nnz());
    CHECK(back == big);
  }

  TEST_CASE("transfer matrix directories round trip and validate") {
    const Partition p({{-1.0}, {1.0}, {false}}, {16});
    const auto tm = build_transfer_matrix(builtin_contraction(0.7, 0.4, 3), p, {20, 3});
    const fs::path dir = scratch("tm");
    fs::remove_all(dir);
    RunManifest extra;
    extra.set("config.system.name", "contraction");
    save_transfer_matrix(tm, extra, dir);
    const auto stored = load_transfer_matrix(dir);
    CHECK(stored.matrix.combined == tm.combined);
    CHECK(stored.matrix.per_atom == tm.per_atom);
    CHECK(stored.matrix.atom_probs == tm.atom_probs);
    CHECK(stored.matrix.seed == 3);
    CHECK(stored.manifest.get("config.system.name") == "contraction");
    CHECK(stored.manifest.get("tool.version").has_value());

    // Tamper with one entry so that row 4 sums to 1.5.
    std::string text = slurp(dir / std::string(kCombinedMatrixFile));
    std::istringstream lines(text);
    std::string line, rewritten;
    bool done = false;
    while (std::getline(lines, line)) {
      if (!done && line.rfind("4 ", 0) == 0) {
        std::istringstream f(line);
        std::size_t i, j;
        double v;
        f >> i >> j >> v;
        line = std::to_string(i) + " " + std::to_string(j) + " " + format_double(v + 0.5);
        done = true;
      }
      rewritten += line + "\n";
    }
    REQUIRE(done);
    std::ofstream(dir / std::string(kCombinedMatrixFile)) << rewritten;
    try {
      (void)load_transfer_matrix(dir);
      FAIL("tampered matrix was accepted");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("row 4") != std::string::npos);
    }
  }

  TEST_CASE("malformed matrix files are rejected") {
    std::ofstream(scratch("bad1.mtx")) << "not a matrix\n";
    CHECK_THROWS_AS(load_sparse_matrix(scratch("bad1.mtx")), IoError);
    std::ofstream(scratch("bad2.mtx")) << "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 0.5\n";
    CHECK_THROWS_AS(load_sparse_matrix(scratch("bad2.mtx")), IoError);
    std::ofstream(scratch("bad3.mtx")) << "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 0.5\n";
    CHECK_THROWS_AS(load_sparse_matrix(scratch("bad3.mtx")), IoError);
    CHECK_THROWS_AS(load_sparse_matrix(scratch("missing.mtx")), IoError);
  }

  TEST_CASE("manifest text round trip") {
    RunManifest m;
    m.set("a", "1");
    m.set("b.c", "x = y");
    m.set("a", "2");
    CHECK(m.entries().size() == 2);
    const auto back = RunManifest::parse(m.to_text());
    CHECK(back == m);
    CHECK(back.get("b.c") == "x = y");
    CHECK(m.with_prefix("b.").size() == 1);
  }

  TEST_CASE("measure CSV export") {
    const Partition p({{0.0, 0.0}, {1.0, 1.0}, {false, false}}, {2, 2});
    const std::vector<double> uniform{0.25, 0.25, 0.25, 0.25};
    export_measure_csv(uniform, p, CellSet{0, 1, 2, 3}, scratch("u.csv"), false, Normalization::Probability);
    const auto csv = load_measure_csv(scratch("u.csv"));
    CHECK(csv.cells.size() == 4);
    for (double v : csv.values) CHECK(v == 0.25);
    CHECK(slurp(scratch("u.csv")).find("normalization=probability") != std::string::npos);

    const std::vector<double> partial{1e-3, 0.0, 2.0};
    export_measure_csv(partial, p, CellSet{1, 2, 3}, scratch("l.csv"), true);
    const auto logged = load_measure_csv(scratch("l.csv"));
    CHECK(logged.log_scale);
    CHECK(logged.cells == std::vector<CellIndex>{1, 2, 3});
    CHECK(logged.values[0] == doctest::Approx(-3.0));
    CHECK(std::isinf(logged.values[1]));
    CHECK(slurp(scratch("l.csv")).find(",-inf") != std::string::npos);

    const std::vector<double> exact{0.1, 1.0 / 3.0};
    export_measure_csv(exact, p, CellSet{0, 3}, scratch("e.csv"));
    CHECK(load_measure_csv(scratch("e.csv")).values == exact);
  }

  TEST_CASE("heatmaps") {
    const Partition p({{0.0, 0.0}, {1.0, 1.0}, {false, false}}, {3, 2});
    const CellSet all{0, 1, 2, 3, 4, 5};
    const auto flat = make_heatmap(std::vector<double>(6, 0.7), p, all, false);
    CHECK(flat.width == 3);
    CHECK(flat.height == 2);
    for (auto px : flat.pixels) CHECK(px == 128);

    const auto point = make_heatmap(std::vector<double>{0, 0, 0, 0, 0, 5.0}, p, all, false);
    // cell 5 = column 2 of the top grid row, which is pixel row 0.
    CHECK(point.at(0, 2) == 255);
    int bright = 0;
    for (auto px : point.pixels) bright += px != 0;
    CHECK(bright == 1);

    const auto log = make_heatmap(std::vector<double>{1.0, 1e-3, 0.0, 0, 0, 0}, p, all, true);
    CHECK(log.at(1, 0) == 255);
    CHECK(log.at(1, 1) == static_cast<std::uint8_t>(std::lround(255.0 * 9.0 / 12.0)));
    CHECK(log.at(1, 2) == 0);

    write_pgm(point, scratch("h.pgm"));
    const auto back = read_pgm(scratch("h.pgm"));
    CHECK(back.pixels == point.pixels);
    CHECK(back.width == 3);
    CHECK(slurp(scratch("h.pgm")).rfind("P5", 0) == 0);

    const Partition cube({{0, 0, 0}, {1, 1, 1}, {false, false, false}}, {2, 2, 2});
    CHECK_THROWS_AS(make_heatmap(std::vector<double>(8, 1.0), cube, CellSet{0, 1, 2, 3, 4, 5, 6, 7}, false),
                    UnsupportedDimension);
  }

  TEST_CASE("report documents use round-trip numbers") {
    StabilityReport r;
    r.transient = true;
    r.rho_estimate = 0.1 + 0.2;
    r.x0 = CellSet{3};
    r.obstructions = {CellSet{1, 2}};
    const auto doc = report_document(r);
    CHECK(parse_double(*doc.get("rho_estimate")) == r.rho_estimate);
    CHECK(doc.get("certified") == "false");
    CHECK(doc.get("obstructions.0") == "1,2");
    CHECK(format_report_text(r).find("not certified") != std::string::npos);
  }

  TEST_CASE("verdict CSV") {
    McResult r;
    r.verdicts = {{{0.5, -0.25}, 0.8, false}, {{0.1, 0.2}, 0.2, true}};
    export_verdicts_csv(r, scratch("v.csv"));
    const auto text = slurp(scratch("v.csv"));
    CHECK(text.rfind("x1,x2,converged_fraction\n", 0) == 0);
    CHECK(text.find("0.5,-0.25,0.8") != std::string::npos);
  }

  TEST_CASE("unwritable paths surface the path") {
    try {
      save_sparse_matrix(SparseMatrix::identity(2), "/proc/definitely/not/here.mtx");
      FAIL("write should have failed");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("/proc/definitely/not/here.mtx") != std::string::npos);
    }
  }
}
