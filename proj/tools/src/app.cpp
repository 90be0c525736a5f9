#include "stochlyap/cli/app.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "stochlyap/cli/config.hpp"
#include "stochlyap/io.hpp"
#include "stochlyap/version.hpp"

namespace stochlyap::cli {

namespace {

namespace fs = std::filesystem;

struct GlobalOptions {
  std::string config;
  std::string matrix;
  std::string input;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string method;
  std::optional<double> alpha_weight;
  bool log_scale = false;
  std::vector<std::string> sets;
};

struct Session {
  RunConfig config;
  std::optional<StoredMatrix> stored;
};

RunManifest merged_entries(const GlobalOptions& g, std::optional<StoredMatrix>& stored) {
  RunManifest entries;
  if (!g.matrix.empty()) {
    stored = load_transfer_matrix(g.matrix);
    for (const auto& [k, v] : stored->manifest.with_prefix(kManifestConfigPrefix)) entries.set(k, v);
  }
  if (!g.config.empty()) {
    RunManifest file;
    try {
      file = load_config_entries(g.config);
    } catch (const IoError& e) {
      throw ConfigError("--config", e.what());
    }
    for (const auto& [k, v] : file.entries()) entries.set(k, v);
  }
  for (const auto& assignment : g.sets) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set", "expected key=value, got '" + assignment + "'");
    const auto parsed = parse_config_text(assignment);
    for (const auto& [k, v] : parsed.entries()) entries.set(k, v);
  }
  if (g.seed) {
    entries.set("build.seed", std::to_string(*g.seed));
    entries.set("simulate.seed", std::to_string(*g.seed));
  }
  if (!g.method.empty()) entries.set("analysis.method", g.method);
  if (g.alpha_weight) entries.set("analysis.alpha_weight", format_double(*g.alpha_weight));
  if (g.log_scale) entries.set("output.log_scale", "true");
  if (!g.out.empty()) entries.set("output.dir", g.out);
  return entries;
}

Session open_session(const GlobalOptions& g) {
  Session s;
  RunManifest entries = merged_entries(g, s.stored);
  s.config = RunConfig::from_entries(entries);
  s.config.build.threads = g.threads;
  s.config.simulate.threads = g.threads;
  return s;
}

RunManifest run_manifest(const RunConfig& cfg, const StochasticMap& map, const Partition& partition) {
  RunManifest manifest;
  manifest.set("system.description", map.name());
  manifest.set("partition.cells", std::to_string(partition.cell_count()));
  std::string atoms;
  for (std::size_t l = 0; l < map.atom_count(); ++l) {
    if (l) atoms += ";";
    for (std::size_t a = 0; a < map.noise().values[l].size(); ++a) {
      if (a) atoms += ",";
      atoms += format_double(map.noise().values[l][a]);
    }
  }
  manifest.set("noise.atoms", atoms);
  for (const auto& [k, v] : cfg.entries.entries()) manifest.set(std::string(kManifestConfigPrefix) + k, v);
  return manifest;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

TransferMatrix obtain_matrix(Session& s, const Partition& partition, std::ostream& out) {
  if (s.stored) {
    if (s.stored->matrix.cell_count != partition.cell_count()) {
      throw ConfigError("grid.counts", "stored matrix has " + std::to_string(s.stored->matrix.cell_count) +
                                           " cells but the partition has " + std::to_string(partition.cell_count()));
    }
    return s.stored->matrix;
  }
  const StochasticMap map = s.config.make_map();
  const auto start = std::chrono::steady_clock::now();
  TransferMatrix tm = build_transfer_matrix(map, partition, s.config.build);
  out << "built " << tm.cell_count << "-cell transfer matrix in " << seconds_since(start) << " s\n";
  return tm;
}

void write_measure(const RunConfig& cfg, const Partition& partition, const CellSet& cells,
                   std::span<const double> values, const std::string& stem, Normalization normalization,
                   std::ostream& out) {
  const fs::path csv = cfg.output_dir / (stem + ".csv");
  export_measure_csv(values.first(cells.size()), partition, cells, csv, cfg.log_scale, normalization);
  out << "wrote " << csv.string() << "\n";
  if (cfg.heatmap && partition.dim() == 2) {
    const fs::path pgm = cfg.output_dir / (stem + ".pgm");
    export_heatmap(values.first(cells.size()), partition, cells, pgm, cfg.log_scale);
    out << "wrote " << pgm.string() << "\n";
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream file(path);
  file << text;
  if (!file) throw IoError("failed writing '" + path.string() + "'");
}

int cmd_build(const GlobalOptions& g, std::ostream& out) {
  Session s = open_session(g);
  const RunConfig& cfg = s.config;
  const StochasticMap map = cfg.make_map();
  const Partition partition = cfg.make_partition();
  const auto start = std::chrono::steady_clock::now();
  const TransferMatrix tm = build_transfer_matrix(map, partition, cfg.build);
  const double elapsed = seconds_since(start);
  save_transfer_matrix(tm, run_manifest(cfg, map, partition), cfg.output_dir);
  out << "cells:              " << tm.cell_count << "\n";
  out << "noise atoms:        " << tm.per_atom.size() << "\n";
  out << "nonzeros:           " << tm.combined.nnz() << "\n";
  out << "max row-sum error:  " << format_double(tm.max_row_sum_error()) << "\n";
  out << "escaped mass:       " << format_double(tm.escaped_mass()) << "\n";
  out << "build time (s):     " << elapsed << "\n";
  out << "wrote " << (cfg.output_dir / kCombinedMatrixFile).string() << "\n";
  return kExitOk;
}

int cmd_analyze(const GlobalOptions& g, std::ostream& out) {
  Session s = open_session(g);
  const RunConfig& cfg = s.config;
  const Partition partition = cfg.make_partition();
  const CellSet x0 = cfg.make_attractor(partition);
  const TransferMatrix tm = obtain_matrix(s, partition, out);
  const StabilityReport report = analyze(tm, partition, x0, cfg.analysis);
  const std::string text = format_report_text(report);
  out << text;
  write_text(cfg.output_dir / "report.txt", text);
  save_manifest(report_document(report), cfg.output_dir / "report.kv");
  if (report.certificate) {
    write_measure(cfg, partition, report.x1, report.certificate->mu_bar.values, "lyapunov_measure",
                  Normalization::Raw, out);
  }
  return report.certificate ? kExitOk : kExitNotCertified;
}

int cmd_invariant(const GlobalOptions& g, std::ostream& out) {
  Session s = open_session(g);
  const RunConfig& cfg = s.config;
  const Partition partition = cfg.make_partition();
  const CellSet x0 = cfg.make_attractor(partition);
  const TransferMatrix tm = obtain_matrix(s, partition, out);
  const SparseMatrix p = cfg.invariant_attractor_closed ? attractor_closed_matrix(tm, x0) : tm.combined;
  const InvariantMeasureResult result = invariant_measure(p, cfg.invariant_tol, cfg.invariant_max_iterations);
  const Vector& mu = result.measure.values;
  double attractor_mass = 0.0;
  for (CellIndex c : x0) attractor_mass += mu[c];
  std::size_t support = 0;
  for (double v : mu) support += v > cfg.support_threshold ? 1 : 0;
  out << "invariant measure: " << (result.converged ? "converged" : "NOT converged") << " after "
      << result.iterations << " iterations (residual " << format_double(result.residual) << ")\n";
  out << "attractor-cell mass: " << format_double(attractor_mass) << "\n";
  out << "support cells (> " << format_double(cfg.support_threshold) << "): " << support << "\n";
  RunManifest doc;
  doc.set("converged", result.converged ? "true" : "false");
  doc.set("iterations", std::to_string(result.iterations));
  doc.set("residual", format_double(result.residual));
  doc.set("attractor_mass", format_double(attractor_mass));
  doc.set("support_cells", std::to_string(support));
  save_manifest(doc, cfg.output_dir / "invariant.kv");
  std::vector<CellIndex> all(partition.cell_count());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  write_measure(cfg, partition, CellSet(std::move(all)), mu, "invariant_measure", Normalization::Probability, out);
  return result.converged ? kExitOk : kExitRuntimeError;
}

int cmd_simulate(const GlobalOptions& g, std::ostream& out) {
  Session s = open_session(g);
  const RunConfig& cfg = s.config;
  const StochasticMap map = cfg.make_map();
  const auto start = std::chrono::steady_clock::now();
  const McResult result = estimate_unstable_fraction(map, cfg.domain, cfg.simulate);
  out << "unstable fraction: " << format_double(result.unstable_fraction) << " +/- "
      << format_double(result.half_width) << " (" << result.unstable_count << " of " << cfg.simulate.n_init
      << " initial conditions)\n";
  out << "escaped paths: " << result.escaped_paths << ", non-finite paths: " << result.non_finite_paths << "\n";
  out << "simulation time (s): " << seconds_since(start) << "\n";
  RunManifest doc;
  doc.set("unstable_fraction", format_double(result.unstable_fraction));
  doc.set("half_width", format_double(result.half_width));
  doc.set("unstable_count", std::to_string(result.unstable_count));
  doc.set("escaped_paths", std::to_string(result.escaped_paths));
  doc.set("non_finite_paths", std::to_string(result.non_finite_paths));
  save_manifest(doc, cfg.output_dir / "simulate.kv");
  if (cfg.simulate.record_verdicts) {
    export_verdicts_csv(result, cfg.output_dir / "verdicts.csv");
    out << "wrote " << (cfg.output_dir / "verdicts.csv").string() << "\n";
  }
  return kExitOk;
}

int cmd_export(const GlobalOptions& g, std::ostream& out) {
  if (g.input.empty()) throw ConfigError("--input", "export needs a measure CSV");
  Session s = open_session(g);
  const RunConfig& cfg = s.config;
  const Partition partition = cfg.make_partition();
  MeasureCsv csv = load_measure_csv(g.input);
  for (CellIndex c : csv.cells) {
    if (c >= partition.cell_count()) throw IoError("'" + g.input + "': cell " + std::to_string(c) + " is out of range");
  }
  if (csv.log_scale) {
    for (double& v : csv.values) v = std::isinf(v) && v < 0 ? 0.0 : std::pow(10.0, v);
  }
  std::vector<std::pair<CellIndex, double>> rows;
  for (std::size_t k = 0; k < csv.cells.size(); ++k) rows.emplace_back(csv.cells[k], csv.values[k]);
  std::sort(rows.begin(), rows.end());
  std::vector<CellIndex> cells;
  Vector values;
  for (const auto& [c, v] : rows) {
    if (!cells.empty() && cells.back() == c) throw IoError("'" + g.input + "': duplicate cell " + std::to_string(c));
    cells.push_back(c);
    values.push_back(v);
  }
  const std::string stem = fs::path(g.input).stem().string();
  const fs::path pgm = cfg.output_dir / (stem + (cfg.log_scale ? "_log" : "") + ".pgm");
  export_heatmap(values, partition, CellSet(std::move(cells)), pgm, cfg.log_scale);
  out << "wrote " << pgm.string() << "\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stability certificates for stochastic maps via Ulam transfer operators and Lyapunov measures",
               "stochlyap"};
  app.set_version_flag("--version", std::string(kVersion));
  app.footer(config_reference() +
             "\nExit codes: 0 success / certified, 3 not certified, 2 configuration error, 1 runtime error.");
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--config", g.config, "Config file (key = value) or a saved manifest.txt");
  app.add_option("--out", g.out, "Output directory (output.dir)");
  app.add_option("--seed", g.seed, "Seed for sampling and simulation (build.seed, simulate.seed)");
  app.add_option("--threads", g.threads, "Worker threads, 0 = hardware concurrency")->capture_default_str();
  app.add_option("--method", g.method, "Lyapunov measure method (analysis.method)")
      ->check(CLI::IsMember({"series", "solve"}));
  app.add_option("--alpha-weight", g.alpha_weight, "Series weight alpha >= 1 (analysis.alpha_weight)");
  app.add_flag("--log-scale", g.log_scale, "Write log10 values in CSV and heatmaps (output.log_scale)");
  app.add_option("--matrix", g.matrix, "Directory of a saved transfer matrix; its manifest supplies the config");
  app.add_option("--set", g.sets, "Override a config key, e.g. --set noise.alpha=0.75");

  int code = kExitOk;
  auto* build = app.add_subcommand("build", "Build and save the transfer matrix and manifest");
  build->fallthrough();
  build->callback([&] { code = cmd_build(g, out); });
  auto* analyze_cmd = app.add_subcommand("analyze", "Certify stability with a Lyapunov measure (exit 0 / 3)");
  analyze_cmd->fallthrough();
  analyze_cmd->callback([&] { code = cmd_analyze(g, out); });
  auto* invariant = app.add_subcommand("invariant", "Compute the invariant measure");
  invariant->fallthrough();
  invariant->callback([&] { code = cmd_invariant(g, out); });
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimate of the unstable fraction");
  simulate->fallthrough();
  simulate->callback([&] { code = cmd_simulate(g, out); });
  auto* export_cmd = app.add_subcommand("export", "Render a measure CSV as a PGM heatmap");
  export_cmd->add_option("--input", g.input, "Measure CSV to render")->required();
  export_cmd->fallthrough();
  export_cmd->callback([&] { code = cmd_export(g, out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
  return code;
}

}  // namespace stochlyap::cli
