#include "stochlyap/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "stochlyap/errors.hpp"
#include "stochlyap/version.hpp"

namespace stochlyap {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::size_t parse_size(std::string_view text, const std::string& context) {
  std::size_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw IoError(context + ": expected an integer, got '" + std::string(text) + "'");
  return value;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string join_doubles(std::span<const double> values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ",";
    s += format_double(values[i]);
  }
  return s;
}

std::string join_cells(const CellSet& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(cells[i]);
  }
  return s;
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
  text = trim(text);
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw IoError("expected a number, got '" + std::string(text) + "'");
  }
  return value;
}

void save_sparse_matrix(const SparseMatrix& matrix, const fs::path& path, std::span<const std::string> comments) {
  auto out = open_output(path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  for (const auto& c : comments) out << "% " << c << "\n";
  out << matrix.rows() << " " << matrix.cols() << " " << matrix.nnz() << "\n";
  std::string line;
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    const auto cols = matrix.row_cols(i);
    const auto vals = matrix.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      line.clear();
      line += std::to_string(i + 1);
      line += ' ';
      line += std::to_string(cols[k] + 1);
      line += ' ';
      line += format_double(vals[k]);
      line += '\n';
      out << line;
    }
  }
  finish(out, path);
}

SparseMatrix load_sparse_matrix(const fs::path& path) {
  auto in = open_input(path);
  const std::string where = "'" + path.string() + "'";
  std::string line;
  if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0) {
    throw IoError(where + ": missing %%MatrixMarket banner");
  }
  {
    std::istringstream banner(line);
    std::string tag, object, format, field, symmetry;
    banner >> tag >> object >> format >> field >> symmetry;
    if (object != "matrix" || format != "coordinate" || field != "real" || symmetry != "general") {
      throw IoError(where + ": only 'matrix coordinate real general' is supported");
    }
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty() && line[0] != '%') break;
  }
  std::size_t rows = 0, cols = 0, nnz = 0;
  {
    std::istringstream header(line);
    if (!(header >> rows >> cols >> nnz)) throw IoError(where + ": malformed size line " + std::to_string(line_no));
  }
  std::vector<Triplet> triplets;
  triplets.reserve(nnz);
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t[0] == '%') continue;
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (pos < t.size()) {
      const auto start = t.find_first_not_of(" \t", pos);
      if (start == std::string_view::npos) break;
      const auto stop = t.find_first_of(" \t", start);
      fields.push_back(t.substr(start, stop == std::string_view::npos ? std::string_view::npos : stop - start));
      pos = stop == std::string_view::npos ? t.size() : stop;
    }
    const std::string ctx = where + " line " + std::to_string(line_no);
    if (fields.size() != 3) throw IoError(ctx + ": expected 'row col value'");
    const std::size_t i = parse_size(fields[0], ctx);
    const std::size_t j = parse_size(fields[1], ctx);
    if (i == 0 || j == 0 || i > rows || j > cols) throw IoError(ctx + ": index out of range");
    double v = 0.0;
    try {
      v = parse_double(fields[2]);
    } catch (const IoError& e) {
      throw IoError(ctx + ": " + e.what());
    }
    triplets.push_back({i - 1, j - 1, v});
  }
  if (triplets.size() != nnz) {
    throw IoError(where + ": header declares " + std::to_string(nnz) + " entries, found " +
                  std::to_string(triplets.size()));
  }
  return SparseMatrix::from_triplets(rows, cols, std::move(triplets));
}

void RunManifest::set(std::string key, std::string value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(std::move(key), std::move(value));
}

std::optional<std::string> RunManifest::get(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

std::vector<std::pair<std::string, std::string>> RunManifest::with_prefix(std::string_view prefix) const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [k, v] : entries_) {
    if (k.size() > prefix.size() && k.compare(0, prefix.size(), prefix) == 0) out.emplace_back(k.substr(prefix.size()), v);
  }
  return out;
}

std::string RunManifest::to_text() const {
  std::string text;
  for (const auto& [k, v] : entries_) text += k + " = " + v + "\n";
  return text;
}

RunManifest RunManifest::parse(std::string_view text) {
  RunManifest manifest;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw IoError("manifest line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    manifest.set(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
  }
  return manifest;
}

void save_manifest(const RunManifest& manifest, const fs::path& path) {
  auto out = open_output(path);
  out << manifest.to_text();
  finish(out, path);
}

RunManifest load_manifest(const fs::path& path) {
  auto in = open_input(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return RunManifest::parse(buffer.str());
  } catch (const IoError& e) {
    throw IoError("'" + path.string() + "': " + e.what());
  }
}

std::string atom_matrix_file(std::size_t atom) { return "P_atom_" + std::to_string(atom) + ".mtx"; }

void save_transfer_matrix(const TransferMatrix& tm, RunManifest manifest, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
  manifest.set("tool.version", std::string(kVersion));
  manifest.set("matrix.cells", std::to_string(tm.cell_count));
  manifest.set("matrix.atoms", std::to_string(tm.per_atom.size()));
  manifest.set("matrix.atom_probs", join_doubles(tm.atom_probs));
  manifest.set("matrix.samples_per_cell", std::to_string(tm.samples_per_cell));
  manifest.set("matrix.seed", std::to_string(tm.seed));
  manifest.set("matrix.sink_policy", std::string(to_string(tm.sink_policy)));
  const std::vector<std::string> comment{"stochlyap transfer matrix; column " + std::to_string(tm.cell_count + 1) +
                                         " is the escape sink"};
  save_sparse_matrix(tm.combined, dir / kCombinedMatrixFile, comment);
  for (std::size_t l = 0; l < tm.per_atom.size(); ++l) save_sparse_matrix(tm.per_atom[l], dir / atom_matrix_file(l), comment);
  save_manifest(manifest, dir / kManifestFile);
}

StoredMatrix load_transfer_matrix(const fs::path& dir, double row_sum_tolerance) {
  StoredMatrix stored;
  stored.manifest = load_manifest(dir / kManifestFile);
  const auto require = [&](std::string_view key) {
    auto v = stored.manifest.get(key);
    if (!v) throw IoError("'" + (dir / kManifestFile).string() + "': missing key " + std::string(key));
    return *v;
  };
  TransferMatrix& tm = stored.matrix;
  tm.cell_count = parse_size(require("matrix.cells"), "matrix.cells");
  const std::size_t atoms = parse_size(require("matrix.atoms"), "matrix.atoms");
  tm.samples_per_cell = parse_size(require("matrix.samples_per_cell"), "matrix.samples_per_cell");
  tm.seed = std::stoull(require("matrix.seed"));
  tm.sink_policy = parse_sink_policy(require("matrix.sink_policy"));
  const std::string probs = require("matrix.atom_probs");
  for (auto p : split(probs, ',')) tm.atom_probs.push_back(parse_double(p));
  if (tm.atom_probs.size() != atoms) throw IoError("manifest: matrix.atom_probs does not match matrix.atoms");

  const auto check = [&](const SparseMatrix& m, const fs::path& file) {
    if (m.rows() != tm.cell_count || m.cols() != tm.cell_count + 1) {
      throw IoError("'" + file.string() + "': expected " + std::to_string(tm.cell_count) + " x " +
                    std::to_string(tm.cell_count + 1));
    }
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const double s = m.row_sum(i);
      bool bad = !(std::abs(s - 1.0) <= row_sum_tolerance);
      for (double v : m.row_values(i)) bad = bad || v < 0.0 || v > 1.0;
      if (bad) {
        throw IoError("'" + file.string() + "': row " + std::to_string(i + 1) + " sums to " + format_double(s) +
                      " (entries must lie in [0,1] and rows sum to 1)");
      }
    }
  };
  tm.combined = load_sparse_matrix(dir / kCombinedMatrixFile);
  check(tm.combined, dir / kCombinedMatrixFile);
  for (std::size_t l = 0; l < atoms; ++l) {
    tm.per_atom.push_back(load_sparse_matrix(dir / atom_matrix_file(l)));
    check(tm.per_atom.back(), dir / atom_matrix_file(l));
  }
  return stored;
}

void export_measure_csv(std::span<const double> values, const Partition& partition, const CellSet& cells,
                        const fs::path& path, bool log_scale, Normalization normalization) {
  if (values.size() < cells.size()) throw InvalidArgument("export_measure_csv: fewer values than cells");
  auto out = open_output(path);
  out << "# normalization=" << (normalization == Normalization::Probability ? "probability" : "raw")
      << " scale=" << (log_scale ? "log10" : "linear") << "\n";
  out << "cell";
  for (std::size_t a = 0; a < partition.dim(); ++a) out << ",x" << (a + 1);
  out << ",value\n";
  for (std::size_t k = 0; k < cells.size(); ++k) {
    out << cells[k];
    for (double c : partition.cell_center(cells[k])) out << "," << format_double(c);
    const double v = values[k];
    out << "," << (log_scale ? (v > 0.0 ? format_double(std::log10(v)) : std::string("-inf")) : format_double(v)) << "\n";
  }
  finish(out, path);
}

MeasureCsv load_measure_csv(const fs::path& path) {
  auto in = open_input(path);
  MeasureCsv csv;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      csv.log_scale = csv.log_scale || t.find("scale=log10") != std::string_view::npos;
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    const auto fields = split(t, ',');
    const std::string ctx = "'" + path.string() + "' line " + std::to_string(line_no);
    if (fields.size() < 2) throw IoError(ctx + ": too few columns");
    csv.cells.push_back(parse_size(fields.front(), ctx));
    try {
      csv.values.push_back(parse_double(fields.back()));
    } catch (const IoError& e) {
      throw IoError(ctx + ": " + e.what());
    }
  }
  return csv;
}

Heatmap make_heatmap(std::span<const double> values, const Partition& partition, const CellSet& cells,
                     bool log_scale) {
  if (partition.dim() != 2) {
    throw UnsupportedDimension("heatmap: partition has dimension " + std::to_string(partition.dim()) +
                               ", only 2 is supported");
  }
  if (values.size() < cells.size()) throw InvalidArgument("heatmap: fewer values than cells");
  Vector field(partition.cell_count(), 0.0);
  for (std::size_t k = 0; k < cells.size(); ++k) field[cells[k]] = values[k];
  if (log_scale) {
    const double top = *std::max_element(field.begin(), field.end());
    if (top > 0.0) {
      const double floor = top * 1e-12;
      for (double& v : field) v = std::log10(std::max(v, floor));
    }
  }
  const auto [lo_it, hi_it] = std::minmax_element(field.begin(), field.end());
  const double lo = *lo_it, hi = *hi_it;
  Heatmap map;
  map.width = partition.counts()[0];
  map.height = partition.counts()[1];
  map.pixels.assign(map.width * map.height, 128);
  for (std::size_t row = 0; row < map.height; ++row) {
    for (std::size_t col = 0; col < map.width; ++col) {
      const std::size_t multi[2] = {col, map.height - 1 - row};
      const double v = field[partition.flat_index(multi)];
      if (hi > lo) {
        map.pixels[row * map.width + col] = static_cast<std::uint8_t>(std::lround(255.0 * (v - lo) / (hi - lo)));
      }
    }
  }
  return map;
}

void write_pgm(const Heatmap& heatmap, const fs::path& path) {
  auto out = open_output(path);
  out << "P5\n" << heatmap.width << " " << heatmap.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(heatmap.pixels.data()), static_cast<std::streamsize>(heatmap.pixels.size()));
  finish(out, path);
}

Heatmap read_pgm(const fs::path& path) {
  auto in = open_input(path);
  std::string magic;
  Heatmap map;
  int maxval = 0;
  in >> magic >> map.width >> map.height >> maxval;
  if (magic != "P5" || maxval != 255 || !in) throw IoError("'" + path.string() + "': not an 8-bit P5 image");
  in.get();
  map.pixels.resize(map.width * map.height);
  in.read(reinterpret_cast<char*>(map.pixels.data()), static_cast<std::streamsize>(map.pixels.size()));
  if (!in) throw IoError("'" + path.string() + "': truncated image data");
  return map;
}

void export_heatmap(std::span<const double> values, const Partition& partition, const CellSet& cells,
                    const fs::path& path, bool log_scale) {
  write_pgm(make_heatmap(values, partition, cells, log_scale), path);
}

std::string format_report_text(const StabilityReport& report) {
  std::ostringstream out;
  out << "stability report\n";
  out << "  attractor cells (X0):    " << report.x0.size() << "\n";
  out << "  complement cells (X1):   " << report.x1.size() << "\n";
  out << "  escaped mass:            " << format_double(report.escaped_mass) << "\n";
  out << "  transient P1:            " << (report.transient ? "yes" : "no") << "\n";
  out << "  spectral radius (est.):  " << format_double(report.rho_estimate)
      << (report.rho_converged ? "" : " (not converged)") << "\n";
  out << "  decay fit:               K = " << format_double(report.decay_fit.K)
      << ", beta = " << format_double(report.decay_fit.beta) << "\n";
  if (report.certificate) {
    const auto& c = *report.certificate;
    out << "  Lyapunov measure:        valid (gamma = " << format_double(c.gamma)
        << ", residual = " << format_double(c.residual) << ", terms = " << c.terms << ")\n";
  } else {
    out << "  Lyapunov measure:        none (" << report.certificate_failure << ")\n";
  }
  if (report.sink_obstruction) out << "  obstruction:             escape sink is absorbing\n";
  for (std::size_t k = 0; k < report.obstructions.size(); ++k) {
    const auto& o = report.obstructions[k];
    out << "  obstruction " << k << ":           " << o.size() << " cells {";
    for (std::size_t i = 0; i < std::min<std::size_t>(o.size(), 16); ++i) out << (i ? "," : "") << o[i];
    if (o.size() > 16) out << ",...";
    out << "}\n";
  }
  out << "  verdict:                 " << (report.certificate ? "certified" : "not certified") << "\n";
  return out.str();
}

RunManifest report_document(const StabilityReport& report) {
  RunManifest doc;
  doc.set("certified", report.certificate ? "true" : "false");
  doc.set("transient", report.transient ? "true" : "false");
  doc.set("x0.cells", join_cells(report.x0));
  doc.set("x1.count", std::to_string(report.x1.size()));
  doc.set("escaped_mass", format_double(report.escaped_mass));
  doc.set("rho_estimate", format_double(report.rho_estimate));
  doc.set("rho_converged", report.rho_converged ? "true" : "false");
  doc.set("decay.K", format_double(report.decay_fit.K));
  doc.set("decay.beta", format_double(report.decay_fit.beta));
  if (report.certificate) {
    const auto& c = *report.certificate;
    doc.set("certificate.gamma", format_double(c.gamma));
    doc.set("certificate.alpha", format_double(c.alpha));
    doc.set("certificate.residual", format_double(c.residual));
    doc.set("certificate.terms", std::to_string(c.terms));
    doc.set("certificate.mass", format_double(c.mu_bar.total()));
  } else {
    doc.set("certificate.failure", report.certificate_failure);
  }
  doc.set("obstructions.count", std::to_string(report.obstructions.size()));
  doc.set("obstructions.sink", report.sink_obstruction ? "true" : "false");
  for (std::size_t k = 0; k < report.obstructions.size(); ++k) {
    doc.set("obstructions." + std::to_string(k), join_cells(report.obstructions[k]));
  }
  return doc;
}

void export_verdicts_csv(const McResult& result, const fs::path& path) {
  auto out = open_output(path);
  const std::size_t d = result.verdicts.empty() ? 0 : result.verdicts.front().x.size();
  for (std::size_t a = 0; a < d; ++a) out << "x" << (a + 1) << ",";
  out << "converged_fraction\n";
  for (const auto& v : result.verdicts) {
    for (double x : v.x) out << format_double(x) << ",";
    out << format_double(v.converged_fraction) << "\n";
  }
  finish(out, path);
}

}  // namespace stochlyap
