#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stochlyap/partition.hpp"
#include "stochlyap/simulate.hpp"
#include "stochlyap/sparse.hpp"
#include "stochlyap/stability.hpp"
#include "stochlyap/transfer.hpp"

namespace stochlyap {

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

/// Matrix Market "coordinate real general", 1-based indices.
void save_sparse_matrix(const SparseMatrix& matrix, const std::filesystem::path& path,
                        std::span<const std::string> comments = {});
SparseMatrix load_sparse_matrix(const std::filesystem::path& path);

/// Ordered key = value document. Keys are unique; set() overwrites in place.
class RunManifest {
 public:
  void set(std::string key, std::string value);
  [[nodiscard]] std::optional<std::string> get(std::string_view key) const;
  [[nodiscard]] const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }
  /// Entries whose key starts with prefix, with the prefix stripped.
  [[nodiscard]] std::vector<std::pair<std::string, std::string>> with_prefix(std::string_view prefix) const;

  [[nodiscard]] std::string to_text() const;
  static RunManifest parse(std::string_view text);

  friend bool operator==(const RunManifest&, const RunManifest&) = default;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

void save_manifest(const RunManifest& manifest, const std::filesystem::path& path);
RunManifest load_manifest(const std::filesystem::path& path);

inline constexpr std::string_view kCombinedMatrixFile = "P.mtx";
inline constexpr std::string_view kManifestFile = "manifest.txt";
std::string atom_matrix_file(std::size_t atom);

/// Writes P.mtx, P_atom_<l>.mtx and manifest.txt into dir; the manifest gets
/// the matrix.* and tool.version keys added.
void save_transfer_matrix(const TransferMatrix& tm, RunManifest manifest, const std::filesystem::path& dir);

struct StoredMatrix {
  TransferMatrix matrix;
  RunManifest manifest;
};

/// Loads and validates a saved matrix directory; any row whose sum deviates
/// from 1 by more than row_sum_tolerance is reported by file and row.
StoredMatrix load_transfer_matrix(const std::filesystem::path& dir, double row_sum_tolerance = 1e-9);

/// One row per listed cell: cell index, cell-centre coordinates, value.
/// With log_scale the value column holds log10(v) and zeros are written as -inf.
void export_measure_csv(std::span<const double> values, const Partition& partition, const CellSet& cells,
                        const std::filesystem::path& path, bool log_scale = false,
                        Normalization normalization = Normalization::Raw);

struct MeasureCsv {
  std::vector<CellIndex> cells;
  Vector values;
  bool log_scale = false;
};

MeasureCsv load_measure_csv(const std::filesystem::path& path);

/// 8-bit grayscale image, one pixel per cell. Row 0 holds the largest second
/// coordinate; column 0 the smallest first coordinate.
struct Heatmap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  [[nodiscard]] std::uint8_t at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
};

/// Cells not listed count as zero. Values are min-max scaled to 0..255 (128
/// everywhere for a constant field); log scale floors at max - 12 decades.
Heatmap make_heatmap(std::span<const double> values, const Partition& partition, const CellSet& cells,
                     bool log_scale);
void write_pgm(const Heatmap& heatmap, const std::filesystem::path& path);
Heatmap read_pgm(const std::filesystem::path& path);
void export_heatmap(std::span<const double> values, const Partition& partition, const CellSet& cells,
                    const std::filesystem::path& path, bool log_scale);

std::string format_report_text(const StabilityReport& report);
/// Machine-readable key=value form; every number uses format_double.
RunManifest report_document(const StabilityReport& report);

void export_verdicts_csv(const McResult& result, const std::filesystem::path& path);

}  // namespace stochlyap
