#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stochlyap/errors.hpp"
#include "stochlyap/io.hpp"
#include "stochlyap/partition.hpp"
#include "stochlyap/simulate.hpp"
#include "stochlyap/stability.hpp"
#include "stochlyap/system.hpp"
#include "stochlyap/transfer.hpp"

namespace stochlyap::cli {

/// A configuration value that failed validation; field() is the dotted key.
class ConfigError : public InvalidArgument {
 public:
  ConfigError(std::string field, const std::string& message)
      : InvalidArgument(field + ": " + message), field_(std::move(field)) {}

  [[nodiscard]] const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Parses flat key = value text. "[section]" headers prefix the keys that
/// follow with "section."; "#" starts a comment.
RunManifest parse_config_text(std::string_view text);

/// Reads a config file. A saved run manifest is accepted too: its config.*
/// entries are used.
RunManifest load_config_entries(const std::filesystem::path& path);

inline constexpr std::string_view kManifestConfigPrefix = "config.";

struct RunConfig {
  std::string system_name = "pendulum";
  double contraction_rate = 0.5;
  std::size_t identity_dim = 2;
  std::vector<std::string> equations;  ///< system.f1.. for ode and map systems
  Vector equilibrium;

  double noise_alpha = 0.5;
  std::size_t noise_q = 5;
  double dt = 0.1;
  IntegrationMethod method = IntegrationMethod::RK4;

  Domain domain;
  std::vector<std::size_t> counts;

  BuildOptions build;

  double attractor_epsilon = 0.0;
  Vector attractor_point;
  std::vector<CellIndex> attractor_cells;

  AnalysisOptions analysis;

  double invariant_tol = 1e-12;
  std::size_t invariant_max_iterations = 200000;
  double support_threshold = 1e-6;
  bool invariant_attractor_closed = true;

  McConfig simulate;

  std::filesystem::path output_dir = "stochlyap-out";
  bool log_scale = false;
  bool heatmap = true;

  /// The validated entries, as recorded into run manifests.
  RunManifest entries;

  /// Throws ConfigError naming the first offending key.
  static RunConfig from_entries(const RunManifest& entries);

  [[nodiscard]] StochasticMap make_map() const;
  [[nodiscard]] Partition make_partition() const;
  [[nodiscard]] CellSet make_attractor(const Partition& partition) const;
};

/// Documentation of every key with its default, for --help.
std::string config_reference();

}  // namespace stochlyap::cli
