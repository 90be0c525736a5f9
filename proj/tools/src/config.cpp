#include "stochlyap/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>
#include <numbers>
#include <set>
#include <sstream>

#include "stochlyap/cli/expression.hpp"

namespace stochlyap::cli {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(',', start);
    const auto part = trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (!part.empty()) parts.push_back(part);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

bool is_equation_key(std::string_view key) {
  if (key.size() < 9 || key.substr(0, 8) != "system.f") return false;
  return std::all_of(key.begin() + 8, key.end(), [](char c) { return c >= '0' && c <= '9'; });
}

class Reader {
 public:
  explicit Reader(const RunManifest& entries) : entries_(entries) {}

  std::optional<std::string> raw(const std::string& key) {
    used_.insert(key);
    return entries_.get(key);
  }

  std::string text(const std::string& key, std::string fallback) { return raw(key).value_or(std::move(fallback)); }

  double number(const std::string& key, double fallback) {
    const auto v = raw(key);
    return v ? parse_number(key, *v) : fallback;
  }

  std::size_t count(const std::string& key, std::size_t fallback) {
    const auto v = raw(key);
    return v ? parse_count(key, *v) : fallback;
  }

  std::uint64_t seed(const std::string& key, std::uint64_t fallback) {
    const auto v = raw(key);
    if (!v) return fallback;
    std::uint64_t value = 0;
    const auto* end = v->data() + v->size();
    const auto [ptr, ec] = std::from_chars(v->data(), end, value);
    if (ec != std::errc() || ptr != end) throw ConfigError(key, "expected a non-negative integer, got '" + *v + "'");
    return value;
  }

  bool flag(const std::string& key, bool fallback) {
    const auto v = raw(key);
    return v ? parse_flag(key, *v) : fallback;
  }

  std::optional<Vector> numbers(const std::string& key) {
    const auto v = raw(key);
    if (!v) return std::nullopt;
    Vector out;
    for (auto part : split_list(*v)) out.push_back(parse_number(key, part));
    if (out.empty()) throw ConfigError(key, "expected a comma-separated list of numbers");
    return out;
  }

  std::optional<std::vector<std::size_t>> counts(const std::string& key) {
    const auto v = raw(key);
    if (!v) return std::nullopt;
    std::vector<std::size_t> out;
    for (auto part : split_list(*v)) out.push_back(parse_count(key, part));
    if (out.empty()) throw ConfigError(key, "expected a comma-separated list of integers");
    return out;
  }

  std::optional<std::vector<bool>> flags(const std::string& key) {
    const auto v = raw(key);
    if (!v) return std::nullopt;
    std::vector<bool> out;
    for (auto part : split_list(*v)) out.push_back(parse_flag(key, part));
    return out;
  }

  void reject_unknown() const {
    for (const auto& [key, value] : entries_.entries()) {
      if (!used_.contains(key) && !is_equation_key(key)) throw ConfigError(key, "unknown key");
    }
  }

  static double parse_number(const std::string& key, std::string_view text) {
    text = trim(text);
    if (text == "pi") return std::numbers::pi;
    if (text == "-pi") return -std::numbers::pi;
    double value = 0.0;
    try {
      value = parse_double(text);
    } catch (const IoError&) {
      throw ConfigError(key, "expected a number, got '" + std::string(text) + "'");
    }
    if (!std::isfinite(value)) throw ConfigError(key, "must be finite");
    return value;
  }

  static std::size_t parse_count(const std::string& key, std::string_view text) {
    text = trim(text);
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
      throw ConfigError(key, "expected a non-negative integer, got '" + std::string(text) + "'");
    }
    return value;
  }

  static bool parse_flag(const std::string& key, std::string_view text) {
    text = trim(text);
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw ConfigError(key, "expected true or false, got '" + std::string(text) + "'");
  }

 private:
  const RunManifest& entries_;
  std::set<std::string> used_;
};

struct BuiltinDefaults {
  Domain domain;
  std::vector<std::size_t> counts;
  Vector equilibrium;
  double attractor_epsilon = 0.0;
};

BuiltinDefaults builtin_defaults(const std::string& name, std::size_t identity_dim) {
  constexpr double pi = std::numbers::pi;
  if (name == "pendulum") return {{{-pi, -pi}, {pi, pi}, {true, true}}, {50, 50}, {0.0, 0.0}};
  if (name == "rantzer") return {{{-4.0, -4.0}, {4.0, 4.0}, {true, false}}, {50, 50}, {0.0, 0.0}};
  if (name == "contraction") return {{{-1.0}, {1.0}, {false}}, {256}, {0.0}, 1e-9};
  if (name == "identity") {
    return {{Vector(identity_dim, 0.0), Vector(identity_dim, 1.0), std::vector<bool>(identity_dim, false)},
            std::vector<std::size_t>(identity_dim, 16),
            Vector(identity_dim, 0.5)};
  }
  return {};
}

void require(bool ok, const std::string& key, const std::string& message) {
  if (!ok) throw ConfigError(key, message);
}

}  // namespace

RunManifest parse_config_text(std::string_view text) {
  RunManifest entries;
  std::string section;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto stop = text.find('\n', start);
    std::string_view line = text.substr(start, stop == std::string_view::npos ? std::string_view::npos : stop - start);
    start = stop == std::string_view::npos ? text.size() + 1 : stop + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ConfigError("line " + std::to_string(line_no), "malformed section header");
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("line " + std::to_string(line_no), "expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no), "empty key");
    std::string value(trim(line.substr(eq + 1)));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    entries.set(section.empty() ? std::string(key) : section + "." + std::string(key), std::move(value));
  }
  return entries;
}

RunManifest load_config_entries(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  RunManifest entries = parse_config_text(buffer.str());
  const auto stored = entries.with_prefix(kManifestConfigPrefix);
  if (stored.empty()) return entries;
  RunManifest config;
  for (const auto& [k, v] : stored) config.set(k, v);
  return config;
}

RunConfig RunConfig::from_entries(const RunManifest& entries) {
  RunConfig cfg;
  Reader r(entries);

  cfg.system_name = r.text("system.name", cfg.system_name);
  static const std::set<std::string> kSystems{"pendulum", "rantzer", "contraction", "identity", "ode", "map"};
  require(kSystems.contains(cfg.system_name), "system.name",
          "unknown system '" + cfg.system_name + "' (expected pendulum, rantzer, contraction, identity, ode or map)");
  cfg.contraction_rate = r.number("system.rate", cfg.contraction_rate);
  cfg.identity_dim = r.count("system.dim", cfg.identity_dim);
  require(cfg.identity_dim >= 1 && cfg.identity_dim <= kMaxStateDim, "system.dim",
          "must lie in [1, " + std::to_string(kMaxStateDim) + "]");
  const bool user_system = cfg.system_name == "ode" || cfg.system_name == "map";
  if (user_system) {
    for (std::size_t k = 1;; ++k) {
      auto eq = r.raw("system.f" + std::to_string(k));
      if (!eq) break;
      cfg.equations.push_back(*eq);
    }
    require(!cfg.equations.empty(), "system.f1", "an ode or map system needs equations system.f1, system.f2, ...");
    require(cfg.equations.size() <= kMaxStateDim, "system.f1", "too many equations");
    for (const auto& [key, value] : entries.entries()) {
      if (is_equation_key(key)) {
        const auto k = std::stoul(key.substr(8));
        require(k >= 1 && k <= cfg.equations.size(), key, "equations must be numbered consecutively from f1");
      }
    }
  }
  BuiltinDefaults defaults = builtin_defaults(cfg.system_name, cfg.identity_dim);
  const std::size_t dim = user_system ? cfg.equations.size() : defaults.domain.dim();

  cfg.noise_alpha = r.number("noise.alpha", cfg.noise_alpha);
  require(cfg.noise_alpha >= 0.0, "noise.alpha", "must be non-negative");
  cfg.noise_q = r.count("noise.Q", cfg.noise_q);
  require(cfg.noise_q >= 1, "noise.Q", "must be at least 1");
  cfg.dt = r.number("integration.dt", cfg.dt);
  require(cfg.dt > 0.0, "integration.dt", "must be positive");
  const std::string method = r.text("integration.method", "rk4");
  require(method == "rk4" || method == "euler", "integration.method", "expected rk4 or euler");
  cfg.method = method == "rk4" ? IntegrationMethod::RK4 : IntegrationMethod::Euler;

  cfg.equilibrium = r.numbers("system.equilibrium").value_or(defaults.equilibrium);
  if (user_system && cfg.equilibrium.empty()) cfg.equilibrium = Vector(dim, 0.0);
  require(cfg.equilibrium.size() == dim, "system.equilibrium", "expected " + std::to_string(dim) + " coordinates");

  cfg.domain.lower = r.numbers("domain.lower").value_or(defaults.domain.lower);
  cfg.domain.upper = r.numbers("domain.upper").value_or(defaults.domain.upper);
  require(!cfg.domain.lower.empty(), "domain.lower", "required for ode and map systems");
  require(!cfg.domain.upper.empty(), "domain.upper", "required for ode and map systems");
  require(cfg.domain.lower.size() == dim, "domain.lower", "expected " + std::to_string(dim) + " coordinates");
  require(cfg.domain.upper.size() == dim, "domain.upper", "expected " + std::to_string(dim) + " coordinates");
  for (std::size_t a = 0; a < dim; ++a) {
    require(cfg.domain.lower[a] < cfg.domain.upper[a], "domain.upper", "must exceed domain.lower on every axis");
  }
  cfg.domain.wrap = r.flags("domain.wrap").value_or(
      defaults.domain.wrap.empty() ? std::vector<bool>(dim, false) : defaults.domain.wrap);
  require(cfg.domain.wrap.size() == dim, "domain.wrap", "expected " + std::to_string(dim) + " flags");

  cfg.counts = r.counts("grid.counts").value_or(
      defaults.counts.empty() ? std::vector<std::size_t>(dim, 50) : defaults.counts);
  require(cfg.counts.size() == dim, "grid.counts", "expected " + std::to_string(dim) + " counts");
  for (auto c : cfg.counts) require(c >= 1, "grid.counts", "every count must be at least 1");

  cfg.build.samples_per_cell = r.count("build.samples", cfg.build.samples_per_cell);
  require(cfg.build.samples_per_cell >= 1, "build.samples", "must be at least 1");
  cfg.build.seed = r.seed("build.seed", cfg.build.seed);
  try {
    cfg.build.sink_policy = parse_sink_policy(r.text("build.sink_policy", "sink_unstable"));
  } catch (const InvalidArgument&) {
    throw ConfigError("build.sink_policy", "expected sink_unstable, discard or clamp");
  }

  cfg.attractor_epsilon = r.number("attractor.epsilon", defaults.attractor_epsilon);
  require(cfg.attractor_epsilon >= 0.0, "attractor.epsilon", "must be non-negative");
  cfg.attractor_point = r.numbers("attractor.point").value_or(cfg.equilibrium);
  require(cfg.attractor_point.size() == dim, "attractor.point", "expected " + std::to_string(dim) + " coordinates");
  if (auto cells = r.counts("attractor.cells")) cfg.attractor_cells = *cells;

  const std::string analysis_method = r.text("analysis.method", "series");
  require(analysis_method == "series" || analysis_method == "solve", "analysis.method", "expected series or solve");
  cfg.analysis.method = analysis_method == "series" ? CertificateMethod::Series : CertificateMethod::Solve;
  cfg.analysis.alpha_weight = r.number("analysis.alpha_weight", cfg.analysis.alpha_weight);
  require(cfg.analysis.alpha_weight >= 1.0, "analysis.alpha_weight", "must be at least 1");
  cfg.analysis.solve_alpha = r.number("analysis.solve_alpha", cfg.analysis.solve_alpha);
  require(cfg.analysis.solve_alpha > 0.0 && cfg.analysis.solve_alpha <= 1.0, "analysis.solve_alpha",
          "must lie in (0, 1]");
  cfg.analysis.tol = r.number("analysis.tol", cfg.analysis.tol);
  require(cfg.analysis.tol > 0.0, "analysis.tol", "must be positive");
  cfg.analysis.k_max = r.count("analysis.k_max", cfg.analysis.k_max);
  require(cfg.analysis.k_max >= 1, "analysis.k_max", "must be at least 1");
  cfg.analysis.power_iterations = r.count("analysis.power_iterations", cfg.analysis.power_iterations);
  require(cfg.analysis.power_iterations >= 1, "analysis.power_iterations", "must be at least 1");
  cfg.analysis.decay_steps = r.count("analysis.decay_steps", cfg.analysis.decay_steps);
  require(cfg.analysis.decay_steps >= 2, "analysis.decay_steps", "must be at least 2");

  cfg.invariant_tol = r.number("invariant.tol", cfg.invariant_tol);
  require(cfg.invariant_tol > 0.0, "invariant.tol", "must be positive");
  cfg.invariant_max_iterations = r.count("invariant.max_iterations", cfg.invariant_max_iterations);
  require(cfg.invariant_max_iterations >= 1, "invariant.max_iterations", "must be at least 1");
  cfg.support_threshold = r.number("invariant.support_threshold", cfg.support_threshold);
  require(cfg.support_threshold >= 0.0, "invariant.support_threshold", "must be non-negative");
  const std::string form = r.text("invariant.form", "attractor_closed");
  require(form == "attractor_closed" || form == "full", "invariant.form", "expected attractor_closed or full");
  cfg.invariant_attractor_closed = form == "attractor_closed";

  cfg.simulate.n_init = r.count("simulate.n_init", cfg.simulate.n_init);
  require(cfg.simulate.n_init >= 1, "simulate.n_init", "must be at least 1");
  cfg.simulate.n_steps = r.count("simulate.n_steps", cfg.simulate.n_steps);
  cfg.simulate.n_noise_paths = r.count("simulate.n_paths", cfg.simulate.n_noise_paths);
  require(cfg.simulate.n_noise_paths >= 1, "simulate.n_paths", "must be at least 1");
  cfg.simulate.epsilon = r.number("simulate.epsilon", cfg.simulate.epsilon);
  require(cfg.simulate.epsilon > 0.0, "simulate.epsilon", "must be positive");
  cfg.simulate.delta = r.number("simulate.delta", cfg.simulate.delta);
  require(cfg.simulate.delta > 0.0 && cfg.simulate.delta < 1.0, "simulate.delta", "must lie in (0, 1)");
  cfg.simulate.seed = r.seed("simulate.seed", cfg.simulate.seed);
  cfg.simulate.record_verdicts = r.flag("simulate.record", false);

  cfg.output_dir = r.text("output.dir", cfg.output_dir.string());
  cfg.log_scale = r.flag("output.log_scale", cfg.log_scale);
  cfg.heatmap = r.flag("output.heatmap", cfg.heatmap);

  r.reject_unknown();
  cfg.entries = entries;
  return cfg;
}

StochasticMap RunConfig::make_map() const {
  try {
    if (system_name == "pendulum") return builtin_pendulum(noise_alpha, noise_q, dt, method);
    if (system_name == "rantzer") return builtin_rantzer(noise_alpha, noise_q, dt, method);
    if (system_name == "contraction") return builtin_contraction(contraction_rate, noise_alpha, noise_q);
    if (system_name == "identity") return builtin_identity(identity_dim);
  } catch (const InvalidArgument& e) {
    throw ConfigError("system.name", e.what());
  }

  const std::size_t dim = equations.size();
  auto exprs = std::make_shared<std::vector<Expression>>();
  for (std::size_t k = 0; k < dim; ++k) {
    try {
      exprs->push_back(Expression::compile(equations[k], dim, 1));
    } catch (const InvalidArgument& e) {
      throw ConfigError("system.f" + std::to_string(k + 1), e.what());
    }
  }
  StepFunction rhs = [exprs](std::span<const double> x, std::span<const double> w, std::span<double> out) {
    for (std::size_t k = 0; k < exprs->size(); ++k) out[k] = (*exprs)[k].evaluate(x, w);
  };
  try {
    NoiseAtoms noise = quantize_uniform_noise(noise_alpha, noise_q);
    if (system_name == "map") return StochasticMap(dim, std::move(noise), std::move(rhs), equilibrium, "map");
    return discretize_ode(OdeSpec{dim, std::move(rhs), dt, method}, std::move(noise), equilibrium, "ode");
  } catch (const InvalidArgument& e) {
    throw ConfigError("system.equilibrium", e.what());
  }
}

Partition RunConfig::make_partition() const {
  try {
    return Partition(domain, counts);
  } catch (const InvalidArgument& e) {
    throw ConfigError("grid.counts", e.what());
  }
}

CellSet RunConfig::make_attractor(const Partition& partition) const {
  if (!attractor_cells.empty()) {
    for (auto c : attractor_cells) {
      require(c < partition.cell_count(), "attractor.cells", "cell " + std::to_string(c) + " is out of range");
    }
    return CellSet(attractor_cells);
  }
  try {
    return partition.attractor_cells(attractor_point, attractor_epsilon);
  } catch (const InvalidArgument& e) {
    throw ConfigError("attractor.point", e.what());
  }
}

std::string config_reference() {
  return R"(Configuration keys (flat key = value; [section] headers prefix keys):
  system.name          pendulum | rantzer | contraction | identity | ode | map   [pendulum]
  system.f1, f2, ...   ode: vector field components; map: next-state components.
                       Symbols x1..xn, xi (noise), pi, e; + - * / ^ sin cos exp
  system.equilibrium   comma list                           [builtin; zeros for ode/map]
  system.rate          contraction rate                     [0.5]
  system.dim           identity dimension                   [2]
  noise.alpha          half-width of uniform noise          [0.5]
  noise.Q              number of noise atoms                [5]
  integration.dt       time step                            [0.1]
  integration.method   rk4 | euler                          [rk4]
  domain.lower/upper   comma lists            [pendulum +-pi; rantzer +-4; contraction +-1; identity 0..1]
  domain.wrap          comma list of true/false             [pendulum 1,1; rantzer 1,0; else 0]
  grid.counts          cells per axis                       [50 per axis; contraction 256; identity 16]
  build.samples        samples per cell M                   [100]
  build.seed           sampling seed                        [0]
  build.sink_policy    sink_unstable | discard | clamp      [sink_unstable]
  attractor.point      centre of X0                         [equilibrium]
  attractor.epsilon    l-inf radius of X0 (0 = containing cell)   [0; contraction 1e-9]
  attractor.cells      explicit X0 cell list (overrides point/epsilon)
  analysis.method      series | solve                       [series]
  analysis.alpha_weight series weight alpha >= 1            [1]
  analysis.solve_alpha contraction level in (0,1]           [1]
  analysis.tol         series / power-iteration tolerance   [1e-12]
  analysis.k_max       max series terms                     [1000000]
  analysis.power_iterations spectral-radius iterations      [20000]
  analysis.decay_steps decay-fit horizon                    [200]
  invariant.form       attractor_closed | full              [attractor_closed]
  invariant.tol        [1e-12]   invariant.max_iterations [200000]
  invariant.support_threshold  mass counted as support      [1e-6]
  simulate.n_init [2000]  simulate.n_steps [2000]  simulate.n_paths [5]
  simulate.epsilon [0.2]  simulate.delta [0.5]  simulate.seed [0]  simulate.record [false]
  output.dir [stochlyap-out]  output.log_scale [false]  output.heatmap [true]
)";
}

}  // namespace stochlyap::cli
