#pragma once

// Run configuration: plain-text "dotted.key = value" files, overridable by
// DEPOL_* environment variables and command-line settings, resolved into
// typed blocks with every default made explicit.

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "depol/error.hpp"
#include "depol/kernels.hpp"
#include "depol/meanfield.hpp"
#include "depol/microsim.hpp"
#include "depol/physcore.hpp"

namespace depol {

struct KeySpec {
  std::string_view key;
  std::string_view fallback; // empty: required, or derived from other keys
  std::string_view doc;
};

inline constexpr std::array<KeySpec, 27> config_keys{{
    {"species.name", "atom", "label"},
    {"species.omega_rad_per_s", "", "transition angular frequency (or give species.wavelength_m)"},
    {"species.wavelength_m", "", "transition wavelength, converted with omega = 2 pi c / lambda"},
    {"species.dipole_Cm", "", "transition dipole, required"},
    {"species.core_diameter_m", "", "hard-core diameter, required"},
    {"cutoff.shape", "gaussian", "gaussian | lorentzian"},
    {"cutoff.ell_m", "", "regularization length, required"},
    {"rdf.model", "hard_step", "ideal | hard_step | tabulated"},
    {"rdf.sigma_m", "", "hard_step diameter; defaults to species.core_diameter_m"},
    {"rdf.table", "", "tabulated g: file of 'r_m g' lines, relative to the config file"},
    {"meanfield.Omega_over_omega", "1", "comma-separated mode frequencies in units of omega"},
    {"meanfield.density_ratios", "0,0.5,1,1.5,2,2.5,3,3.5,4", "n/n_D grid"},
    {"microsim.box_over_ell", "", "L/ell; defaults to 8 unless microsim.atoms is given"},
    {"microsim.atoms", "", "atom count at the reference density; fixes L instead of box_over_ell"},
    {"microsim.reference_density_ratio", "3", "n/n_D at which microsim.atoms applies"},
    {"microsim.lambda_min_over_ell", "4", "lambda_min/ell"},
    {"microsim.sigma_over_ell", "", "sigma/ell; defaults to species.core_diameter_m / ell"},
    {"microsim.density_ratios", "0.25,0.5,1,2,3,4", "n/n_D grid"},
    {"microsim.replicas", "10", "configurations per density"},
    {"microsim.seed", "1", "master seed"},
    {"microsim.refinement_steps", "8", "bisection steps after the first sign change"},
    {"microsim.equilibration_sweeps", "0", "hard-sphere Metropolis sweeps after insertion"},
    {"microsim.max_dimension", "12000", "largest dynamical matrix accepted"},
    {"kernel.r_over_ell_max", "8", "largest r/ell in kernel-check"},
    {"kernel.samples", "20", "number of r/ell samples in kernel-check"},
    {"output.precision", "17", "significant digits of floating outputs"},
    {"scales.min_ratio", "4", "minimum of ell/sigma and lambda_min/ell"},
}};

inline const KeySpec* find_key(std::string_view key) {
  for (const auto& k : config_keys)
    if (k.key == key)
      return &k;
  return nullptr;
}

/// DEPOL_ + key upper-cased with dots replaced by underscores.
inline std::string env_name(std::string_view key) {
  std::string out = "DEPOL_";
  for (char c : key)
    out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos)
    return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

struct RawValue {
  std::string value;
  std::string source; // "file:<line>", "env", "flag" or "default"
};

using RawConfig = std::map<std::string, RawValue, std::less<>>;

/// Parses "key = value" lines; '#' starts a comment. Unknown and repeated
/// keys are errors.
inline RawConfig parse_key_values(std::istream& in, std::string_view origin = "config") {
  RawConfig out;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    const std::string body = trim(line);
    if (body.empty())
      continue;
    const std::string where = std::string(origin) + ":" + std::to_string(lineno);
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (!find_key(key))
      throw ConfigError(where + ": unknown key '" + key + "'");
    if (out.count(key))
      throw ConfigError(where + ": duplicate key '" + key + "'");
    out[key] = {value, "file:" + std::to_string(lineno)};
  }
  return out;
}

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str()))
    return std::string(v);
  return std::nullopt;
}

/// Precedence: explicit overrides, then environment, then the file.
inline void apply_overrides(RawConfig& raw, const std::vector<std::pair<std::string, std::string>>& overrides,
                            const EnvLookup& env = process_env) {
  for (const auto& spec : config_keys)
    if (auto v = env(env_name(spec.key)))
      raw[std::string(spec.key)] = {trim(*v), "env"};
  for (const auto& [key, value] : overrides) {
    if (!find_key(key))
      throw ConfigError("unknown key '" + key + "' in override");
    raw[key] = {trim(value), "flag"};
  }
}

namespace detail {

inline double parse_double(const RawConfig& raw, std::string_view key, std::string_view text) {
  const std::string s(text);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v))
    throw ConfigError("key '" + std::string(key) + "' (" + raw.at(std::string(key)).source +
                      "): '" + s + "' is not a finite number");
  return v;
}

inline std::uint64_t parse_unsigned(const RawConfig& raw, std::string_view key) {
  const std::string& s = raw.at(std::string(key)).value;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || s.front() == '-' || end != s.c_str() + s.size() || errno == ERANGE)
    throw ConfigError("key '" + std::string(key) + "': '" + s + "' is not a non-negative integer");
  return v;
}

inline std::vector<double> parse_list(const RawConfig& raw, std::string_view key) {
  std::vector<double> out;
  std::stringstream ss(raw.at(std::string(key)).value);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(parse_double(raw, key, trim(item)));
  if (out.empty())
    throw ConfigError("key '" + std::string(key) + "': empty list");
  return out;
}

inline std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

} // namespace detail

inline std::vector<std::pair<double, double>> read_rdf_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("rdf.table: cannot read '" + path.string() + "'");
  std::vector<std::pair<double, double>> table;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    double r = 0.0, g = 0.0;
    if (!(fields >> r)) {
      if (!trim(line).empty())
        throw ConfigError("rdf.table " + path.string() + ":" + std::to_string(lineno) +
                          ": expected 'r_m g'");
      continue;
    }
    std::string extra;
    if (!(fields >> g) || (fields >> extra))
      throw ConfigError("rdf.table " + path.string() + ":" + std::to_string(lineno) +
                        ": expected 'r_m g'");
    table.emplace_back(r, g);
  }
  return table;
}

struct MeanfieldBlock {
  std::vector<double> Omega_over_omega{1.0};
  std::vector<double> density_ratios;
};

struct MicrosimBlock {
  MicrosimParams params;
  std::vector<double> density_ratios;
  std::optional<std::uint64_t> atoms;
  double reference_density_ratio = 3.0;
};

struct KernelCheckBlock {
  double r_over_ell_max = 8.0;
  int samples = 20;
};

struct RunConfig {
  AtomSpecies species;
  CutoffProfile profile{ProfileShape::gaussian, 1.0};
  RadialDistribution rdf = RadialDistribution::ideal();
  MeanfieldBlock meanfield;
  MicrosimBlock microsim;
  KernelCheckBlock kernel;
  int precision = 17;
  double min_scale_ratio = 4.0;
  RawConfig resolved;                // every key with its final value
  std::vector<std::string> warnings; // non-fatal diagnostics
};

/// Typed, validated configuration. `base_dir` anchors relative table paths.
inline RunConfig resolve_config(RawConfig raw, const std::filesystem::path& base_dir = {}) {
  for (const auto& spec : config_keys)
    if (!raw.count(spec.key) && !spec.fallback.empty())
      raw[std::string(spec.key)] = {std::string(spec.fallback), "default"};
  const auto has = [&](std::string_view key) { return raw.count(std::string(key)) > 0; };
  const auto text = [&](std::string_view key) -> const std::string& {
    return raw.at(std::string(key)).value;
  };
  const auto number = [&](std::string_view key) { return detail::parse_double(raw, key, text(key)); };
  const auto require = [&](std::string_view key) {
    if (!has(key))
      throw ConfigError("missing required key '" + std::string(key) + "'");
  };
  const auto positive = [&](std::string_view key) {
    const double v = number(key);
    if (!(v > 0))
      throw ConfigError("key '" + std::string(key) + "' must be positive, got " + text(key));
    return v;
  };
  const auto derived = [&](std::string_view key, double v) {
    raw[std::string(key)] = {detail::format_value(v), "derived"};
  };

  RunConfig cfg;

  cfg.species.name = text("species.name");
  if (has("species.omega_rad_per_s") == has("species.wavelength_m"))
    throw ConfigError("give exactly one of 'species.omega_rad_per_s' and 'species.wavelength_m'");
  if (has("species.omega_rad_per_s")) {
    cfg.species.omega = positive("species.omega_rad_per_s");
  } else {
    cfg.species.omega = angular_frequency_from_wavelength(positive("species.wavelength_m"));
    derived("species.omega_rad_per_s", cfg.species.omega);
  }
  require("species.dipole_Cm");
  cfg.species.dipole = positive("species.dipole_Cm");
  require("species.core_diameter_m");
  cfg.species.core_diameter = number("species.core_diameter_m");
  if (!(cfg.species.core_diameter >= 0))
    throw ConfigError("key 'species.core_diameter_m' must be non-negative");

  require("cutoff.ell_m");
  try {
    cfg.profile = CutoffProfile(profile_shape_from_string(text("cutoff.shape")),
                                positive("cutoff.ell_m"));
  } catch (const DomainError& e) {
    throw ConfigError(std::string("cutoff: ") + e.what());
  }
  const double ell = cfg.profile.ell();

  cfg.min_scale_ratio = positive("scales.min_ratio");
  const double min_ratio = cfg.min_scale_ratio;
  const auto quote = [](double x) { return detail::format_value(x); };

  try {
    switch (rdf_model_from_string(text("rdf.model"))) {
    case RdfModel::ideal:
      cfg.rdf = RadialDistribution::ideal();
      break;
    case RdfModel::hard_step: {
      double sigma = cfg.species.core_diameter;
      if (has("rdf.sigma_m"))
        sigma = number("rdf.sigma_m");
      else
        derived("rdf.sigma_m", sigma);
      cfg.rdf = RadialDistribution::hard_step(sigma);
      break;
    }
    case RdfModel::tabulated: {
      require("rdf.table");
      // Echo an absolute path so the resolved file stands on its own.
      const auto table = std::filesystem::absolute(base_dir / text("rdf.table"));
      cfg.rdf = RadialDistribution::tabulated(read_rdf_table(table));
      raw["rdf.table"].value = table.lexically_normal().string();
      break;
    }
    }
  } catch (const DomainError& e) {
    throw ConfigError(std::string("rdf: ") + e.what());
  }
  if (cfg.rdf.model() == RdfModel::hard_step && cfg.rdf.core_diameter() > 0 &&
      !(ell / cfg.rdf.core_diameter() >= min_ratio))
    throw ConfigError("scale separation violated: need sigma << ell, but ell/sigma = " +
                      quote(ell / cfg.rdf.core_diameter()) + " < " + quote(min_ratio));

  cfg.meanfield.Omega_over_omega = detail::parse_list(raw, "meanfield.Omega_over_omega");
  for (double x : cfg.meanfield.Omega_over_omega)
    if (!(x > 0))
      throw ConfigError("meanfield.Omega_over_omega entries must be positive");
  cfg.meanfield.density_ratios = detail::parse_list(raw, "meanfield.density_ratios");
  for (double x : cfg.meanfield.density_ratios)
    if (!(x >= 0))
      throw ConfigError("meanfield.density_ratios entries must be non-negative");

  auto& ms = cfg.microsim;
  ms.params.min_scale_ratio = min_ratio;
  ms.params.lambda_min_over_ell = positive("microsim.lambda_min_over_ell");
  if (has("microsim.sigma_over_ell")) {
    ms.params.core_over_ell = number("microsim.sigma_over_ell");
    if (!(ms.params.core_over_ell >= 0))
      throw ConfigError("key 'microsim.sigma_over_ell' must be non-negative");
  } else {
    ms.params.core_over_ell = cfg.species.core_diameter / ell;
    derived("microsim.sigma_over_ell", ms.params.core_over_ell);
  }
  ms.reference_density_ratio = positive("microsim.reference_density_ratio");
  if (has("microsim.atoms")) {
    if (has("microsim.box_over_ell"))
      throw ConfigError("give at most one of 'microsim.atoms' and 'microsim.box_over_ell'");
    ms.atoms = detail::parse_unsigned(raw, "microsim.atoms");
    if (*ms.atoms == 0)
      throw ConfigError("key 'microsim.atoms' must be positive");
    const double n = ms.reference_density_ratio * dicke_density(cfg.species);
    ms.params.box_over_ell = std::cbrt(static_cast<double>(*ms.atoms) / n) / ell;
    derived("microsim.box_over_ell", ms.params.box_over_ell);
  } else {
    if (!has("microsim.box_over_ell"))
      derived("microsim.box_over_ell", 8.0);
    ms.params.box_over_ell = positive("microsim.box_over_ell");
  }
  ms.density_ratios = detail::parse_list(raw, "microsim.density_ratios");
  for (double x : ms.density_ratios)
    if (!(x > 0))
      throw ConfigError("microsim.density_ratios entries must be positive");
  const auto replicas = detail::parse_unsigned(raw, "microsim.replicas");
  const auto steps = detail::parse_unsigned(raw, "microsim.refinement_steps");
  const auto sweeps = detail::parse_unsigned(raw, "microsim.equilibration_sweeps");
  if (replicas < 1 || replicas > 100000 || steps > 64 || sweeps > 1000000)
    throw ConfigError("microsim: replicas, refinement_steps or equilibration_sweeps out of range");
  ms.params.replicas = static_cast<int>(replicas);
  ms.params.refinement_steps = static_cast<int>(steps);
  ms.params.sampler.equilibration_sweeps = static_cast<int>(sweeps);
  ms.params.master_seed = detail::parse_unsigned(raw, "microsim.seed");
  ms.params.assembly.max_dimension = detail::parse_unsigned(raw, "microsim.max_dimension");
  check_scale_separation(ms.params);

  cfg.kernel.r_over_ell_max = positive("kernel.r_over_ell_max");
  const auto samples = detail::parse_unsigned(raw, "kernel.samples");
  if (samples < 2 || samples > 100000)
    throw ConfigError("kernel.samples must lie in [2, 100000]");
  cfg.kernel.samples = static_cast<int>(samples);

  const auto precision = detail::parse_unsigned(raw, "output.precision");
  if (precision < 1 || precision > 17)
    throw ConfigError("output.precision must lie in [1, 17]");
  cfg.precision = static_cast<int>(precision);

  cfg.warnings = scale_warnings(cfg.species, ell);
  for (auto& w : rdf_scale_warnings(cfg.rdf, cfg.profile))
    cfg.warnings.push_back(std::move(w));
  cfg.resolved = std::move(raw);
  return cfg;
}

/// Reads, overrides and resolves a configuration file.
inline RunConfig parse_config(const std::filesystem::path& path,
                              const std::vector<std::pair<std::string, std::string>>& overrides = {},
                              const EnvLookup& env = process_env) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot read configuration file '" + path.string() + "'");
  auto raw = parse_key_values(in, path.string());
  apply_overrides(raw, overrides, env);
  return resolve_config(std::move(raw), path.parent_path());
}

/// The resolved configuration in the input format, one key per line,
/// annotated with where each value came from. Derived values are written
/// as comments, so parsing the text back yields the same RunConfig.
inline std::string resolved_config_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& spec : config_keys) {
    const auto it = cfg.resolved.find(spec.key);
    if (it == cfg.resolved.end())
      continue;
    const bool derived = it->second.source == "derived";
    out += (derived ? "# " : "") + std::string(spec.key) + " = " + it->second.value + "  # " +
           it->second.source + "\n";
  }
  return out;
}

} // namespace depol
