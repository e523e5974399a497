#pragma once

// Sweeps behind the command-line front end. Each command maps one library
// operation over the configured grid and produces a CSV table; failures are
// reported per row and never abort the sweep.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <boost/version.hpp>

#include "depol/config.hpp"
#include "depol/error.hpp"
#include "depol/kernels.hpp"
#include "depol/meanfield.hpp"
#include "depol/microsim.hpp"
#include "depol/parallel.hpp"
#include "depol/physcore.hpp"

namespace depol {

inline constexpr std::string_view version = "0.1.0";
inline constexpr std::string_view csv_format = "depol-csv/1";

enum class Command { kernel_check, shift, dispersion, critical, microsim };

inline constexpr std::array<std::pair<Command, std::string_view>, 5> command_names{{
    {Command::kernel_check, "kernel-check"},
    {Command::shift, "shift"},
    {Command::dispersion, "dispersion"},
    {Command::critical, "critical"},
    {Command::microsim, "microsim"},
}};

inline std::string_view to_string(Command c) {
  for (const auto& [cmd, name] : command_names)
    if (cmd == c)
      return name;
  return "?";
}

inline Command command_from_string(std::string_view s) {
  for (const auto& [cmd, name] : command_names)
    if (name == s)
      return cmd;
  throw ConfigError("unknown command '" + std::string(s) + "'");
}

struct SweepResult {
  Command command = Command::shift;
  std::vector<std::string> preamble; // comment lines after the format tag
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> footer; // machine-readable summary comments
  ExitCode status = ExitCode::success;
};

inline std::string format_number(double v, int precision = 17) {
  if (std::isnan(v))
    return "nan";
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos)
    return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"')
      out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

inline void write_csv(std::ostream& os, const SweepResult& r) {
  os << "# format=" << csv_format << "\n";
  for (const auto& line : r.preamble)
    os << "# " << line << "\n";
  for (std::size_t i = 0; i < r.header.size(); ++i)
    os << (i ? "," : "") << r.header[i];
  os << "\n";
  for (const auto& row : r.rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      os << (i ? "," : "") << csv_field(row[i]);
    os << "\n";
  }
  for (const auto& line : r.footer)
    os << "# " << line << "\n";
}

namespace detail {

struct RowOutcome {
  std::vector<std::string> cells;
  std::string error;
  ExitCode code = ExitCode::success;
};

inline ExitCode worse(ExitCode a, ExitCode b) {
  return static_cast<int>(a) >= static_cast<int>(b) ? a : b;
}

/// Runs fill(i, cells) for every row on the worker pool, in input order in
/// the output. Library errors become the row's error column.
template <class Fill>
void run_rows(SweepResult& out, std::size_t count, std::size_t columns, unsigned workers,
              Fill&& fill) {
  std::vector<RowOutcome> rows(count);
  parallel_for(count, workers, [&](std::size_t i) {
    auto& row = rows[i];
    try {
      fill(i, row.cells);
    } catch (const ConvergenceError& e) {
      row.error = e.what();
      row.code = ExitCode::non_convergence;
    } catch (const SamplingError& e) {
      row.error = e.what();
      row.code = ExitCode::infeasible_sampling;
    } catch (const Error& e) {
      row.error = e.what();
      row.code = ExitCode::config_error;
    }
  });
  for (auto& row : rows) {
    row.cells.resize(columns, "");
    row.cells.push_back(row.error);
    out.rows.push_back(std::move(row.cells));
    out.status = worse(out.status, row.code);
  }
}

inline std::string species_line(const RunConfig& cfg) {
  return "species=" + cfg.species.name + " omega_rad_per_s=" + format_number(cfg.species.omega) +
         " dipole_Cm=" + format_number(cfg.species.dipole) +
         " n_D_per_m3=" + format_number(dicke_density(cfg.species));
}

inline SweepResult kernel_check(const RunConfig& cfg, unsigned workers) {
  SweepResult out;
  out.command = Command::kernel_check;
  const auto& p = cfg.profile;
  const double l = p.ell();
  out.preamble = {"cutoff shape=" + std::string(to_string(p.shape())) +
                      " ell_m=" + format_number(l, cfg.precision),
                  "kernel values in 1/m^3; trK and trU from the spectral route",
                  "route_disagreement = max |K_spectral - K_real_space| / Gamma(0)",
                  "trU is undefined at r = 0 (contact term)"};
  out.header = {"r_over_ell", "Gamma", "trK", "2Gamma", "trU", "route_disagreement"};
  const int n = cfg.kernel.samples;
  const double gamma0 = Gamma_r(p, 0.0);
  run_rows(out, n, out.header.size(), workers, [&](std::size_t i, std::vector<std::string>& c) {
    const double rho = cfg.kernel.r_over_ell_max * static_cast<double>(i) / (n - 1);
    const double r = rho * l;
    const double G = Gamma_r(p, r);
    c.push_back(format_number(rho, cfg.precision));
    c.push_back(format_number(G, cfg.precision));
    const auto ks = kernel_K_components(p, r, KernelRoute::spectral);
    const auto kr = kernel_K_components(p, r, KernelRoute::real_space);
    c.push_back(format_number(ks.trace(), cfg.precision));
    c.push_back(format_number(2.0 * G, cfg.precision));
    c.push_back(r > 0 ? format_number(kernel_u_components(p, r, KernelRoute::spectral).trace(),
                                      cfg.precision)
                      : "nan");
    const double dis = std::max(std::abs(ks.transverse - kr.transverse),
                                std::abs(ks.longitudinal - kr.longitudinal)) /
                       gamma0;
    c.push_back(format_number(dis, cfg.precision));
  });
  return out;
}

inline std::string rdf_line(const RunConfig& cfg) {
  std::string s = "rdf model=" + std::string(to_string(cfg.rdf.model()));
  if (cfg.rdf.model() == RdfModel::hard_step)
    s += " sigma_m=" + format_number(cfg.rdf.core_diameter(), cfg.precision);
  return s + " cutoff=" + std::string(to_string(cfg.profile.shape())) +
         " ell_m=" + format_number(cfg.profile.ell(), cfg.precision);
}

inline SweepResult shift(const RunConfig& cfg, unsigned workers) {
  SweepResult out;
  out.command = Command::shift;
  out.preamble = {rdf_line(cfg), "varsigma = (n/n_D) (2 J / 3 + g(0) / 3)"};
  out.header = {"density_ratio", "varsigma", "overlap_J", "g_at_origin"};
  const auto& grid = cfg.meanfield.density_ratios;
  run_rows(out, grid.size(), out.header.size(), workers,
           [&](std::size_t i, std::vector<std::string>& c) {
             const auto coupling = contact_coupling(cfg.rdf, cfg.profile);
             c.push_back(format_number(grid[i], cfg.precision));
             c.push_back(format_number(depolarization_shift(grid[i], coupling), cfg.precision));
             c.push_back(format_number(coupling.overlap, cfg.precision));
             c.push_back(format_number(coupling.g_at_origin, cfg.precision));
           });
  return out;
}

inline SweepResult dispersion(const RunConfig& cfg, unsigned workers) {
  SweepResult out;
  out.command = Command::dispersion;
  out.preamble = {rdf_line(cfg), species_line(cfg),
                  "s2 columns over_wW are in units of omega * Omega; *_rad2_per_s2 in SI",
                  "stable = 1 iff s2_plus <= 0"};
  out.header = {"density_ratio",   "varsigma",        "s2_plus_over_wW",     "s2_minus_over_wW",
                "stable",          "Omega_over_omega", "s2_plus_rad2_per_s2", "s2_minus_rad2_per_s2"};
  const auto& ratios = cfg.meanfield.Omega_over_omega;
  const auto& grid = cfg.meanfield.density_ratios;
  const double w = cfg.species.omega;
  run_rows(out, ratios.size() * grid.size(), out.header.size(), workers,
           [&](std::size_t i, std::vector<std::string>& c) {
             const double x = ratios[i / grid.size()];
             const double n = grid[i % grid.size()];
             const auto coupling = contact_coupling(cfg.rdf, cfg.profile);
             const auto in = self_consistent_input(w, x * w, n, coupling);
             const auto b = branch_frequencies(in);
             const auto [plus, minus] = b.in_units_of(in.omega, in.Omega);
             c.push_back(format_number(n, cfg.precision));
             c.push_back(format_number(in.varsigma, cfg.precision));
             c.push_back(format_number(plus, cfg.precision));
             c.push_back(format_number(minus, cfg.precision));
             c.push_back(b.stable ? "1" : "0");
             c.push_back(format_number(x, cfg.precision));
             c.push_back(format_number(b.s2_plus, cfg.precision));
             c.push_back(format_number(b.s2_minus, cfg.precision));
           });
  return out;
}

inline SweepResult critical(const RunConfig& cfg, unsigned workers) {
  SweepResult out;
  out.command = Command::critical;
  out.preamble = {rdf_line(cfg), species_line(cfg),
                  "nc_over_nD = 1 / (1 - 2 J / 3 - g(0) / 3)",
                  "bisection_max_rel_dev: largest deviation of the bisection route over "
                  "meanfield.Omega_over_omega",
                  "mean interatomic distance reported as n^(-1/3)"};
  out.header = {"nc_over_nD",     "nc_per_m3",  "nc_distance_m",         "nD_per_m3",
                "overlap_J",      "g_at_origin", "bisection_max_rel_dev", "status"};
  run_rows(out, 1, out.header.size(), workers, [&](std::size_t, std::vector<std::string>& c) {
    const auto coupling = contact_coupling(cfg.rdf, cfg.profile);
    const double nD = dicke_density(cfg.species);
    const auto nc = critical_density(coupling);
    double dev = 0.0;
    for (double x : cfg.meanfield.Omega_over_omega) {
      const auto b = critical_density_by_bisection(coupling, cfg.species.omega,
                                                   x * cfg.species.omega);
      if (nc.has_value() != b.has_value())
        throw ConvergenceError("critical: closed form and bisection disagree on existence", 1.0);
      if (nc)
        dev = std::max(dev, std::abs(*b - *nc) / *nc);
    }
    const double inf = std::numeric_limits<double>::infinity();
    c.push_back(format_number(nc.value_or(inf), cfg.precision));
    c.push_back(format_number(nc ? *nc * nD : inf, cfg.precision));
    c.push_back(format_number(nc ? mean_interatomic_distance(*nc * nD) : 0.0, cfg.precision));
    c.push_back(format_number(nD, cfg.precision));
    c.push_back(format_number(coupling.overlap, cfg.precision));
    c.push_back(format_number(coupling.g_at_origin, cfg.precision));
    c.push_back(format_number(dev, cfg.precision));
    c.push_back(nc ? "critical" : std::string(no_instability_message));
  });
  return out;
}

inline SweepResult microsim(const RunConfig& cfg, unsigned workers) {
  SweepResult out;
  out.command = Command::microsim;
  const auto& ms = cfg.microsim;
  const auto& p = ms.params;
  out.preamble = {
      species_line(cfg),
      "cutoff=" + std::string(to_string(cfg.profile.shape())) +
          " ell_m=" + format_number(cfg.profile.ell(), cfg.precision) +
          " box_over_ell=" + format_number(p.box_over_ell, cfg.precision) +
          " lambda_min_over_ell=" + format_number(p.lambda_min_over_ell, cfg.precision) +
          " sigma_over_ell=" + format_number(p.core_over_ell, cfg.precision) +
          " replicas=" + std::to_string(p.replicas) + " seed=" + std::to_string(p.master_seed),
      "min_eig_* in rad^2/s^2 (symmetrized dynamical matrix); kind=grid|probe"};
  out.header = {"density_over_nD", "min_eig_mean", "min_eig_std", "unstable_fraction",
                "kind",            "atoms",        "min_eig_mean_over_w2"};
  const double w2 = cfg.species.omega * cfg.species.omega;
  StabilityReport report;
  try {
    report = stability_scan(ms.density_ratios, cfg.species, cfg.profile, p, workers);
  } catch (const Error& e) {
    // Geometry-level failure: one row carrying the error.
    out.rows.push_back(std::vector<std::string>(out.header.size(), ""));
    out.rows.back().push_back(e.what());
    out.status = dynamic_cast<const ConvergenceError*>(&e) ? ExitCode::non_convergence
                 : dynamic_cast<const SamplingError*>(&e)  ? ExitCode::infeasible_sampling
                                                           : ExitCode::config_error;
    out.header.push_back("error");
    out.footer.push_back("threshold none");
    return out;
  }
  const auto emit = [&](const StabilityPoint& pt, const char* kind) {
    out.rows.push_back({format_number(pt.density_ratio, cfg.precision),
                        format_number(pt.min_eig_mean, cfg.precision),
                        format_number(pt.min_eig_std, cfg.precision),
                        format_number(pt.unstable_fraction, cfg.precision), kind,
                        std::to_string(pt.atoms),
                        format_number(pt.min_eig_mean / w2, cfg.precision), pt.error});
    out.status = worse(out.status, pt.error_code);
  };
  for (const auto& pt : report.grid)
    emit(pt, "grid");
  for (const auto& pt : report.probes)
    emit(pt, "probe");
  if (report.threshold)
    out.footer.push_back("threshold lower_over_nD=" +
                         format_number(report.threshold->lower_ratio, cfg.precision) +
                         " upper_over_nD=" +
                         format_number(report.threshold->upper_ratio, cfg.precision) +
                         " estimate_over_nD=" +
                         format_number(report.threshold->estimate(), cfg.precision) +
                         " estimate_per_m3=" +
                         format_number(report.threshold->estimate() * report.dicke_density,
                                       cfg.precision));
  else
    out.footer.push_back("threshold none");
  out.header.push_back("error");
  return out;
}

} // namespace detail

/// Runs one command over the configured grid. Rows are computed on up to
/// `workers` threads and emitted in input order.
inline SweepResult run_sweep(const RunConfig& cfg, Command command, unsigned workers = 1) {
  SweepResult out;
  switch (command) {
  case Command::kernel_check:
    out = detail::kernel_check(cfg, workers);
    break;
  case Command::shift:
    out = detail::shift(cfg, workers);
    break;
  case Command::dispersion:
    out = detail::dispersion(cfg, workers);
    break;
  case Command::critical:
    out = detail::critical(cfg, workers);
    break;
  case Command::microsim:
    return detail::microsim(cfg, workers);
  }
  out.header.push_back("error");
  return out;
}

struct RunInfo {
  std::string config_path;
  unsigned workers = 1;
  double wall_seconds = 0.0;
};

inline std::string manifest_text(const RunConfig& cfg, const SweepResult& r, const RunInfo& info) {
  std::string s;
  s += "depol_version = " + std::string(version) + "\n";
  s += "csv_format = " + std::string(csv_format) + "\n";
  s += "command = " + std::string(to_string(r.command)) + "\n";
  s += "config = " + info.config_path + "\n";
  s += "seed = " + std::to_string(cfg.microsim.params.master_seed) + "\n";
  s += "workers = " + std::to_string(info.workers) + "\n";
  s += "exit_code = " + std::to_string(static_cast<int>(r.status)) + "\n";
  s += "wall_seconds = " + format_number(info.wall_seconds, 6) + "\n";
  s += "compiler = " + std::string(__VERSION__) + "\n";
  s += "eigen = " + std::to_string(EIGEN_WORLD_VERSION) + "." +
       std::to_string(EIGEN_MAJOR_VERSION) + "." + std::to_string(EIGEN_MINOR_VERSION) + "\n";
  s += "boost = " + std::string(BOOST_LIB_VERSION) + "\n";
  for (const auto& w : cfg.warnings)
    s += "warning = " + w + "\n";
  s += "\n# resolved configuration\n" + resolved_config_text(cfg);
  return s;
}

/// Writes <command>.csv, resolved_config.txt and manifest.txt into a new
/// directory. An existing directory is never reused.
inline void write_outputs(const std::filesystem::path& dir, const RunConfig& cfg,
                          const SweepResult& r, const RunInfo& info) {
  namespace fs = std::filesystem;
  if (fs::exists(dir))
    throw ConfigError("output directory '" + dir.string() + "' already exists");
  fs::create_directories(dir);
  const auto put = [&](const fs::path& name, const auto& write) {
    std::ofstream os(dir / name, std::ios::binary);
    if (!os)
      throw ConfigError("cannot write '" + (dir / name).string() + "'");
    write(os);
  };
  put(std::string(to_string(r.command)) + ".csv", [&](std::ostream& os) { write_csv(os, r); });
  put("resolved_config.txt", [&](std::ostream& os) { os << resolved_config_text(cfg); });
  put("manifest.txt", [&](std::ostream& os) { os << manifest_text(cfg, r, info); });
}

} // namespace depol
