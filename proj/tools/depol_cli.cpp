// depol: command-line front end.
//
//   depol --config run.conf --out results/shift shift
//   depol --config run.conf --out results/ms --workers 4 microsim --atoms 256
//
// Exit codes: 0 success, 2 configuration error, 3 numerical non-convergence,
// 4 infeasible sampling. Row-level failures set the worst code seen.

#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "depol/config.hpp"
#include "depol/error.hpp"
#include "depol/sweep.hpp"

namespace {

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i)
    s += (i ? "," : "") + depol::format_number(v[i]);
  return s;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field and finite-N stability analysis of dense dipolar gases"};
  app.set_version_flag("--version", std::string(depol::version));

  std::string config_path, out_dir;
  unsigned workers = 1;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> settings;
  app.add_option("--config", config_path, "key = value configuration file")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (must not exist)")->required();
  app.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "master seed, overrides microsim.seed");
  app.add_option("--set", settings, "key=value override, repeatable");
  app.require_subcommand(1);

  std::vector<std::pair<depol::Command, CLI::App*>> subs;
  for (const auto& [cmd, name] : depol::command_names)
    subs.emplace_back(cmd, app.add_subcommand(std::string(name)));
  subs[0].second->description("Tr K, Tr u and route agreement against r/ell");
  subs[1].second->description("depolarization shift over meanfield.density_ratios");
  subs[2].second->description("polariton branches over the density and Omega grids");
  subs[3].second->description("critical density n_c/n_D");
  CLI::App* ms = subs[4].second;
  ms->description("finite-N minimal eigenvalue scan and threshold");

  std::optional<std::uint64_t> atoms;
  std::optional<double> box_over_ell, lambda_over_ell, sigma_over_ell;
  std::optional<int> replicas;
  std::vector<double> densities;
  ms->add_option("--atoms", atoms, "atom count at microsim.reference_density_ratio");
  ms->add_option("--box-over-ell", box_over_ell, "L/ell");
  ms->add_option("--lambda-min-over-ell", lambda_over_ell, "lambda_min/ell");
  ms->add_option("--sigma-over-ell", sigma_over_ell, "sigma/ell");
  ms->add_option("--densities", densities, "n/n_D grid")->delimiter(',');
  ms->add_option("--replicas", replicas, "configurations per density");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(depol::ExitCode::config_error);
  }

  depol::Command command = depol::Command::shift;
  for (const auto& [cmd, sub] : subs)
    if (sub->parsed())
      command = cmd;

  std::vector<std::pair<std::string, std::string>> overrides;
  for (const auto& s : settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      std::cerr << "depol: --set expects key=value, got '" << s << "'\n";
      return static_cast<int>(depol::ExitCode::config_error);
    }
    overrides.emplace_back(depol::trim(s.substr(0, eq)), depol::trim(s.substr(eq + 1)));
  }
  if (seed)
    overrides.emplace_back("microsim.seed", std::to_string(*seed));
  if (atoms)
    overrides.emplace_back("microsim.atoms", std::to_string(*atoms));
  if (box_over_ell)
    overrides.emplace_back("microsim.box_over_ell", depol::format_number(*box_over_ell));
  if (lambda_over_ell)
    overrides.emplace_back("microsim.lambda_min_over_ell", depol::format_number(*lambda_over_ell));
  if (sigma_over_ell)
    overrides.emplace_back("microsim.sigma_over_ell", depol::format_number(*sigma_over_ell));
  if (replicas)
    overrides.emplace_back("microsim.replicas", std::to_string(*replicas));
  if (!densities.empty())
    overrides.emplace_back("microsim.density_ratios", join(densities));

  try {
    const auto cfg = depol::parse_config(config_path, overrides);
    for (const auto& w : cfg.warnings)
      std::cerr << "depol: warning: " << w << "\n";
    if (std::filesystem::exists(out_dir))
      throw depol::ConfigError("output directory '" + out_dir + "' already exists");

    const auto start = std::chrono::steady_clock::now();
    const auto result = depol::run_sweep(cfg, command, workers);
    const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start;

    depol::write_outputs(out_dir, cfg, result, {config_path, workers, wall.count()});
    for (const auto& row : result.rows)
      if (!row.back().empty())
        std::cerr << "depol: row error: " << row.back() << "\n";
    for (const auto& line : result.footer)
      std::cout << line << "\n";
    std::cout << "wrote " << out_dir << "/" << depol::to_string(command) << ".csv\n";
    return static_cast<int>(result.status);
  } catch (const depol::ConfigError& e) {
    std::cerr << "depol: configuration error: " << e.what() << "\n";
    return static_cast<int>(depol::ExitCode::config_error);
  } catch (const depol::ConvergenceError& e) {
    std::cerr << "depol: " << e.what() << "\n";
    return static_cast<int>(depol::ExitCode::non_convergence);
  } catch (const depol::SamplingError& e) {
    std::cerr << "depol: " << e.what() << "\n";
    return static_cast<int>(depol::ExitCode::infeasible_sampling);
  } catch (const depol::Error& e) {
    std::cerr << "depol: " << e.what() << "\n";
    return static_cast<int>(depol::ExitCode::config_error);
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "depol: " << e.what() << "\n";
    return static_cast<int>(depol::ExitCode::config_error);
  }
}
