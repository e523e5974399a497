#pragma once

// Finite-N microscopic model: hard-sphere atoms in a periodic cube coupled
// to the transverse cavity modes below the cutoff wavelength.
//
// Linearized equations of motion
//   q_j'' = -w^2 q_j - (2 d^2 w / hbar eps0) sum_{i != j} u(x_ji) q_i
//           - (d w / hbar eps0) sum_nu A_nu f_nu(x_j)
//   A_nu'' = -W_nu^2 A_nu - (d W_nu / hbar eps0) sum_j q_j . f_nu(x_j)
// After q -> q / sqrt(w), A_nu -> A_nu / sqrt(W_nu) the coefficient matrix
// is symmetric; the system is stable iff it is positive semidefinite.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "depol/error.hpp"
#include "depol/kernels.hpp"
#include "depol/parallel.hpp"
#include "depol/physcore.hpp"

namespace depol {

inline Vec3 minimum_image(Vec3 d, double box) {
  for (int a = 0; a < 3; ++a)
    d[a] -= box * std::nearbyint(d[a] / box);
  return d;
}

struct Configuration {
  double box_length = 0.0;
  double core_diameter = 0.0;
  std::vector<Vec3> positions;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return positions.size(); }
  double density() const { return positions.size() / std::pow(box_length, 3); }
};

inline double min_pair_distance(const Configuration& c) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = i + 1; j < c.size(); ++j)
      best = std::min(best, minimum_image(c.positions[i] - c.positions[j], c.box_length).norm());
  return best;
}

struct SamplerOptions {
  double max_packing_fraction = 0.3;
  std::size_t attempts_per_atom = 20000;
  int equilibration_sweeps = 0; // hard-sphere Metropolis sweeps after insertion
  double max_step_over_sigma = 0.5;
};

inline std::size_t atom_count(double density, double box) {
  return static_cast<std::size_t>(std::llround(density * box * box * box));
}

namespace detail {

inline bool overlaps(const std::vector<Vec3>& pts, std::size_t skip, const Vec3& x, double box,
                     double sigma2) {
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (i != skip && minimum_image(pts[i] - x, box).squaredNorm() < sigma2)
      return true;
  return false;
}

inline Vec3 wrap(Vec3 x, double box) {
  for (int a = 0; a < 3; ++a) {
    x[a] -= box * std::floor(x[a] / box);
    if (x[a] >= box)
      x[a] = 0.0;
  }
  return x;
}

} // namespace detail

/// Random sequential insertion of round(n L^3) hard spheres of diameter
/// sigma under the minimum-image convention. Deterministic given the seed.
inline Configuration sample_configuration(double density, double box, const AtomSpecies& species,
                                          std::uint64_t seed, const SamplerOptions& opt = {}) {
  species.validate();
  if (!(density >= 0) || !std::isfinite(density))
    throw DomainError("sample_configuration: density must be non-negative");
  if (!(box > 0))
    throw DomainError("sample_configuration: box length must be positive");
  const double sigma = species.core_diameter;
  if (!(sigma < 0.5 * box))
    throw SamplingError("sample_configuration: core diameter must be below half the box length");
  const std::size_t n_atoms = atom_count(density, box);
  const double packing = n_atoms * std::numbers::pi / 6.0 * std::pow(sigma / box, 3);
  if (!(packing < opt.max_packing_fraction))
    throw SamplingError("sample_configuration: packing fraction " + std::to_string(packing) +
                        " is not below " + std::to_string(opt.max_packing_fraction));

  Configuration c;
  c.box_length = box;
  c.core_diameter = sigma;
  c.seed = seed;
  c.positions.reserve(n_atoms);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(0.0, box);
  const double sigma2 = sigma * sigma;
  const std::size_t budget = std::max<std::size_t>(1, opt.attempts_per_atom) * n_atoms;
  std::size_t attempts = 0;
  while (c.positions.size() < n_atoms) {
    if (attempts++ >= budget)
      throw SamplingError("sample_configuration: inserted " + std::to_string(c.positions.size()) +
                          " of " + std::to_string(n_atoms) + " atoms within " +
                          std::to_string(budget) + " attempts");
    const Vec3 x(coord(rng), coord(rng), coord(rng));
    if (sigma2 > 0 && detail::overlaps(c.positions, c.positions.size(), x, box, sigma2))
      continue;
    c.positions.push_back(x);
  }

  if (opt.equilibration_sweeps > 0 && sigma > 0) {
    std::uniform_real_distribution<double> step(-opt.max_step_over_sigma * sigma,
                                                opt.max_step_over_sigma * sigma);
    for (int sweep = 0; sweep < opt.equilibration_sweeps; ++sweep)
      for (std::size_t i = 0; i < c.size(); ++i) {
        const Vec3 trial =
            detail::wrap(c.positions[i] + Vec3(step(rng), step(rng), step(rng)), box);
        if (!detail::overlaps(c.positions, i, trial, box, sigma2))
          c.positions[i] = trial;
      }
  }
  return c;
}

enum class Parity { cosine, sine };

/// f(x) = amplitude * polarization * cos|sin(k.x), normalised so that
/// int_V f.f dV = 2 hbar Omega eps0.
struct Mode {
  Vec3 k = Vec3::Zero();
  Vec3 polarization = Vec3::Zero();
  double Omega = 0.0;
  double amplitude = 0.0;
  Parity parity = Parity::cosine;

  Vec3 operator()(const Vec3& x) const {
    const double phase = k.dot(x);
    return amplitude * (parity == Parity::cosine ? std::cos(phase) : std::sin(phase)) *
           polarization;
  }
};

struct ModeBasis {
  double box_length = 0.0;
  double lambda_min = 0.0;
  std::vector<Mode> modes;

  std::size_t size() const noexcept { return modes.size(); }
};

/// Integer lattice vectors m != 0 with |m| <= radius, one of each +-m pair
/// (first non-zero component positive). Ordered by |m|^2, then
/// lexicographically.
inline std::vector<Eigen::Vector3i> half_space_lattice(double radius) {
  const int m_max = static_cast<int>(std::floor(radius + 1e-9));
  const double r2 = radius * radius * (1.0 + 1e-12);
  std::vector<Eigen::Vector3i> out;
  for (int a = -m_max; a <= m_max; ++a)
    for (int b = -m_max; b <= m_max; ++b)
      for (int c = -m_max; c <= m_max; ++c) {
        const Eigen::Vector3i m(a, b, c);
        if (m.squaredNorm() == 0 || m.squaredNorm() > r2)
          continue;
        const bool leading_positive = a > 0 || (a == 0 && (b > 0 || (b == 0 && c > 0)));
        if (leading_positive)
          out.push_back(m);
      }
  std::stable_sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    return x.squaredNorm() < y.squaredNorm();
  });
  return out;
}

/// Transverse cavity modes of the periodic box with |k| <= 2 pi / lambda_min:
/// two polarizations and both spatial parities per +-k pair.
inline ModeBasis build_mode_basis(double box, double lambda_min,
                                  const PhysicalConstants& pc = codata) {
  if (!(box > 0) || !(lambda_min > 0))
    throw DomainError("build_mode_basis: lengths must be positive");
  if (!(box > lambda_min))
    throw DomainError("build_mode_basis: box length must exceed lambda_min");
  ModeBasis basis;
  basis.box_length = box;
  basis.lambda_min = lambda_min;
  const double volume = box * box * box;
  for (const auto& m : half_space_lattice(box / lambda_min)) {
    const Vec3 k = (2.0 * std::numbers::pi / box) * m.cast<double>();
    const Vec3 khat = k.normalized();
    Eigen::Index axis = 0;
    khat.cwiseAbs().minCoeff(&axis);
    const Vec3 e1 = khat.cross(Vec3::Unit(axis)).normalized();
    const Vec3 e2 = khat.cross(e1).normalized();
    const double Omega = pc.c * k.norm();
    const double amplitude = std::sqrt(4.0 * pc.hbar * Omega * pc.eps0 / volume);
    for (const Vec3& e : {e1, e2})
      for (Parity parity : {Parity::cosine, Parity::sine})
        basis.modes.push_back({k, e, Omega, amplitude, parity});
  }
  if (basis.modes.empty())
    throw DomainError("build_mode_basis: no modes below the cutoff");
  return basis;
}

/// Symmetrized coefficient matrix; atoms occupy rows [0, 3N), modes follow.
struct DynamicalMatrix {
  Eigen::MatrixXd matrix;
  std::size_t atoms = 0;
  std::size_t modes = 0;

  Eigen::Index dimension() const { return matrix.rows(); }
};

struct AssemblyOptions {
  std::size_t max_dimension = 12000;
};

inline DynamicalMatrix assemble_dynamical_matrix(const Configuration& config,
                                                 const ModeBasis& basis,
                                                 const AtomSpecies& species,
                                                 const CutoffProfile& profile,
                                                 const PhysicalConstants& pc = codata,
                                                 const AssemblyOptions& opt = {}) {
  species.validate();
  if (std::abs(config.box_length - basis.box_length) > 1e-12 * config.box_length)
    throw DomainError("assemble_dynamical_matrix: configuration and mode basis boxes differ");
  const std::size_t n = config.size();
  const std::size_t m = basis.size();
  const std::size_t dim = 3 * n + m;
  if (dim > opt.max_dimension)
    throw DomainError("assemble_dynamical_matrix: dimension " + std::to_string(dim) +
                      " exceeds the guard " + std::to_string(opt.max_dimension));

  const double w = species.omega;
  const double d = species.dipole;
  const double contact = 2.0 * d * d * w / (pc.hbar * pc.eps0);
  const double field = d / (pc.hbar * pc.eps0);
  const double box = config.box_length;
  const double touching = 1e-9 * profile.ell();

  DynamicalMatrix out;
  out.atoms = n;
  out.modes = m;
  out.matrix = Eigen::MatrixXd::Zero(dim, dim);
  auto& M = out.matrix;

  for (std::size_t i = 0; i < n; ++i) {
    M.block<3, 3>(3 * i, 3 * i).diagonal().setConstant(w * w);
    for (std::size_t j = i + 1; j < n; ++j) {
      const Vec3 r = minimum_image(config.positions[i] - config.positions[j], box);
      const double dist = r.norm();
      if (!(dist > touching))
        throw DomainError("assemble_dynamical_matrix: atoms " + std::to_string(i) + " and " +
                          std::to_string(j) + " coincide");
      const auto u = kernel_u_components(profile, dist);
      const Mat3 block = contact * isotropic_tensor(r, u.transverse, u.longitudinal);
      M.block<3, 3>(3 * i, 3 * j) = block;
      M.block<3, 3>(3 * j, 3 * i) = block.transpose();
    }
  }

  for (std::size_t nu = 0; nu < m; ++nu) {
    const auto& mode = basis.modes[nu];
    const Eigen::Index row = static_cast<Eigen::Index>(3 * n + nu);
    M(row, row) = mode.Omega * mode.Omega;
    const double g = field * std::sqrt(w * mode.Omega);
    for (std::size_t j = 0; j < n; ++j) {
      const Vec3 f = g * mode(config.positions[j]);
      M.block<3, 1>(3 * j, row) = f;
      M.block<1, 3>(row, 3 * j) = f.transpose();
    }
  }
  return out;
}

inline Eigen::VectorXd eigenvalues(const DynamicalMatrix& dm) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dm.matrix, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw ConvergenceError("symmetric eigensolver did not converge", 0.0);
  return solver.eigenvalues();
}

inline double min_eigenvalue(const DynamicalMatrix& dm) { return eigenvalues(dm)(0); }

struct MicrosimParams {
  double box_over_ell = 8.0;
  double lambda_min_over_ell = 4.0;
  double core_over_ell = 0.25;
  int replicas = 10;
  std::uint64_t master_seed = 1;
  double min_scale_ratio = 4.0; // each of ell/sigma and lambda_min/ell
  int refinement_steps = 8;
  SamplerOptions sampler{};
  AssemblyOptions assembly{};
};

/// Refuses geometries violating sigma << ell << lambda_min by less than the
/// configured factor.
inline void check_scale_separation(const MicrosimParams& p) {
  const auto ratio = [](double x) { return std::to_string(x); };
  if (!(p.replicas > 0))
    throw ConfigError("microsim: replicas must be positive");
  if (!(p.core_over_ell >= 0) || !(p.box_over_ell > 0) || !(p.lambda_min_over_ell > 0))
    throw ConfigError("microsim: length ratios must be positive");
  if (p.core_over_ell > 0 && !(1.0 / p.core_over_ell >= p.min_scale_ratio))
    throw ConfigError("scale separation violated: need sigma << ell << lambda_min, but ell/sigma = " +
                      ratio(1.0 / p.core_over_ell) + " < " + ratio(p.min_scale_ratio));
  if (!(p.lambda_min_over_ell >= p.min_scale_ratio))
    throw ConfigError("scale separation violated: need sigma << ell << lambda_min, but lambda_min/ell = " +
                      ratio(p.lambda_min_over_ell) + " < " + ratio(p.min_scale_ratio));
  if (!(p.box_over_ell > p.lambda_min_over_ell))
    throw ConfigError("microsim: box length L/ell = " + ratio(p.box_over_ell) +
                      " must exceed lambda_min/ell = " + ratio(p.lambda_min_over_ell));
}

/// Minimal eigenvalue statistics at one density.
struct StabilityPoint {
  double density_ratio = 0.0; // n / n_D
  double density = 0.0;       // 1/m^3
  std::size_t atoms = 0;
  double min_eig_mean = 0.0; // rad^2/s^2
  double min_eig_std = 0.0;
  double unstable_fraction = 0.0;
  std::vector<double> min_eigs;
  std::string error; // empty on success
  ExitCode error_code = ExitCode::success;

  bool ok() const noexcept { return error.empty(); }
};

struct ThresholdBracket {
  double lower_ratio = 0.0; // n/n_D, stable side
  double upper_ratio = 0.0; // n/n_D, unstable side
  double estimate() const { return 0.5 * (lower_ratio + upper_ratio); }
};

struct StabilityReport {
  std::vector<StabilityPoint> grid;
  std::vector<StabilityPoint> probes; // bisection refinement points
  std::optional<ThresholdBracket> threshold;
  double dicke_density = 0.0;
  int configs_per_density = 0;
};

/// Geometry of a scan in SI units, derived from the species, the profile and
/// the dimensionless parameters.
struct ScanGeometry {
  AtomSpecies species;
  double box = 0.0;
  double lambda_min = 0.0;
  double dicke_density = 0.0;
};

inline ScanGeometry scan_geometry(const AtomSpecies& species, const CutoffProfile& profile,
                                  const MicrosimParams& p, const PhysicalConstants& pc = codata) {
  ScanGeometry g;
  g.species = species;
  g.species.core_diameter = p.core_over_ell * profile.ell();
  g.box = p.box_over_ell * profile.ell();
  g.lambda_min = p.lambda_min_over_ell * profile.ell();
  g.dicke_density = dicke_density(species, pc);
  return g;
}

namespace detail {

inline StabilityPoint evaluate_density(double ratio, std::uint64_t stream, const ScanGeometry& g,
                                       const ModeBasis& basis, const CutoffProfile& profile,
                                       const MicrosimParams& p, const PhysicalConstants& pc,
                                       unsigned workers) {
  StabilityPoint pt;
  pt.density_ratio = ratio;
  pt.density = ratio * g.dicke_density;
  pt.atoms = atom_count(pt.density, g.box);
  pt.min_eigs.assign(p.replicas, 0.0);
  try {
    parallel_for(p.replicas, workers, [&](std::size_t rep) {
      const auto seed = task_seed(p.master_seed, stream, rep);
      const auto config = sample_configuration(pt.density, g.box, g.species, seed, p.sampler);
      const auto dm = assemble_dynamical_matrix(config, basis, g.species, profile, pc, p.assembly);
      pt.min_eigs[rep] = min_eigenvalue(dm);
    });
  } catch (const SamplingError& e) {
    pt.error = e.what();
    pt.error_code = ExitCode::infeasible_sampling;
  } catch (const ConvergenceError& e) {
    pt.error = e.what();
    pt.error_code = ExitCode::non_convergence;
  } catch (const DomainError& e) {
    pt.error = e.what();
    pt.error_code = ExitCode::config_error;
  }
  if (!pt.ok()) {
    pt.min_eigs.clear();
    pt.min_eig_mean = pt.min_eig_std = pt.unstable_fraction = std::nan("");
    return pt;
  }
  const double n = static_cast<double>(p.replicas);
  pt.min_eig_mean = std::accumulate(pt.min_eigs.begin(), pt.min_eigs.end(), 0.0) / n;
  double var = 0.0;
  for (double x : pt.min_eigs)
    var += (x - pt.min_eig_mean) * (x - pt.min_eig_mean);
  pt.min_eig_std = p.replicas > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  pt.unstable_fraction =
      std::count_if(pt.min_eigs.begin(), pt.min_eigs.end(), [](double x) { return x < 0; }) / n;
  return pt;
}

} // namespace detail

/// Minimal eigenvalue of the dynamical matrix over a grid of n/n_D values,
/// averaged over independent replicas. The threshold is bracketed by the
/// first sign change of the replica mean and refined by bisection.
inline StabilityReport stability_scan(std::vector<double> density_ratios,
                                      const AtomSpecies& species, const CutoffProfile& profile,
                                      const MicrosimParams& p, unsigned workers = 1,
                                      const PhysicalConstants& pc = codata) {
  if (density_ratios.empty())
    throw DomainError("stability_scan: empty density grid");
  for (double r : density_ratios)
    if (!(r > 0) || !std::isfinite(r))
      throw DomainError("stability_scan: density ratios must be positive");
  check_scale_separation(p);
  std::sort(density_ratios.begin(), density_ratios.end());

  const auto g = scan_geometry(species, profile, p, pc);
  const auto basis = build_mode_basis(g.box, g.lambda_min, pc);

  StabilityReport report;
  report.dicke_density = g.dicke_density;
  report.configs_per_density = p.replicas;
  for (std::size_t i = 0; i < density_ratios.size(); ++i)
    report.grid.push_back(
        detail::evaluate_density(density_ratios[i], i, g, basis, profile, p, pc, workers));

  // Points that failed are skipped when looking for the sign change.
  double last_stable = 0.0;
  for (std::size_t i = 0; i < report.grid.size(); ++i) {
    if (!report.grid[i].ok())
      continue;
    if (report.grid[i].min_eig_mean > 0) {
      last_stable = report.grid[i].density_ratio;
      continue;
    }
    ThresholdBracket bracket;
    bracket.upper_ratio = report.grid[i].density_ratio;
    bracket.lower_ratio = last_stable;
    for (int step = 0; step < p.refinement_steps; ++step) {
      const double mid = bracket.estimate();
      const auto probe = detail::evaluate_density(
          mid, density_ratios.size() + static_cast<std::size_t>(step), g, basis, profile, p, pc,
          workers);
      report.probes.push_back(probe);
      if (!probe.ok())
        break;
      (probe.min_eig_mean > 0 ? bracket.lower_ratio : bracket.upper_ratio) = mid;
    }
    report.threshold = bracket;
    break;
  }
  return report;
}

} // namespace depol
