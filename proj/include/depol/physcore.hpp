#pragma once

// Physical constants, atomic species and the Dicke critical density.
// Everything is SI; atomic units appear only in the reporting helpers.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "depol/error.hpp"

namespace depol {

struct PhysicalConstants {
  double hbar = 1.054571817e-34;  // J s
  double eps0 = 8.8541878128e-12; // F/m
  double c = 299792458.0;         // m/s
  double e = 1.602176634e-19;     // C
  double a0 = 5.29177210903e-11;  // m

  void validate() const {
    if (!(hbar > 0 && eps0 > 0 && c > 0 && e > 0 && a0 > 0))
      throw DomainError("physical constants must be strictly positive");
  }
};

inline constexpr PhysicalConstants codata{};

struct AtomSpecies {
  std::string name = "atom";
  double omega = 0.0;         // transition angular frequency, rad/s
  double dipole = 0.0;        // transition dipole, C m
  double core_diameter = 0.0; // hard-core diameter sigma, m

  void validate() const {
    if (!(omega > 0) || !std::isfinite(omega))
      throw DomainError("species '" + name + "': omega must be positive and finite");
    if (!(dipole > 0) || !std::isfinite(dipole))
      throw DomainError("species '" + name + "': dipole must be positive and finite");
    if (!(core_diameter >= 0) || !std::isfinite(core_diameter))
      throw DomainError("species '" + name + "': core_diameter must be non-negative");
  }
};

inline double angular_frequency_from_wavelength(double wavelength,
                                                const PhysicalConstants& k = codata) {
  if (!(wavelength > 0))
    throw DomainError("wavelength must be positive");
  return 2.0 * std::numbers::pi * k.c / wavelength;
}

/// n_D = hbar omega eps0 / (2 d^2), the density at which the bare model's
/// lowest polariton frequency vanishes.
inline double dicke_density(const AtomSpecies& species, const PhysicalConstants& k = codata) {
  species.validate();
  return k.hbar * species.omega * k.eps0 / (2.0 * species.dipole * species.dipole);
}

/// Reporting convention: n^(-1/3), the edge of the cube holding one atom.
inline double mean_interatomic_distance(double density) {
  if (!(density > 0) || !std::isfinite(density))
    throw DomainError("mean_interatomic_distance: density must be positive");
  return std::cbrt(1.0 / density);
}

/// Closed form 1/(64 pi a0^3) for hydrogen. The (omega, d) convention that
/// reduces hbar omega eps0/(2 d^2) to this expression is not fixed, so the
/// figure is reported as-is.
inline double hydrogen_dicke_density(const PhysicalConstants& k = codata) {
  return 1.0 / (64.0 * std::numbers::pi * k.a0 * k.a0 * k.a0);
}

// Atomic-unit reporting helpers.
inline double length_in_bohr(double metres, const PhysicalConstants& k = codata) {
  return metres / k.a0;
}
inline double density_in_bohr_units(double per_m3, const PhysicalConstants& k = codata) {
  return per_m3 * k.a0 * k.a0 * k.a0;
}

/// Warnings for a species paired with a cutoff length: the hard core has to
/// sit well inside the regularization scale.
inline std::vector<std::string> scale_warnings(const AtomSpecies& species, double ell) {
  std::vector<std::string> out;
  if (species.core_diameter > ell)
    out.push_back("core diameter " + std::to_string(species.core_diameter) +
                  " m exceeds cutoff length ell = " + std::to_string(ell) +
                  " m; requires sigma << ell");
  return out;
}

} // namespace depol
