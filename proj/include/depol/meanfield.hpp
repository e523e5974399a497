#pragma once

// Mean-field polariton analysis of the dense gas.
//
// The contact interaction enters as a frequency shift
//   varsigma = (n/n_D) (2/3 J + 1/3 g(0)),    J = int g(r) Gamma(r) dV,
// and each field mode nu couples to the cell polarization through
//   D(s) = 1 - (n/n_D) W^2 w^2 / ([s^2 + W^2][s^2 + w^2 (1 + varsigma)]).
// Zeros of D in y = s^2 solve
//   y^2 + y [w^2 (1+varsigma) + W^2] + W^2 w^2 [(1+varsigma) - n/n_D] = 0.
// The discriminant equals (w^2(1+varsigma) - W^2)^2 + 4 W^2 w^2 n/n_D >= 0,
// so both branches are real for every admissible input.

#include <algorithm>
#include <cmath>
#include <complex>
#include <concepts>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "depol/error.hpp"
#include "depol/kernels.hpp"

namespace depol {

enum class RdfModel { ideal, hard_step, tabulated };

inline std::string_view to_string(RdfModel m) {
  switch (m) {
  case RdfModel::ideal:
    return "ideal";
  case RdfModel::hard_step:
    return "hard_step";
  case RdfModel::tabulated:
    return "tabulated";
  }
  return "?";
}

inline RdfModel rdf_model_from_string(std::string_view s) {
  if (s == "ideal")
    return RdfModel::ideal;
  if (s == "hard_step")
    return RdfModel::hard_step;
  if (s == "tabulated")
    return RdfModel::tabulated;
  throw DomainError("unknown rdf model '" + std::string(s) + "' (expected ideal|hard_step|tabulated)");
}

/// Radial distribution function of the atomic centres.
class RadialDistribution {
public:
  static RadialDistribution ideal() { return RadialDistribution(RdfModel::ideal, 0.0, {}); }

  static RadialDistribution hard_step(double core_diameter) {
    if (!(core_diameter >= 0) || !std::isfinite(core_diameter))
      throw DomainError("hard_step rdf: core diameter must be non-negative");
    return RadialDistribution(RdfModel::hard_step, core_diameter, {});
  }

  /// (r, g) samples, r strictly increasing. Linear interpolation inside,
  /// first value below the first sample, exactly 1 past the last one.
  static RadialDistribution tabulated(std::vector<std::pair<double, double>> table) {
    if (table.size() < 2)
      throw DomainError("tabulated rdf: need at least two samples");
    for (std::size_t i = 0; i < table.size(); ++i) {
      const auto [r, g] = table[i];
      if (!(r >= 0) || !std::isfinite(r))
        throw DomainError("tabulated rdf: radii must be non-negative");
      if (!(g >= 0) || !std::isfinite(g))
        throw DomainError("tabulated rdf: g(r) must be non-negative");
      if (i > 0 && !(r > table[i - 1].first))
        throw DomainError("tabulated rdf: radii must be strictly increasing");
    }
    if (std::abs(table.back().second - 1.0) > 1e-3)
      throw DomainError("tabulated rdf: g(r) must tend to 1; last sample g = " +
                        std::to_string(table.back().second) + " is not within 1e-3 of 1");
    return RadialDistribution(RdfModel::tabulated, 0.0, std::move(table));
  }

  RdfModel model() const noexcept { return model_; }
  double core_diameter() const noexcept { return core_; }
  const std::vector<std::pair<double, double>>& table() const noexcept { return table_; }

  double operator()(double r) const {
    switch (model_) {
    case RdfModel::ideal:
      return 1.0;
    case RdfModel::hard_step:
      return r < core_ ? 0.0 : 1.0;
    case RdfModel::tabulated: {
      if (r <= table_.front().first)
        return table_.front().second;
      if (r >= table_.back().first)
        return 1.0;
      const auto it = std::upper_bound(table_.begin(), table_.end(), r,
                                       [](double x, const auto& e) { return x < e.first; });
      const auto& [r1, g1] = *it;
      const auto& [r0, g0] = *(it - 1);
      return g0 + (g1 - g0) * (r - r0) / (r1 - r0);
    }
    }
    return 1.0;
  }

  double at_origin() const { return (*this)(0.0); }

  /// Radii where g is not smooth; quadrature panels break there.
  std::vector<double> breakpoints() const {
    std::vector<double> out;
    if (model_ == RdfModel::hard_step && core_ > 0)
      out.push_back(core_);
    if (model_ == RdfModel::tabulated)
      for (const auto& [r, g] : table_)
        if (r > 0)
          out.push_back(r);
    return out;
  }

private:
  RadialDistribution(RdfModel m, double core, std::vector<std::pair<double, double>> t)
      : model_(m), core_(core), table_(std::move(t)) {}

  RdfModel model_;
  double core_;
  std::vector<std::pair<double, double>> table_;
};

inline std::vector<std::string> rdf_scale_warnings(const RadialDistribution& g,
                                                   const CutoffProfile& p) {
  std::vector<std::string> out;
  const double sigma = g.model() == RdfModel::hard_step ? g.core_diameter() : 0.0;
  if (sigma > 0.25 * p.ell())
    out.push_back("hard core sigma/ell = " + std::to_string(sigma / p.ell()) +
                  " is not small; int g Gamma dV departs from 1 beyond O(sigma/ell)");
  return out;
}

/// J = int g(r) Gamma(r) dV by radial quadrature.
inline double overlap_integral(const RadialDistribution& g, const CutoffProfile& p) {
  using std::numbers::pi;
  const double l = p.ell();
  const auto integrand = [&](double rho) {
    return 4.0 * pi * rho * rho * g(rho * l) * p.Gamma_rho(rho);
  };

  std::vector<double> edges{0.0};
  for (double b : g.breakpoints())
    edges.push_back(b / l);
  // Hard step: nothing inside the core.
  std::size_t first = 0;
  if (g.model() == RdfModel::hard_step && g.core_diameter() > 0)
    first = 1;

  double value = 0.0, error = 0.0;
  for (std::size_t i = first; i + 1 < edges.size(); ++i) {
    const auto piece = detail::adaptive_gk(integrand, edges[i], edges[i + 1], 1e-15, 30);
    value += piece.value;
    error += piece.error;
  }
  // Beyond the last breakpoint g is smooth; split once at 1 so exp_sinh
  // sees a decaying integrand.
  double a = edges.back();
  if (a < 1.0) {
    const auto piece = detail::adaptive_gk(integrand, a, 1.0, 1e-15, 30);
    value += piece.value;
    error += piece.error;
    a = 1.0;
  }
  boost::math::quadrature::exp_sinh<double> es;
  double tail_err = 0.0;
  value += es.integrate(integrand, a, std::numeric_limits<double>::infinity(), 1e-14, &tail_err);
  error += tail_err;
  if (!(error < 1e-10))
    throw ConvergenceError("overlap_integral: quadrature did not converge", error);
  return value;
}

/// The two numbers through which the pair structure enters the mean field.
struct ContactCoupling {
  double overlap = 1.0;     // J = int g Gamma dV
  double g_at_origin = 0.0; // g(0), weight of the contact delta

  double shift_per_density() const { return 2.0 * overlap / 3.0 + g_at_origin / 3.0; }
};

inline ContactCoupling contact_coupling(const RadialDistribution& g, const CutoffProfile& p) {
  return {overlap_integral(g, p), g.at_origin()};
}

/// varsigma for density ratio n/n_D.
inline double depolarization_shift(double density_ratio, const ContactCoupling& c) {
  if (!(density_ratio >= 0) || !std::isfinite(density_ratio))
    throw DomainError("depolarization_shift: density ratio must be non-negative");
  return density_ratio * c.shift_per_density();
}

inline double depolarization_shift(double density_ratio, const RadialDistribution& g,
                                   const CutoffProfile& p) {
  return depolarization_shift(density_ratio, contact_coupling(g, p));
}

template <std::floating_point Real = double>
struct DispersionInput {
  Real omega{};         // atomic frequency, rad/s
  Real Omega{};         // mode frequency, rad/s
  Real density_ratio{}; // n / n_D
  Real varsigma{};      // depolarization shift

  void validate() const {
    if (!(omega > 0) || !std::isfinite(omega))
      throw DomainError("dispersion input: omega must be positive");
    if (!(Omega > 0) || !std::isfinite(Omega))
      throw DomainError("dispersion input: Omega must be positive");
    if (!(density_ratio >= 0) || !std::isfinite(density_ratio))
      throw DomainError("dispersion input: density ratio must be non-negative");
    if (!(varsigma >= 0) || !std::isfinite(varsigma))
      throw DomainError("dispersion input: varsigma must be non-negative");
  }
};

/// Input with the shift set self-consistently from the contact coupling.
template <std::floating_point Real = double>
DispersionInput<Real> self_consistent_input(Real omega, Real Omega, Real density_ratio,
                                            const ContactCoupling& c) {
  return {omega, Omega, density_ratio,
          density_ratio * static_cast<Real>(c.shift_per_density())};
}

template <std::floating_point Real = double>
struct BranchPair {
  Real s2_plus{};  // rad^2/s^2, upper root in y = s^2 (the softening branch)
  Real s2_minus{}; // rad^2/s^2
  bool stable = true;

  /// Both roots divided by omega * Omega.
  std::pair<Real, Real> in_units_of(Real omega, Real Omega) const {
    const Real scale = omega * Omega;
    return {s2_plus / scale, s2_minus / scale};
  }
};

template <std::floating_point Real = double>
std::complex<Real> dispersion(std::complex<Real> s2, const DispersionInput<Real>& in) {
  in.validate();
  const Real W2 = in.Omega * in.Omega;
  const Real w2 = in.omega * in.omega * (1 + in.varsigma);
  const std::complex<Real> field = s2 + W2;
  const std::complex<Real> atom = s2 + w2;
  const Real eps = 8 * std::numeric_limits<Real>::epsilon();
  if (std::abs(field) <= eps * W2 || std::abs(atom) <= eps * w2)
    throw DomainError("dispersion: s^2 sits on a pole of D");
  return Real(1) - in.density_ratio * W2 * (in.omega * in.omega) / (field * atom);
}

template <std::floating_point Real = double>
Real dispersion(Real s2, const DispersionInput<Real>& in) {
  return dispersion(std::complex<Real>(s2, 0), in).real();
}

/// Roots of the quadratic in s^2. The lower root comes from the formula
/// without cancellation, the upper one from Vieta, so the upper root is
/// exactly zero when (1 + varsigma) equals n/n_D.
template <std::floating_point Real = double>
BranchPair<Real> branch_frequencies(const DispersionInput<Real>& in) {
  in.validate();
  const Real W2 = in.Omega * in.Omega;
  const Real w2 = in.omega * in.omega;
  const Real a = W2;
  const Real b = w2 * (1 + in.varsigma);
  const Real half_gap = (b - a) / 2;
  const Real coupling = in.density_ratio * W2 * w2;
  const Real root = std::sqrt(half_gap * half_gap + coupling);
  const Real lower = -(a + b) / 2 - root;
  const Real constant = W2 * w2 * ((1 + in.varsigma) - in.density_ratio);
  BranchPair<Real> out;
  out.s2_minus = lower;
  out.s2_plus = constant / lower;
  out.stable = out.s2_plus <= 0;
  return out;
}

/// s^2 / (w W) = -S +- sqrt(S^2 + n/(3 n_D) - 1) with
/// S = [w^2 (1+varsigma) + W^2] / (2 w W). The constant n/(3 n_D) - 1 assumes
/// varsigma = (2/3) n/n_D; only the explicit quadratic handles general J.
template <std::floating_point Real = double>
BranchPair<Real> branch_frequencies_closed_form(const DispersionInput<Real>& in) {
  in.validate();
  const Real scale = in.omega * in.Omega;
  const Real S = (in.omega * in.omega * (1 + in.varsigma) + in.Omega * in.Omega) / (2 * scale);
  const Real c = in.density_ratio / 3 - 1;
  const Real lower = -S - std::sqrt(S * S + c);
  BranchPair<Real> out;
  out.s2_minus = lower * scale;
  // -S + sqrt(S^2 + c), rationalised
  out.s2_plus = (-c / lower) * scale;
  out.stable = out.s2_plus <= 0;
  return out;
}

/// n_c / n_D solving n/n_D = 1 + varsigma(n), i.e. 1 / (1 - 2J/3 - g(0)/3).
/// Empty when the shift grows at least as fast as the density, in which
/// case no density destabilises the system.
inline std::optional<double> critical_density(const ContactCoupling& c) {
  const double denom = 1.0 - c.shift_per_density();
  // J carries quadrature error near 1e-10, so smaller margins are not
  // distinguishable from zero.
  if (!(denom > 1e-9))
    return std::nullopt;
  return 1.0 / denom;
}

inline std::optional<double> critical_density(const RadialDistribution& g,
                                              const CutoffProfile& p) {
  return critical_density(contact_coupling(g, p));
}

inline constexpr std::string_view no_instability_message =
    "no instability at any density within model validity";

struct BisectionOptions {
  double relative_tolerance = 1e-9;
  int max_iterations = 200;
  double search_limit = 1e9; // largest n/n_D probed while bracketing
};

/// Independent route to n_c: bisection on the sign of the softening branch
/// s^2_+ along the self-consistent line varsigma = (n/n_D) c.
template <std::floating_point Real = double>
std::optional<Real> critical_density_by_bisection(const ContactCoupling& c, Real omega,
                                                  Real Omega, const BisectionOptions& opt = {}) {
  const auto unstable = [&](Real ratio) {
    return !branch_frequencies(self_consistent_input<Real>(omega, Omega, ratio, c)).stable;
  };
  Real lo = 0, hi = 1;
  int iterations = 0;
  while (!unstable(hi)) {
    lo = hi;
    hi *= 2;
    if (hi > opt.search_limit)
      return std::nullopt;
    if (++iterations > opt.max_iterations)
      throw ConvergenceError("critical_density_by_bisection: bracketing failed",
                             static_cast<double>(hi));
  }
  for (int i = 0; i < opt.max_iterations; ++i) {
    if (hi - lo <= static_cast<Real>(opt.relative_tolerance) * hi)
      return (lo + hi) / 2;
    const Real mid = (lo + hi) / 2;
    (unstable(mid) ? hi : lo) = mid;
  }
  throw ConvergenceError("critical_density_by_bisection: iteration budget exhausted",
                         static_cast<double>((hi - lo) / hi));
}

} // namespace depol
