#pragma once

// Regularizing profiles gamma(k) / Gamma(r) and the contact kernels
//
//   K(r) = int d^3k/(2pi)^3 gamma(k)^2 (I - k^k) e^{ik.r}
//        = Gamma(r) I - grad grad (Gamma * G)(r),
//   u(r) = K(r) + grad grad G(r),        G(r) = -1/(4 pi r).
//
// Both kernels are isotropic, so they are fixed by a transverse and a
// longitudinal radial component:  X(r) = X_T I + (X_L - X_T) r^ r^.
// K is evaluated by two independent routes:
//   spectral   : 1D radial quadrature of the Fourier representation,
//   real_space : closed-form enclosed weight M(r) = int_{|x|<r} Gamma dV,
//                giving K_T = Gamma - M/(4 pi r^3), K_L = M/(2 pi r^3).

#include <Eigen/Dense>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

#include "depol/error.hpp"

namespace depol {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class ProfileShape { gaussian, lorentzian };

inline std::string_view to_string(ProfileShape s) {
  return s == ProfileShape::gaussian ? "gaussian" : "lorentzian";
}

inline ProfileShape profile_shape_from_string(std::string_view s) {
  if (s == "gaussian")
    return ProfileShape::gaussian;
  if (s == "lorentzian")
    return ProfileShape::lorentzian;
  throw DomainError("unknown cutoff shape '" + std::string(s) + "' (expected gaussian|lorentzian)");
}

/// gaussian   : gamma = exp(-k^2 l^2 / 2),  Gamma = (4 pi l^2)^(-3/2) exp(-r^2 / 4 l^2)
/// lorentzian : gamma = 1 / (1 + k^2 l^2),  Gamma = exp(-r/l) / (8 pi l^3)
class CutoffProfile {
public:
  CutoffProfile(ProfileShape shape, double ell) : shape_(shape), ell_(ell) {
    if (!(ell > 0) || !std::isfinite(ell))
      throw DomainError("cutoff length ell must be positive and finite");
  }

  ProfileShape shape() const noexcept { return shape_; }
  double ell() const noexcept { return ell_; }

  // Dimensionless forms: x = k l, rho = r / l; densities in units of l^-3.
  double gamma_x(double x) const {
    switch (shape_) {
    case ProfileShape::gaussian:
      return std::exp(-0.5 * x * x);
    case ProfileShape::lorentzian:
      return 1.0 / (1.0 + x * x);
    }
    return 0.0;
  }

  double gamma_squared_x(double x) const {
    const double g = gamma_x(x);
    return g * g;
  }

  double Gamma_rho(double rho) const {
    using std::numbers::pi;
    switch (shape_) {
    case ProfileShape::gaussian:
      return std::pow(4.0 * pi, -1.5) * std::exp(-0.25 * rho * rho);
    case ProfileShape::lorentzian:
      return std::exp(-rho) / (8.0 * pi);
    }
    return 0.0;
  }

  /// 1 - M(r): weight of Gamma outside radius r, without cancellation.
  double tail_weight_rho(double rho) const {
    switch (shape_) {
    case ProfileShape::gaussian:
      return std::erfc(0.5 * rho) + rho / std::sqrt(std::numbers::pi) * std::exp(-0.25 * rho * rho);
    case ProfileShape::lorentzian:
      return std::exp(-rho) * (1.0 + rho + 0.5 * rho * rho);
    }
    return 0.0;
  }

  /// M(r) / (4 pi r^3 / 3): mean of Gamma over the ball of radius r.
  /// Series below rho = 1, where the closed forms cancel.
  double mean_enclosed_rho(double rho) const {
    using std::numbers::pi;
    if (rho >= 1.0)
      return (1.0 - tail_weight_rho(rho)) / (4.0 * pi / 3.0 * rho * rho * rho);
    switch (shape_) {
    case ProfileShape::gaussian: {
      // 3 Gamma(0) sum_n (-rho^2/4)^n / (n! (2n+3))
      const double z = -0.25 * rho * rho;
      double term = 1.0, sum = 0.0;
      for (int n = 0; n < 40; ++n) {
        const double add = term / (2.0 * n + 3.0);
        sum += add;
        if (std::abs(add) < 1e-18 * std::abs(sum))
          break;
        term *= z / (n + 1.0);
      }
      return 3.0 * Gamma_rho(0.0) * sum;
    }
    case ProfileShape::lorentzian: {
      // M = e^-rho sum_{k>=3} rho^k / k!
      double term = 1.0 / 6.0, sum = 0.0;
      for (int k = 3; k < 60; ++k) {
        sum += term;
        if (term < 1e-18 * sum)
          break;
        term *= rho / (k + 1.0);
      }
      return std::exp(-rho) * sum / (4.0 * pi / 3.0);
    }
    }
    return 0.0;
  }

  /// Spectral integrands of the lorentzian decay algebraically; the
  /// gaussian is negligible beyond k l = 40.
  bool has_algebraic_tail() const noexcept { return shape_ == ProfileShape::lorentzian; }

private:
  ProfileShape shape_;
  double ell_;
};

inline double gamma_k(const CutoffProfile& p, double k) {
  if (!(k >= 0))
    throw DomainError("gamma_k: wavenumber must be non-negative");
  return p.gamma_x(k * p.ell());
}

inline double Gamma_r(const CutoffProfile& p, double r) {
  if (!(r >= 0))
    throw DomainError("Gamma_r: radius must be non-negative");
  const double l = p.ell();
  return p.Gamma_rho(r / l) / (l * l * l);
}

struct KernelMatrix {
  Vec3 displacement = Vec3::Zero();
  Mat3 value = Mat3::Zero();
};

/// Radial components of an isotropic kernel, in 1/m^3.
struct RadialPair {
  double transverse = 0.0;
  double longitudinal = 0.0;
  double error_estimate = 0.0;

  double trace() const { return longitudinal + 2.0 * transverse; }
};

/// T I + (L - T) r^ r^, filled entrywise so the result is exactly symmetric.
inline Mat3 isotropic_tensor(const Vec3& r, double transverse, double longitudinal) {
  Mat3 out = transverse * Mat3::Identity();
  const double d = r.norm();
  if (!(d > 0))
    return out;
  const Vec3 n = r / d;
  const double a = longitudinal - transverse;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) {
      const double v = a * (n[i] * n[j]);
      out(i, j) += v;
      if (j != i)
        out(j, i) = out(i, j);
    }
  return out;
}

/// Grad grad G for G = -1/(4 pi r): (I - 3 r^ r^) / (4 pi r^3).
inline Mat3 dipole_tensor(const Vec3& r) {
  const double d = r.norm();
  if (!(d > 0))
    throw DomainError("dipole_tensor: displacement must be non-zero");
  const double inv = 1.0 / (4.0 * std::numbers::pi * d * d * d);
  return isotropic_tensor(r, inv, -2.0 * inv);
}

inline KernelMatrix assemble_isotropic(const Vec3& r, const RadialPair& c) {
  return {r, isotropic_tensor(r, c.transverse, c.longitudinal)};
}

enum class KernelRoute { spectral, real_space };

struct QuadratureOptions {
  double upper_kell = 40.0;  // finite part of the spectral integrals, in units of 1/l
  double tolerance = 1e-10;  // absolute, relative to Gamma(0)
  unsigned max_depth = 18;
};

namespace detail {

// Angular averages of e^{ik.r} weights, y = k r:
//   <e^{ik.r}>                 = j0
//   <(I - k^k^) e^{ik.r}>      = (j0 - j1/y) I + j2 r^r^
// so the transverse weight is j0 - j1/y and the longitudinal one 2 j1/y.
enum class RadialWeight { density, transverse, longitudinal };

inline double j1_over_y(double y) {
  if (std::abs(y) < 0.05) {
    const double y2 = y * y;
    return 1.0 / 3.0 - y2 / 30.0 + y2 * y2 / 840.0 - y2 * y2 * y2 / 45360.0;
  }
  return (std::sin(y) - y * std::cos(y)) / (y * y * y);
}

inline double j0(double y) {
  if (std::abs(y) < 0.05) {
    const double y2 = y * y;
    return 1.0 - y2 / 6.0 + y2 * y2 / 120.0 - y2 * y2 * y2 / 5040.0;
  }
  return std::sin(y) / y;
}

inline double radial_weight(RadialWeight w, double y) {
  switch (w) {
  case RadialWeight::density:
    return j0(y);
  case RadialWeight::transverse:
    return j0(y) - j1_over_y(y);
  case RadialWeight::longitudinal:
    return 2.0 * j1_over_y(y);
  }
  return 0.0;
}

// Asymptotic decomposition weight(y) = S(y) sin y + C(y) cos y.
inline double sin_coefficient(RadialWeight w, double y) {
  switch (w) {
  case RadialWeight::density:
    return 1.0 / y;
  case RadialWeight::transverse:
    return 1.0 / y - 1.0 / (y * y * y);
  case RadialWeight::longitudinal:
    return 2.0 / (y * y * y);
  }
  return 0.0;
}

inline double cos_coefficient(RadialWeight w, double y) {
  switch (w) {
  case RadialWeight::density:
    return 0.0;
  case RadialWeight::transverse:
    return 1.0 / (y * y);
  case RadialWeight::longitudinal:
    return -2.0 / (y * y);
  }
  return 0.0;
}

inline double weight_at_origin(RadialWeight w) {
  return w == RadialWeight::density ? 1.0 : 2.0 / 3.0;
}

struct Integral {
  double value = 0.0;
  double error = 0.0;
};

// Adaptive bisection on an absolute error budget; boost's own recursion
// stops on a relative criterion, which never triggers where the integrand
// has underflowed to round-off.
template <class F>
Integral adaptive_gk(const F& f, double a, double b, double abs_tol, unsigned depth) {
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 0, 0.0,
                                                                                 &err);
  if (err <= abs_tol || depth == 0)
    return {v, err};
  const double mid = 0.5 * (a + b);
  const auto left = adaptive_gk(f, a, mid, 0.5 * abs_tol, depth - 1);
  const auto right = adaptive_gk(f, mid, b, 0.5 * abs_tol, depth - 1);
  return {left.value + right.value, left.error + right.error};
}

// int_0^inf x^2 gamma^2(x) weight(x rho) dx / (2 pi^2), dimensionless.
inline Integral spectral_integral(const CutoffProfile& p, RadialWeight w, double rho,
                                  const QuadratureOptions& opt) {
  using std::numbers::pi;

  const auto integrand = [&](double x) {
    return x * x * p.gamma_squared_x(x) * radial_weight(w, x * rho);
  };

  Integral out;
  const double upper = opt.upper_kell;
  // Panels of half an oscillation period keep each rule non-oscillatory.
  const int panels = std::max(1, static_cast<int>(std::ceil(upper * rho / pi)));
  const double width = upper / panels;
  const double budget = 1e-3 * opt.tolerance * p.Gamma_rho(0.0) * 2.0 * pi * pi;
  for (int i = 0; i < panels; ++i) {
    const auto piece =
        adaptive_gk(integrand, i * width, (i + 1) * width, budget / panels, opt.max_depth);
    out.value += piece.value;
    out.error += piece.error;
  }

  if (p.has_algebraic_tail()) {
    const auto h = [&](double x) { return x * x * p.gamma_squared_x(x); };
    if (rho == 0.0) {
      boost::math::quadrature::exp_sinh<double> es;
      double err = 0.0;
      out.value += weight_at_origin(w) *
                   es.integrate([&](double x) { return h(x); }, upper,
                                std::numeric_limits<double>::infinity(), 1e-12, &err);
      out.error += err;
    } else {
      // x = upper + t:  sin(rho x) = sin(rho U) cos(rho t) + cos(rho U) sin(rho t)
      //                 cos(rho x) = cos(rho U) cos(rho t) - sin(rho U) sin(rho t)
      // Fresh integrators each call: they cache refinement levels, and a
      // shared cache would make results depend on call history.
      boost::math::quadrature::ooura_fourier_sin<double> fsin(1e-11);
      boost::math::quadrature::ooura_fourier_cos<double> fcos(1e-11);
      const double su = std::sin(rho * upper), cu = std::cos(rho * upper);
      const auto fs = [&](double t) {
        const double x = upper + t;
        return h(x) * sin_coefficient(w, x * rho);
      };
      const auto fc = [&](double t) {
        const double x = upper + t;
        return h(x) * cos_coefficient(w, x * rho);
      };
      const auto [vc, ec] =
          fcos.integrate([&](double t) { return fs(t) * su + fc(t) * cu; }, rho);
      const auto [vs, est] =
          fsin.integrate([&](double t) { return fs(t) * cu - fc(t) * su; }, rho);
      out.value += vc + vs;
      out.error += std::abs(ec * vc) + std::abs(est * vs);
    }
  }

  out.value /= 2.0 * pi * pi;
  out.error /= 2.0 * pi * pi;
  return out;
}

inline void check_convergence(const CutoffProfile& p, double err, const QuadratureOptions& opt,
                              const char* what) {
  if (!(err <= opt.tolerance * p.Gamma_rho(0.0)))
    throw ConvergenceError(std::string(what) + ": spectral quadrature did not converge", err);
}

} // namespace detail

/// Gamma(r) recomputed from its Fourier representation (cross-check of the
/// closed form).
inline double Gamma_r_spectral(const CutoffProfile& p, double r,
                               const QuadratureOptions& opt = {}) {
  if (!(r >= 0))
    throw DomainError("Gamma_r_spectral: radius must be non-negative");
  const double l = p.ell();
  const auto v = detail::spectral_integral(p, detail::RadialWeight::density, r / l, opt);
  detail::check_convergence(p, v.error, opt, "Gamma_r_spectral");
  return v.value / (l * l * l);
}

/// Transverse/longitudinal components of K at distance r (1/m^3).
inline RadialPair kernel_K_components(const CutoffProfile& p, double r,
                                      KernelRoute route = KernelRoute::real_space,
                                      const QuadratureOptions& opt = {}) {
  if (!(r >= 0))
    throw DomainError("kernel_K: |r| must be non-negative");
  const double l = p.ell();
  const double l3 = l * l * l;
  const double rho = r / l;
  RadialPair out;
  if (route == KernelRoute::spectral) {
    const auto t = detail::spectral_integral(p, detail::RadialWeight::transverse, rho, opt);
    const auto lo = detail::spectral_integral(p, detail::RadialWeight::longitudinal, rho, opt);
    detail::check_convergence(p, t.error + lo.error, opt, "kernel_K");
    out.transverse = t.value / l3;
    out.longitudinal = lo.value / l3;
    out.error_estimate = (t.error + lo.error) / l3;
  } else {
    const double m = p.mean_enclosed_rho(rho);
    out.transverse = (p.Gamma_rho(rho) - m / 3.0) / l3;
    out.longitudinal = (2.0 * m / 3.0) / l3;
  }
  return out;
}

/// K(r), finite everywhere including r = 0, where it equals (2/3) Gamma(0) I.
inline KernelMatrix kernel_K(const CutoffProfile& p, const Vec3& r,
                             KernelRoute route = KernelRoute::real_space,
                             const QuadratureOptions& opt = {}) {
  return assemble_isotropic(r, kernel_K_components(p, r.norm(), route, opt));
}

/// Components of u = K + grad grad G. The contact delta at r = 0 is not a
/// function value, so r must be positive.
inline RadialPair kernel_u_components(const CutoffProfile& p, double r,
                                      KernelRoute route = KernelRoute::real_space,
                                      const QuadratureOptions& opt = {}) {
  if (!(r > 0))
    throw DomainError("kernel_u: |r| must be positive (contact term is distributional)");
  const double l = p.ell();
  const double l3 = l * l * l;
  const double rho = r / l;
  if (route == KernelRoute::spectral) {
    RadialPair k = kernel_K_components(p, r, route, opt);
    const double inv = 1.0 / (4.0 * std::numbers::pi * r * r * r);
    k.transverse += inv;
    k.longitudinal -= 2.0 * inv;
    return k;
  }
  // Rewritten with the tail weight 1 - M so the far field does not cancel.
  const double tail = p.tail_weight_rho(rho) / (4.0 * std::numbers::pi * rho * rho * rho);
  RadialPair out;
  out.transverse = (p.Gamma_rho(rho) + tail) / l3;
  out.longitudinal = (-2.0 * tail) / l3;
  return out;
}

inline KernelMatrix kernel_u(const CutoffProfile& p, const Vec3& r,
                             KernelRoute route = KernelRoute::real_space,
                             const QuadratureOptions& opt = {}) {
  return assemble_isotropic(r, kernel_u_components(p, r.norm(), route, opt));
}

/// Real part of the Fourier-space integrand of K at wavevector k and
/// displacement r: gamma^2(k) (I - k^k^) cos(k.r) / (2 pi)^3.
inline Mat3 spectral_integrand(const CutoffProfile& p, const Vec3& k, const Vec3& r) {
  const double kk = k.squaredNorm();
  if (!(kk > 0))
    throw DomainError("spectral_integrand: wavevector must be non-zero");
  const Mat3 projector = Mat3::Identity() - (k * k.transpose()) / kk;
  const double g = gamma_k(p, std::sqrt(kk));
  return g * g * std::cos(k.dot(r)) / std::pow(2.0 * std::numbers::pi, 3) * projector;
}

} // namespace depol
