// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "depol/kernels.hpp"
#include "depol/meanfield.hpp"
#include "depol/microsim.hpp"
#include "depol/physcore.hpp"

using namespace depol;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

AtomSpecies rubidium_d1() {
  AtomSpecies s;
  s.name = "Rb-D1";
  s.omega = angular_frequency_from_wavelength(794.98e-9);
  s.dipole = 2.537e-29;
  s.core_diameter = 1e-10;
  return s;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }

Outcome rubidium_density() {
  const double nD = dicke_density(rubidium_d1());
  const double e1 = std::abs(nD / 1.75e27 - 1.0);
  const double e2 = std::abs(3.0 * nD / 5.25e27 - 1.0);
  return {e1 <= 0.03 && e2 <= 0.03,
          fmt("n_D = %.4e /m^3 (dev %.2f%%), 3 n_D = %.4e /m^3 (dev %.2f%%)", nD, 100 * e1,
              3 * nD, 100 * e2)};
}

Outcome shifted_criticality() {
  const auto s = rubidium_d1();
  double worst = 0.0;
  for (double sigma_over_ell : {0.02, 0.01}) {
    const double ell = 5e-9;
    const CutoffProfile p(ProfileShape::gaussian, ell);
    const auto g = RadialDistribution::hard_step(sigma_over_ell * ell);
    const auto c = contact_coupling(g, p);
    const auto nc = critical_density(c);
    if (!nc)
      return {false, fmt("no instability at sigma/ell = %g", sigma_over_ell)};
    worst = std::max(worst, std::abs(*nc - 3.0));
    for (double W : {0.1, 1.0, 10.0, 100.0}) {
      const auto b = critical_density_by_bisection(c, s.omega, W * s.omega);
      if (!b)
        return {false, fmt("bisection found no instability at Omega/omega = %g", W)};
      worst = std::max(worst, std::abs(*b - 3.0));
    }
  }
  return {worst <= 1e-3,
          fmt("max |n_c/n_D - 3| = %.3e over sigma/ell in {0.02, 0.01}, Omega/omega 0.1..100",
              worst)};
}

Outcome bare_dicke() {
  const ContactCoupling none{0.0, 0.0};
  const auto nc = critical_density(none);
  if (!nc)
    return {false, "no instability reported"};
  double worst = std::abs(*nc - 1.0);
  for (double W : {0.1, 1.0, 10.0}) {
    const auto b = critical_density_by_bisection(none, 1.0, W);
    if (!b)
      return {false, "bisection found no instability"};
    worst = std::max(worst, std::abs(*b - 1.0));
  }
  return {worst <= 1e-9, fmt("max |n_c/n_D - 1| = %.3e", worst)};
}

Outcome trace_identity() {
  const double ell = 2e-9;
  double worst = 0.0;
  for (auto shape : {ProfileShape::gaussian, ProfileShape::lorentzian}) {
    const CutoffProfile p(shape, ell);
    const double g0 = Gamma_r(p, 0.0);
    const Vec3 dir = Vec3(0.3, -0.5, 0.81).normalized();
    for (int i = 0; i < 20; ++i) {
      const double r = 8.0 * ell * i / 19.0;
      for (auto route : {KernelRoute::spectral, KernelRoute::real_space}) {
        const auto k = kernel_K(p, r * dir, route);
        worst = std::max(worst, std::abs(k.value.trace() - 2.0 * Gamma_r(p, r)) / g0);
      }
    }
  }
  return {worst <= 1e-6, fmt("max |Tr K - 2 Gamma| / Gamma(0) = %.3e (both routes)", worst)};
}

Outcome branch_roots() {
  using LD = long double;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LD worst_res = 0, worst_agree = 0;
  for (int i = 0; i < 1000; ++i) {
    const LD w = 0.1L + 10.0L * u(rng), W = 0.1L + 10.0L * u(rng);
    const LD n = 6.0L * u(rng);
    const LD vs = (i % 2) ? LD(3.0 * u(rng)) : LD(2) / 3 * n;
    const DispersionInput<LD> in{w, W, n, vs};
    const auto b = branch_frequencies(in);
    worst_res = std::max({worst_res, std::abs(dispersion(b.s2_plus, in)),
                          std::abs(dispersion(b.s2_minus, in))});
    if (i % 2 == 0) {
      const auto c = branch_frequencies_closed_form(in);
      const auto rel = [](LD a, LD b) {
        return std::abs(a - b) / std::max(std::abs(a), std::abs(b) + LD(1e-300));
      };
      // Exact zeros on both routes count as agreement.
      if (b.s2_plus != c.s2_plus)
        worst_agree = std::max(worst_agree, rel(b.s2_plus, c.s2_plus));
      worst_agree = std::max(worst_agree, rel(b.s2_minus, c.s2_minus));
    }
  }

  // Softening along the self-consistent line for hard-step g, sigma/ell = 0.01.
  const CutoffProfile p(ProfileShape::gaussian, 5e-9);
  const auto c = contact_coupling(RadialDistribution::hard_step(5e-11), p);
  bool monotone = true;
  double last = -INFINITY;
  for (int i = 0; i <= 400; ++i) {
    const double n = 6.0 * i / 400.0;
    const double s2 = branch_frequencies(self_consistent_input(1.0, 1.0, n, c)).s2_plus;
    monotone = monotone && s2 > last;
    last = s2;
  }
  const BisectionOptions opt;
  const double nc = critical_density_by_bisection(c, 1.0, 1.0, opt).value_or(NAN);
  const double tol = 2 * opt.relative_tolerance * nc;
  const double below = branch_frequencies(self_consistent_input(1.0, 1.0, nc - tol, c)).s2_plus;
  const double above = branch_frequencies(self_consistent_input(1.0, 1.0, nc + tol, c)).s2_plus;
  const bool crosses = below < 0 && above > 0 &&
                       std::abs(nc - *critical_density(c)) <= tol;
  const bool pass = worst_res <= 1e-10L && worst_agree <= 1e-10L && monotone && crosses;
  return {pass, fmt("max |D| = %.2Le, closed-form rel dev = %.2Le, monotone = %s, "
                    "zero crossing at n/n_D = %.10f (%s)",
                    worst_res, worst_agree, monotone ? "yes" : "no", nc,
                    crosses ? "bracketed" : "not bracketed")};
}

// Independent deficit: 1 - int g Gamma = int_0^sigma 4 pi r^2 Gamma dr by Simpson.
double deficit_oracle(const CutoffProfile& p, double sigma) {
  const int n = 2000;
  const double h = sigma / n;
  const auto f = [&](double r) { return 4.0 * std::acos(-1.0) * r * r * Gamma_r(p, r); };
  double s = f(0) + f(sigma);
  for (int i = 1; i < n; ++i)
    s += (i % 2 ? 4.0 : 2.0) * f(i * h);
  return s * h / 3.0;
}

Outcome overlap_scaling() {
  const double ell = 5e-9;
  const CutoffProfile p(ProfileShape::gaussian, ell);
  std::vector<double> d;
  double oracle_dev = 0.0;
  for (double x : {0.2, 0.1, 0.05}) {
    const double deficit = 1.0 - overlap_integral(RadialDistribution::hard_step(x * ell), p);
    const double ref = deficit_oracle(p, x * ell);
    oracle_dev = std::max(oracle_dev, std::abs(deficit / ref - 1.0));
    d.push_back(deficit);
  }
  const double r1 = d[0] / d[1], r2 = d[1] / d[2];
  const auto within = [](double r) { return r >= 8.0 / 1.5 && r <= 8.0 * 1.5; };
  return {within(r1) && within(r2) && oracle_dev <= 1e-6,
          fmt("deficit ratios %.4f, %.4f (target 8 within x1.5), oracle rel dev %.1e", r1, r2,
              oracle_dev)};
}

Outcome microsim_cross_check() {
  const auto s = rubidium_d1();
  const double nD = dicke_density(s);
  // n_D ell^3 = 1/6 puts N = 256, 364, 500 atoms at 3 n_D for L/ell = 8, 9, 10.
  const double ell = std::cbrt(1.0 / 6.0 / nD);
  const CutoffProfile p(ProfileShape::gaussian, ell);
  const std::vector<double> grid{0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0};
  std::string detail;
  bool pass = true;
  std::vector<double> estimates;
  for (double L : {8.0, 9.0, 10.0}) {
    MicrosimParams mp;
    mp.box_over_ell = L;
    mp.lambda_min_over_ell = 4.0;
    mp.core_over_ell = 0.25;
    mp.replicas = 10;
    mp.master_seed = 20240601;
    const auto rep = stability_scan(grid, s, p, mp, workers());
    bool monotone = true, positive = true, ok = true;
    for (std::size_t i = 0; i < rep.grid.size(); ++i) {
      const auto& pt = rep.grid[i];
      ok = ok && pt.ok();
      if (i > 0)
        monotone = monotone && pt.min_eig_mean < rep.grid[i - 1].min_eig_mean;
      if (pt.density_ratio <= 0.5)
        positive = positive && pt.min_eig_mean > 0;
    }
    const double est = rep.threshold ? rep.threshold->estimate() : NAN;
    const bool close = rep.threshold && std::abs(est / 3.0 - 1.0) <= 0.2;
    estimates.push_back(est);
    pass = pass && ok && monotone && positive && close;
    detail += fmt("L/ell=%g N(3n_D)=%zu: monotone=%s positive<=0.5=%s threshold=%s; ", L,
                  atom_count(3.0 * nD, L * ell), monotone ? "yes" : "no",
                  positive ? "yes" : "no",
                  rep.threshold ? fmt("[%.4f, %.4f] n_D", rep.threshold->lower_ratio,
                                      rep.threshold->upper_ratio).c_str()
                                : "none");
  }
  bool trend = true;
  for (std::size_t i = 1; i < estimates.size(); ++i)
    trend = trend && std::abs(estimates[i] - 3.0) < std::abs(estimates[i - 1] - 3.0);
  pass = pass && trend;
  detail += fmt("trend toward 3 n_D = %s", trend ? "yes" : "no");
  return {pass, detail};
}

int run(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& f) {
  std::ifstream in(f, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
  const auto root = fs::temp_directory_path() / ("depol_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string cli = DEPOL_CLI;
  const std::string conf = std::string(DEPOL_CONFIG_DIR) + "/rb_d1_microsim.conf";
  const std::string args = " microsim --densities 0.1,0.5,2,4 --replicas 3";
  std::string detail;
  bool pass = true;
  const auto a = root / "a", b = root / "b", c = root / "c";
  pass = run(cli + " --config " + conf + " --out " + a.string() + args) == 0 &&
         run(cli + " --config " + conf + " --out " + b.string() + " --workers 1" + args) == 0 &&
         run(cli + " --config " + (a / "resolved_config.txt").string() + " --out " + c.string() +
             " microsim") == 0;
  if (!pass)
    return {false, "a CLI run failed"};
  const auto csv = slurp(a / "microsim.csv");
  const bool same_b = csv == slurp(b / "microsim.csv");
  const bool same_c = csv == slurp(c / "microsim.csv");
  const auto conf_a = slurp(a / "resolved_config.txt");
  const bool manifests = conf_a == slurp(b / "resolved_config.txt");
  fs::remove_all(root);
  return {same_b && same_c && manifests && !csv.empty(),
          fmt("%zu-byte CSV; rerun identical = %s, rerun from resolved config identical = %s",
              csv.size(), same_b ? "yes" : "no", same_c ? "yes" : "no")};
}

} // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"1 rubidium Dicke density", rubidium_density},
      {"2 shifted criticality", shifted_criticality},
      {"3 bare Dicke recovery", bare_dicke},
      {"4 trace identity", trace_identity},
      {"5 branch-root residuals", branch_roots},
      {"6 overlap-integral scaling", overlap_scaling},
      {"7 microsim cross-check", microsim_cross_check},
      {"8 determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), dt);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed ? 1 : 0;
}
