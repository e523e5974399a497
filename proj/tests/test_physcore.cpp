#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "depol/physcore.hpp"

using namespace depol;

namespace {

AtomSpecies rubidium_d1() {
  AtomSpecies s;
  s.name = "Rb-D1";
  s.omega = angular_frequency_from_wavelength(794.98e-9);
  s.dipole = 2.537e-29;
  s.core_diameter = 1e-10;
  return s;
}

} // namespace

TEST(DickeDensity, RubidiumD1MatchesQuotedValue) {
  const double nD = dicke_density(rubidium_d1());
  EXPECT_NEAR(nD / 1.75e27, 1.0, 0.03);
  EXPECT_NEAR(3.0 * nD / 5.25e27, 1.0, 0.03);
}

TEST(DickeDensity, ClosedFormArithmetic) {
  const auto s = rubidium_d1();
  // Worked by hand: hbar * (2 pi c / lambda) * eps0 / (2 d^2).
  const double w = 2.0 * 3.141592653589793 * 299792458.0 / 794.98e-9;
  const double expected = 1.054571817e-34 * w * 8.8541878128e-12 / (2.0 * 2.537e-29 * 2.537e-29);
  EXPECT_NEAR(dicke_density(s) / expected, 1.0, 1e-14);
}

TEST(DickeDensity, DoublingDipoleQuarters) {
  auto s = rubidium_d1();
  const double n1 = dicke_density(s);
  s.dipole *= 2.0;
  EXPECT_EQ(dicke_density(s), n1 / 4.0);
}

TEST(DickeDensity, DoublingFrequencyDoubles) {
  auto s = rubidium_d1();
  const double n1 = dicke_density(s);
  s.omega *= 2.0;
  EXPECT_EQ(dicke_density(s), 2.0 * n1);
}

TEST(DickeDensity, Homogeneity) {
  for (double lambda : {0.3, 1.7, 3.0, 11.0}) {
    auto a = rubidium_d1();
    auto b = a;
    b.omega *= lambda;
    EXPECT_NEAR(dicke_density(b) / (lambda * dicke_density(a)), 1.0, 1e-15);
    b = a;
    b.dipole *= lambda;
    EXPECT_NEAR(dicke_density(b) * lambda * lambda / dicke_density(a), 1.0, 1e-15);
  }
}

TEST(DickeDensity, InvalidSpeciesRejected) {
  auto s = rubidium_d1();
  s.dipole = 0.0;
  EXPECT_THROW(dicke_density(s), DomainError);
  s = rubidium_d1();
  s.omega = -1.0;
  EXPECT_THROW(dicke_density(s), DomainError);
  s = rubidium_d1();
  s.core_diameter = -1e-10;
  EXPECT_THROW(s.validate(), DomainError);
  s.core_diameter = 0.0;
  EXPECT_NO_THROW(s.validate());
}

TEST(MeanInteratomicDistance, ExactCubeRoot) {
  EXPECT_NEAR(mean_interatomic_distance(1e27), 1e-9, 1e-24);
}

TEST(MeanInteratomicDistance, AtQuotedCriticalDensity) {
  const double d = mean_interatomic_distance(5.25e27);
  EXPECT_NEAR(d, 5.75e-10, 0.005e-10);
  EXPECT_NEAR(d, std::pow(5.25e27, -1.0 / 3.0), 1e-24);
}

TEST(MeanInteratomicDistance, EightfoldDensityHalvesDistance) {
  for (double n0 : {1e20, 3.3e26, 7e28})
    EXPECT_NEAR(mean_interatomic_distance(8.0 * n0) / mean_interatomic_distance(n0), 0.5, 1e-15);
}

TEST(MeanInteratomicDistance, NonPositiveDensityRejected) {
  EXPECT_THROW(mean_interatomic_distance(0.0), DomainError);
  EXPECT_THROW(mean_interatomic_distance(-1.0), DomainError);
}

TEST(MeanInteratomicDistance, DecreasesWithDipole) {
  auto s = rubidium_d1();
  double last = mean_interatomic_distance(dicke_density(s));
  for (int i = 0; i < 5; ++i) {
    s.dipole *= 1.3;
    const double d = mean_interatomic_distance(dicke_density(s));
    EXPECT_GT(d, 0.0);
    EXPECT_GT(d, last);
    last = d;
  }
}

TEST(HydrogenDickeDensity, ClosedForm) {
  PhysicalConstants k;
  k.a0 = 0.52918e-10;
  const double expected = 1.0 / (64.0 * std::numbers::pi * std::pow(0.52918e-10, 3));
  EXPECT_NEAR(hydrogen_dicke_density(k) / expected, 1.0, 1e-14);
  EXPECT_NEAR(hydrogen_dicke_density(k), 3.36e28, 0.005e28);
}

TEST(HydrogenDickeDensity, CubicScaling) {
  PhysicalConstants k;
  const double n1 = hydrogen_dicke_density(k);
  k.a0 *= 2.0;
  EXPECT_EQ(hydrogen_dicke_density(k), n1 / 8.0);
  for (double a0 : {1e-15, 1e-10, 1.0}) {
    k.a0 = a0;
    const double n = hydrogen_dicke_density(k);
    EXPECT_TRUE(std::isfinite(n) && n > 0);
  }
}

TEST(Units, BohrHelpers) {
  EXPECT_NEAR(length_in_bohr(codata.a0), 1.0, 1e-15);
  EXPECT_NEAR(density_in_bohr_units(hydrogen_dicke_density()), 1.0 / (64.0 * std::numbers::pi),
              1e-15);
}

TEST(Constants, Valid) {
  EXPECT_NO_THROW(codata.validate());
  PhysicalConstants k;
  k.eps0 = 0.0;
  EXPECT_THROW(k.validate(), DomainError);
}

TEST(ScaleWarnings, CoreLargerThanCutoff) {
  auto s = rubidium_d1();
  EXPECT_TRUE(scale_warnings(s, 1e-9).empty());
  EXPECT_EQ(scale_warnings(s, 0.5e-10).size(), 1u);
}
