#include "momalign/correlation_stats.hpp"
#include "momalign/errors.hpp"
#include "momalign/pair_amplitude.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace momalign;

namespace {

PairAmplitudeField default_field(double deltaP0 = 0.05) {
  return PairAmplitudeField(make_spectrum(deltaP0, 1.0), make_kinematics(1.0, 1.0, 1.0));
}

Vec3 on_sphere(std::mt19937_64& gen) {
  std::normal_distribution<double> n;
  return Vec3(n(gen), n(gen), n(gen)).normalized();
}

}  // namespace

TEST_CASE("state has unit norm and keeps it") {
  const PairAmplitudeField f = default_field();
  const double n500 = norm_on_shells(f, 500.0, {}, 2);
  const double n1000 = norm_on_shells(f, 1000.0, {}, 2);
  const double n2000 = norm_on_shells(f, 2000.0, {}, 2);
  CHECK(n1000 > 0.0);
  CHECK(n1000 == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(n500 / n1000 == doctest::Approx(1.0).epsilon(0.01));
  CHECK(n2000 / n1000 == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("norm of unequal masses and broad spectrum") {
  const PairAmplitudeField f(make_spectrum(0.3, 1.5, 0.2), make_kinematics(0.6, 1.7, 1.5));
  CHECK(norm_on_shells(f, 40.0, {}, 1) == doctest::Approx(1.0).epsilon(2e-3));
}

TEST_CASE("zero spectrum") {
  const PairAmplitudeField f(make_spectrum(0.05, 1.0, 0.0, 0.0), make_kinematics(1, 1, 1));
  CHECK(norm_on_shells(f, 1000.0, {}, 1) == 0.0);
  const QuadratureResult q = evaluate_amplitude(f, Vec3(1000, 0, 0), Vec3(-1000, 0, 0), 1000.0);
  CHECK(q.value == Complex(0.0, 0.0));
}

TEST_CASE("norm box must cover the shells") {
  const PairAmplitudeField f = default_field();
  TableOptions o;
  o.rhoHi = 1990.0;
  CHECK_THROWS_AS(norm_on_shells(f, 1000.0, o, 1), DomainError);
  o = {};
  o.rwHi = 10.0;
  CHECK_THROWS_AS(norm_on_shells(f, 1000.0, o, 1), DomainError);
}

TEST_CASE("reduction agrees with the six-dimensional oracle") {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 5; ++i) {
    const double m1 = 0.5 + 1.5 * u(gen);
    const double m2 = 0.5 + 1.5 * u(gen);
    const double dp = 0.1 + 0.2 * u(gen);
    const double t = 10.0 + 30.0 * u(gen);
    const PairKinematics kin = make_kinematics(m1, m2, 1.0);
    const PairAmplitudeField f(make_spectrum(dp, 1.0), kin);
    const Vec3 n1 = on_sphere(gen);
    const Vec3 n2 = (-n1 + 0.3 * on_sphere(gen)).normalized();
    const Vec3 r1 = kin.v1 * t * (0.9 + 0.2 * u(gen)) * n1;
    const Vec3 r2 = kin.v2 * t * (0.9 + 0.2 * u(gen)) * n2;
    const QuadratureResult q = evaluate_amplitude(f, r1, r2, t);
    MCOracleSpec spec;
    spec.sampleCount = 200000;
    spec.seed = 50 + i;
    const MCResult mc = mc_oracle_6d(f.six_d_integrand(), spec, r1, r2, t, 2);
    CAPTURE(i);
    CAPTURE(q.value);
    CAPTURE(mc.value);
    CHECK(std::abs(q.value - mc.value) <= 3.0 * std::hypot(mc.stdErr(), q.error));
    // The comparison is only meaningful if the amplitude is resolved by the oracle.
    CHECK(std::abs(mc.value) > 3.0 * mc.stdErr());
  }
}

TEST_CASE("all phases one: oracle equals the integral of the spectrum") {
  const PairAmplitudeField f(make_spectrum(0.2, 1.0), make_kinematics(1.0, 2.0, 1.0));
  QuadratureResult total = integrate_reduced_2d(f.reduced_integrand(), f.spec(), {0.0, 0.0, 0.0});
  total.value *= 16.0 * kPi * kPi;
  MCOracleSpec spec;
  spec.sampleCount = 200000;
  const MCResult mc = mc_oracle_6d(f.six_d_integrand(), spec, Vec3::Zero(), Vec3::Zero(), 0.0, 1);
  CHECK(std::abs(mc.value.real() - total.value.real()) <= 3.0 * mc.stdErrRe);
  CHECK(std::abs(mc.value.imag()) <= 1e-12 * std::abs(mc.value.real()));
  CHECK(std::abs(total.value.imag()) == 0.0);
}

TEST_CASE("amplitude depends only on the reduced lengths") {
  const PairAmplitudeField f(make_spectrum(0.2, 1.0), make_kinematics(1.0, 1.0, 1.0));
  std::mt19937_64 gen(8);
  for (int i = 0; i < 5; ++i) {
    const Vec3 r1 = 20.0 * on_sphere(gen);
    const Vec3 r2 = -19.0 * on_sphere(gen);
    Eigen::Quaterniond q(Eigen::AngleAxisd(0.3 + i, on_sphere(gen)));
    const Complex a = evaluate_amplitude(f, r1, r2, 20.0).value;
    const Complex b = evaluate_amplitude(f, q * r1, q * r2, 20.0).value;
    const Complex c = evaluate_amplitude(f, r2, r1, 20.0).value;
    CHECK(std::abs(a - b) <= 1e-10 * std::abs(a));
    CHECK(std::abs(a - c) <= 1e-10 * std::abs(a));
  }
}

TEST_CASE("anti-aligned amplitude dominates the orthogonal one") {
  const PairAmplitudeField f = default_field();
  const double anti = std::abs(evaluate_amplitude(f, Vec3(1000, 0, 0), Vec3(-1000, 0, 0), 1000.0).value);
  const double orth = std::abs(evaluate_amplitude(f, Vec3(1000, 0, 0), Vec3(0, 1000, 0), 1000.0).value);
  CHECK(anti > 10.0 * orth);
}

TEST_CASE("amplitude needs positive time and consistent inputs") {
  const PairAmplitudeField f = default_field();
  CHECK_THROWS_AS(evaluate_amplitude(f, Vec3(1, 0, 0), Vec3(-1, 0, 0), 0.0), DomainError);
  CHECK_THROWS_AS(PairAmplitudeField(make_spectrum(0.05, 2.0), make_kinematics(1, 1, 1)), DomainError);
}

TEST_CASE("opening-angle density peaks at pi") {
  const PairAmplitudeField f = default_field();
  const auto grid = uniform_gamma_grid(512);
  const GammaDensityTable g = gamma_density(f, 1000.0, 1000.0, 1000.0, grid, 2);
  CHECK(std::abs(g.modeGamma - kPi) <= kPi / 512 + 1e-12);
  const double peak = *std::max_element(g.psiSq.begin(), g.psiSq.end());
  CHECK(g.psiSq[256] <= 1e-3 * peak);
  CHECK(g.psiSq[0] <= 1e-3 * peak);
  double integral = 0.0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    integral += 0.5 * (grid[i + 1] - grid[i]) * (g.density[i] + g.density[i + 1]);
  }
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-12));

  const GammaDensityTable g1 = gamma_density(f, 1000.0, 1000.0, 1000.0, grid, 1);
  CHECK(g1.psiSq == g.psiSq);
}

TEST_CASE("wider momentum spread widens the opening-angle density") {
  const auto grid = uniform_gamma_grid(512);
  const GammaDensityTable narrow = gamma_density(default_field(0.02), 1000.0, 1000.0, 1000.0, grid, 2);
  const GammaDensityTable wide = gamma_density(default_field(0.2), 1000.0, 1000.0, 1000.0, grid, 2);
  CHECK(wide.secondMomentAboutPi > narrow.secondMomentAboutPi);
}

TEST_CASE("radial profile peaks on the classical shell") {
  const PairAmplitudeField f = default_field();
  const RadialProfile a = radial_profile(f, 1000.0, default_radial_grid(f, 1000.0, 401), 2);
  CHECK(a.peakR == doctest::Approx(1000.0).epsilon(0.02));
  const RadialProfile b = radial_profile(f, 2000.0, default_radial_grid(f, 2000.0, 401), 2);
  CHECK(b.peakR / a.peakR == doctest::Approx(2.0).epsilon(0.02));

  // Not yet arrived: the same grid at an early time.
  const RadialProfile early = radial_profile(f, 10.0, a.r, 2);
  const double maxEarly = *std::max_element(early.density.begin(), early.density.end());
  CHECK(maxEarly < 1e-6 * a.peakDensity);
}

TEST_CASE("table carries the whole state") {
  const PairAmplitudeField f = default_field();
  const AmplitudeTable tab = tabulate_reduced(f, 1000.0, {}, 2);
  CHECK(tab.totalMass == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(tab.edgeMass < 1e-9);
  CHECK_FALSE(tab.accuracyWarning);
  CHECK(tab.cellMass.minCoeff() >= 0.0);
  TableOptions tight;
  tight.rhoHi = 2000.0;
  CHECK_THROWS_AS(tabulate_reduced(f, 1000.0, tight, 1), DomainError);
}

TEST_CASE("uncertainty product respects the bound") {
  SUBCASE("default") {
    const PairAmplitudeField f = default_field();
    const auto ev = sample_events(f, 1000.0, 20000, 3, 2);
    CHECK(uncertainty_product(f, ev) >= 0.95);
  }
  SUBCASE("halved momentum spread") {
    const PairAmplitudeField f = default_field(0.025);
    const auto ev = sample_events(f, 1000.0, 20000, 3, 2);
    CHECK(uncertainty_product(f, ev) >= 0.95);
  }
  SUBCASE("energy decoupled, early time: Gaussian saturation") {
    const PairAmplitudeField f(make_spectrum(0.05, 1.0, 40.0), make_kinematics(1, 1, 1));
    const auto ev = sample_events(f, 0.5, 40000, 9, 2);
    const double u = uncertainty_product(f, ev);
    CHECK(u == doctest::Approx(1.0).epsilon(0.03));
  }
  SUBCASE("too few events") {
    const PairAmplitudeField f = default_field();
    const auto ev = sample_events(f, 1000.0, 5000, 3, 1);
    CHECK_THROWS_AS(uncertainty_product(f, ev), DomainError);
  }
}
