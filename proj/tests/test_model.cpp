#include "momalign/errors.hpp"
#include "momalign/model.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace momalign;

TEST_CASE("kinematics for equal unit masses") {
  const PairKinematics k = make_kinematics(1.0, 1.0, 1.0);
  CHECK(k.mu == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(k.p0 == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(k.v1 == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(k.v2 == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("kinematics for heavier masses") {
  const PairKinematics k = make_kinematics(2.0, 2.0, 0.25);
  CHECK(k.mu == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(k.p0 == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  CHECK(k.v1 == doctest::Approx(0.35355339059327373).epsilon(1e-14));
  CHECK(k.energy1(k.p0) + k.energy2(k.p0) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("kinematics rejects non-positive inputs by name") {
  auto message = [](double m1, double m2, double e) {
    try {
      make_kinematics(m1, m2, e);
    } catch (const DomainError& err) {
      return std::string(err.what());
    }
    return std::string();
  };
  CHECK(message(1.0, 0.0, 1.0).find("m2") != std::string::npos);
  CHECK(message(-1.0, 1.0, 1.0).find("m1") != std::string::npos);
  CHECK(message(1.0, 1.0, 0.0).find("E0") != std::string::npos);
  CHECK_THROWS_AS(make_kinematics(NAN, 1.0, 1.0), DomainError);
}

TEST_CASE("spectrum defaults and shape") {
  const SourceSpectrum s = make_spectrum(0.05, 2.0);
  CHECK(s.deltaE == doctest::Approx(0.1));
  CHECK(s.shape(0.0, 2.0) == 1.0);
  CHECK(s.shape(0.05, 2.0) == doctest::Approx(std::exp(-0.5)));
  CHECK(s.shape(0.0, 2.1) == doctest::Approx(std::exp(-0.5)));
  CHECK(s.shape(0.0, -0.1) == 0.0);
  CHECK_THROWS_AS(make_spectrum(0.0, 1.0), DomainError);
  CHECK_THROWS_AS(make_spectrum(0.1, 1.0, 0.0, -1.0), DomainError);
}

TEST_CASE("reduced coordinates, anti-aligned pair") {
  const PairKinematics k = make_kinematics(1.0, 1.0, 1.0);
  const ReducedCoordinates c = reduced_coordinates(Vec3(3.0, 0, 0), Vec3(-3.0, 0, 0), k);
  CHECK(c.Rw == doctest::Approx(0.0));
  CHECK(c.rho == doctest::Approx(6.0));
  CHECK(c.gamma == doctest::Approx(kPi));
}

TEST_CASE("reduced coordinates, coincident points") {
  const PairKinematics k = make_kinematics(1.0, 1.0, 1.0);
  const ReducedCoordinates c = reduced_coordinates(Vec3(2.5, 0, 0), Vec3(2.5, 0, 0), k);
  CHECK(c.Rw == doctest::Approx(2.5));
  CHECK(c.rho == 0.0);
  CHECK(c.gamma == 0.0);
}

TEST_CASE("reduced coordinates, unequal masses") {
  const PairKinematics k = make_kinematics(1.0, 3.0, 1.0);
  const ReducedCoordinates c = reduced_coordinates(Vec3(4, 0, 0), Vec3(0, 2, 0), k);
  CHECK(c.Rw == doctest::Approx(1.8027756377319946).epsilon(1e-14));
  CHECK(c.rho == doctest::Approx(4.47213595499958).epsilon(1e-14));
  CHECK(c.gamma == doctest::Approx(kPi / 2).epsilon(1e-14));
}

TEST_CASE("reduced coordinates are rotation invariant") {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> n;
  const PairKinematics k = make_kinematics(0.7, 1.9, 1.3);
  for (int i = 0; i < 200; ++i) {
    const Vec3 r1(n(gen), n(gen), n(gen));
    const Vec3 r2(n(gen), n(gen), n(gen));
    Eigen::Quaterniond q(n(gen), n(gen), n(gen), n(gen));
    q.normalize();
    const ReducedCoordinates a = reduced_coordinates(r1, r2, k);
    const ReducedCoordinates b = reduced_coordinates(q * r1, q * r2, k);
    CHECK(b.Rw == doctest::Approx(a.Rw).epsilon(1e-12));
    CHECK(b.rho == doctest::Approx(a.rho).epsilon(1e-12));
    CHECK(b.gamma == doctest::Approx(a.gamma).epsilon(1e-12));
  }
}

TEST_CASE("opening angle examples") {
  CHECK(opening_angle({0.0, 0.0}, {kPi, 0.0}) == doctest::Approx(kPi));
  CHECK(opening_angle({0.4, 1.1}, {0.4, 1.1}) == doctest::Approx(0.0));
  CHECK(opening_angle({kPi / 2, 0.0}, {kPi / 2, kPi / 3}) == doctest::Approx(kPi / 3).epsilon(1e-14));
}

TEST_CASE("opening angle is accurate near pi and symmetric") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const SphericalDirection a{std::acos(2 * u(gen) - 1), 2 * kPi * u(gen)};
    const SphericalDirection b{std::acos(2 * u(gen) - 1), 2 * kPi * u(gen)};
    const double g = opening_angle(a, b);
    CHECK(g >= 0.0);
    CHECK(g <= kPi);
    CHECK(g == doctest::Approx(opening_angle(b, a)).epsilon(1e-14));
    CHECK(std::cos(g) == doctest::Approx(a.unit().dot(b.unit())).epsilon(1e-12));
  }
  // A tiny deviation from exact opposition must survive.
  const SphericalDirection a{kPi / 2, 0.0};
  const SphericalDirection b{kPi / 2, kPi - 1e-9};
  CHECK(kPi - opening_angle(a, b) == doctest::Approx(1e-9).epsilon(1e-6));
}

TEST_CASE("direction round trip") {
  const Vec3 v(-1.0, 2.0, -0.5);
  const SphericalDirection d = SphericalDirection::from_vector(v);
  CHECK(d.phi >= 0.0);
  CHECK(d.phi < 2 * kPi);
  CHECK((d.unit() - v.normalized()).norm() < 1e-15);
}

TEST_CASE("alignment angles vanish when momenta follow positions") {
  const SphericalDirection r1{0.3, 1.0};
  const SphericalDirection r2{kPi - 0.3, 1.0 + kPi};
  const AlignmentAngles a = alignment_angles(r1, r1, r2, r2);
  CHECK(a.xi1 == doctest::Approx(0.0));
  CHECK(a.xi2 == doctest::Approx(0.0));
}
