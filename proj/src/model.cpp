#include "momalign/model.hpp"

#include "momalign/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace momalign {

namespace {

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw DomainError(std::string(name) + " must be positive and finite, got " +
                      std::to_string(value));
  }
}

}  // namespace

PairKinematics make_kinematics(double m1, double m2, double E0) {
  require_positive(m1, "m1");
  require_positive(m2, "m2");
  require_positive(E0, "E0");
  PairKinematics kin;
  kin.m1 = m1;
  kin.m2 = m2;
  kin.M = m1 + m2;
  kin.mu = m1 * m2 / (m1 + m2);
  kin.E0 = E0;
  kin.p0 = std::sqrt(2.0 * kin.mu * E0);
  kin.v1 = kin.p0 / m1;
  kin.v2 = kin.p0 / m2;
  return kin;
}

double SourceSpectrum::shape(double P, double E) const {
  if (E < 0.0) return 0.0;
  const double a = P / deltaP0;
  const double b = (E - E0) / deltaE;
  return std::exp(-0.5 * (a * a + b * b));
}

SourceSpectrum make_spectrum(double deltaP0, double E0, double deltaE, double scale) {
  require_positive(deltaP0, "deltaP0");
  require_positive(E0, "E0");
  if (deltaE <= 0.0) deltaE = kDefaultDeltaEFraction * E0;
  require_positive(deltaE, "deltaE");
  if (!(scale >= 0.0) || !std::isfinite(scale)) {
    throw DomainError("scale must be nonnegative");
  }
  return SourceSpectrum{deltaP0, E0, deltaE, scale};
}

Vec3 SphericalDirection::unit() const {
  const double s = std::sin(theta);
  return {s * std::cos(phi), s * std::sin(phi), std::cos(theta)};
}

SphericalDirection SphericalDirection::from_vector(const Vec3& v) {
  const double r = v.norm();
  if (r == 0.0) return {};
  const double theta = std::acos(std::clamp(v.z() / r, -1.0, 1.0));
  double phi = std::atan2(v.y(), v.x());
  if (phi < 0.0) phi += 2.0 * kPi;
  if (phi >= 2.0 * kPi) phi = 0.0;
  return {theta, phi};
}

double opening_angle(const SphericalDirection& d1, const SphericalDirection& d2) {
  const double c = std::cos(d1.theta) * std::cos(d2.theta) +
                   std::sin(d1.theta) * std::sin(d2.theta) * std::cos(d1.phi - d2.phi);
  // |u1 x u2| keeps the result accurate near 0 and pi where acos loses digits.
  const double s = d1.unit().cross(d2.unit()).norm();
  return std::atan2(s, std::clamp(c, -1.0, 1.0));
}

ReducedCoordinates reduced_coordinates(const Vec3& r1, const Vec3& r2,
                                       const PairKinematics& kin) {
  ReducedCoordinates rc;
  rc.Rw = (kin.m1 * r1 + kin.m2 * r2).norm() / kin.M;
  rc.rho = (r1 - r2).norm();
  if (r1.norm() == 0.0 || r2.norm() == 0.0) {
    rc.gamma = 0.0;
  } else {
    rc.gamma = std::atan2(r1.cross(r2).norm(), r1.dot(r2));
  }
  return rc;
}

AlignmentAngles alignment_angles(const SphericalDirection& p1, const SphericalDirection& r1,
                                 const SphericalDirection& p2, const SphericalDirection& r2) {
  return {opening_angle(p1, r1), opening_angle(p2, r2)};
}

}  // namespace momalign
