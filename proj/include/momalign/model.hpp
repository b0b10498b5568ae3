#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <numbers>

namespace momalign {

using Vec3 = Eigen::Vector3d;

/// Natural units. All lengths, momenta, times and energies in this library
/// are expressed with hbar = 1.
struct UnitsConvention {
  static constexpr double hbar = 1.0;
  static constexpr double h = 2.0 * std::numbers::pi * hbar;
};

inline constexpr double kPi = std::numbers::pi;

/// Masses and derived quantities of the two outgoing fragments.
///
/// Nonrelativistic throughout: E_j(p) = p^2 / (2 m_j), v_j = p0 / m_j.
struct PairKinematics {
  double m1 = 1.0;
  double m2 = 1.0;
  double M = 2.0;    ///< total mass
  double mu = 0.5;   ///< reduced mass
  double E0 = 1.0;   ///< peak kinetic energy released
  double p0 = 1.0;   ///< peak fragment momentum sqrt(2 mu E0)
  double v1 = 1.0;
  double v2 = 1.0;

  double energy1(double p) const { return p * p / (2.0 * m1); }
  double energy2(double p) const { return p * p / (2.0 * m2); }
};

/// Throws DomainError naming the offending field if any input is not positive.
PairKinematics make_kinematics(double m1, double m2, double E0);

/// Momentum/energy amplitude F(P, E) of the decaying system.
///
/// F(P, E) = scale * N * exp(-|P|^2 / (2 deltaP0^2)) * exp(-(E - E0)^2 / (2 deltaE^2))
///
/// The phase of F is identically zero, so the source sits at the origin.
/// N is fixed by the owner of the spectrum (PairAmplitudeField normalizes the
/// two-particle state to unit norm); `scale` is 1 for a physical source and 0
/// for the zero spectrum used in consistency checks.
struct SourceSpectrum {
  double deltaP0 = 0.05;
  double E0 = 1.0;
  double deltaE = 0.05;
  double scale = 1.0;

  /// Unnormalized shape exp(-P^2/(2 dp^2)) exp(-(E-E0)^2/(2 dE^2)); zero for E < 0.
  double shape(double P, double E) const;
};

inline constexpr double kDefaultDeltaP0 = 0.05;
inline constexpr double kDefaultDeltaEFraction = 0.05;

/// deltaE <= 0 selects the default 0.05 * E0.
SourceSpectrum make_spectrum(double deltaP0, double E0, double deltaE = 0.0,
                             double scale = 1.0);

struct SphericalDirection {
  double theta = 0.0;  ///< polar angle in [0, pi]
  double phi = 0.0;    ///< azimuth in [0, 2 pi)

  Vec3 unit() const;
  static SphericalDirection from_vector(const Vec3& v);
};

/// Angle between two directions, with cos(gamma) from the spherical law of
/// cosines cos t1 cos t2 + sin t1 sin t2 cos(p1 - p2). Result in [0, pi].
double opening_angle(const SphericalDirection& d1, const SphericalDirection& d2);

/// Conjugate lengths of the centre-of-momentum / relative split:
/// Rw = |m1 r1 + m2 r2| / M, rho = |r1 - r2|, gamma = angle(r1, r2).
struct ReducedCoordinates {
  double Rw = 0.0;
  double rho = 0.0;
  double gamma = 0.0;
};

/// gamma is 0 when either position is at the origin.
ReducedCoordinates reduced_coordinates(const Vec3& r1, const Vec3& r2,
                                       const PairKinematics& kin);

/// Angles between each momentum and the matching position.
struct AlignmentAngles {
  double xi1 = 0.0;
  double xi2 = 0.0;
};

AlignmentAngles alignment_angles(const SphericalDirection& p1, const SphericalDirection& r1,
                                 const SphericalDirection& p2, const SphericalDirection& r2);

/// One joint detection of both fragments.
struct DetectionEvent {
  double r1 = 0.0;
  SphericalDirection dir1;
  double r2 = 0.0;
  SphericalDirection dir2;
  double gamma = 0.0;    ///< opening_angle(dir1, dir2)
  double epsilon = 0.0;  ///< pi - gamma

  Vec3 position1() const { return r1 * dir1.unit(); }
  Vec3 position2() const { return r2 * dir2.unit(); }
};

}  // namespace momalign
