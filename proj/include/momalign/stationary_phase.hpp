#pragma once

#include "momalign/model.hpp"

#include <string>

namespace momalign {

/// Where the phase of the pair amplitude is stationary: each momentum parallel
/// to its position (xi_j = 0), each fragment at r_j = v_j t, and the two
/// directions opposite.
struct StationaryPrediction {
  double xi1 = 0.0;
  double xi2 = 0.0;
  double r1Peak = 0.0;
  double r2Peak = 0.0;
  double gammaPeak = kPi;
  double p1Mag = 0.0;
  double p2Mag = 0.0;
};

/// Throws DomainError for t <= 0 (the incoming branch is not modeled).
StationaryPrediction predict(const PairKinematics& kin, double t);

enum class DeviationSource { Diffraction, MomentumSpread };

std::string to_string(DeviationSource s);

/// Order-of-magnitude angular deviations from exact anti-alignment at radius r.
struct DeviationBudget {
  double diffractionAngle = 0.0;  ///< sqrt(h / (p0 r)) = sqrt(lambda / r)
  double momentumAngle = 0.0;     ///< deltaP0 / p0
  double crossoverRadius = 0.0;   ///< h p0 / deltaP0^2
  DeviationSource dominant = DeviationSource::Diffraction;
};

DeviationBudget deviation_budget(const PairKinematics& kin, const SourceSpectrum& spectrum,
                                 double r);

/// Standard quantum limit sqrt(h t / m): the scale of the transverse spread a
/// free mass accumulates in time t. An order of magnitude, not a fitted width.
double sql_width(double m, double t);

/// de Broglie wavelength h / p.
double de_broglie_wavelength(double p);

}  // namespace momalign
