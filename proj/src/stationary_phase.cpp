#include "momalign/stationary_phase.hpp"

#include "momalign/errors.hpp"

#include <cmath>

namespace momalign {

StationaryPrediction predict(const PairKinematics& kin, double t) {
  if (!(t > 0.0)) throw DomainError("predict requires t > 0");
  StationaryPrediction s;
  s.r1Peak = kin.v1 * t;
  s.r2Peak = kin.v2 * t;
  s.p1Mag = kin.p0;
  s.p2Mag = kin.p0;
  return s;
}

std::string to_string(DeviationSource s) {
  return s == DeviationSource::Diffraction ? "diffraction" : "momentum-spread";
}

DeviationBudget deviation_budget(const PairKinematics& kin, const SourceSpectrum& spectrum,
                                 double r) {
  if (!(r > 0.0)) throw DomainError("deviation_budget requires r > 0");
  DeviationBudget b;
  b.diffractionAngle = std::sqrt(UnitsConvention::h / (kin.p0 * r));
  b.momentumAngle = spectrum.deltaP0 / kin.p0;
  b.crossoverRadius = UnitsConvention::h * kin.p0 / (spectrum.deltaP0 * spectrum.deltaP0);
  b.dominant = b.diffractionAngle >= b.momentumAngle ? DeviationSource::Diffraction
                                                     : DeviationSource::MomentumSpread;
  return b;
}

double sql_width(double m, double t) {
  if (!(m > 0.0)) throw DomainError("sql_width requires m > 0");
  if (!(t > 0.0)) throw DomainError("sql_width requires t > 0");
  return std::sqrt(UnitsConvention::h * t / m);
}

double de_broglie_wavelength(double p) {
  if (!(p > 0.0)) throw DomainError("wavelength requires p > 0");
  return UnitsConvention::h / p;
}

}  // namespace momalign
