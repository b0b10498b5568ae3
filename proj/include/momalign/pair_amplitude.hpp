#pragma once

#include "momalign/model.hpp"
#include "momalign/quadrature.hpp"

#include <Eigen/Core>

#include <optional>
#include <span>
#include <vector>

namespace momalign {

/// Spatial extent of the pair density at time t, estimated from the Gaussian
/// widths of the centre-of-momentum and relative packets.
struct SupportWindow {
  double rwHi = 0.0;
  double rhoLo = 0.0;
  double rhoHi = 0.0;
  double cmWidth = 0.0;   ///< per-component std of the centre-of-momentum density
  double relWidth = 0.0;  ///< radial std of the relative shell
  double rhoPeak = 0.0;   ///< k0 t / mu
};

/// Two-fragment amplitude
///
///   psi(r1, r2, t) = int d3p1 d3p2 F(p1 + p2, E1 + E2) exp(i (p1.r1 + p2.r2 - E t))
///
/// evaluated through P = p1 + p2, k = (m2 p1 - m1 p2) / M, which turns the
/// phase into P.Rw + k.rho - E t with E = P^2/2M + k^2/2mu. The angular
/// integrals are then spherical sincs and psi depends on the positions only
/// through (Rw, rho). F is normalized so that the state has unit norm.
class PairAmplitudeField {
 public:
  PairAmplitudeField(const SourceSpectrum& spectrum, const PairKinematics& kin,
                     const QuadratureSpec& spec = {});

  const SourceSpectrum& spectrum() const { return spectrum_; }
  const PairKinematics& kinematics() const { return kin_; }
  const QuadratureSpec& spec() const { return spec_; }

  /// N such that the momentum-space norm (2 pi)^6 int |F|^2 equals 1.
  double normalization() const { return norm_; }

  /// F(P, E(P, k)) including normalization and scale.
  double envelope(double P, double k) const;

  Window pWindow() const { return pWindow_; }
  Window kWindow() const { return kWindow_; }

  ReducedIntegrand reduced_integrand() const;

  /// Importance sampler drawing P from the spectrum's Gaussian and |k| from a
  /// Gaussian around the energy shell.
  SixDIntegrand six_d_integrand() const;

  SupportWindow support(double t) const;

  /// Per-component standard deviation of P = p1 + p2 under |F|^2.
  double momentum_spread() const { return momentumSpread_; }

 private:
  SourceSpectrum spectrum_;
  PairKinematics kin_;
  QuadratureSpec spec_;
  Window pWindow_;
  Window kWindow_;
  double norm_ = 1.0;
  double momentumSpread_ = 0.0;
};

/// Throws DomainError for t <= 0.
QuadratureResult evaluate_amplitude(const PairAmplitudeField& field, const Vec3& r1,
                                    const Vec3& r2, double t);

/// |psi|^2 on (Rw, rho) cells, with the probability carried by each cell.
struct AmplitudeTable {
  double t = 0.0;
  std::vector<double> rwEdges;
  std::vector<double> rhoEdges;
  std::vector<double> rwCenters;
  std::vector<double> rhoCenters;
  Eigen::MatrixXd psiSq;     ///< at cell centres
  Eigen::MatrixXd cellMass;  ///< (4 pi)^2 |psi|^2 int Rw^2 dRw int rho^2 drho
  double totalMass = 0.0;    ///< norm of the state inside the table
  double edgeMass = 0.0;     ///< mass in the outermost open cells
  double quadratureError = 0.0;  ///< max |error| / max |psi|
  bool accuracyWarning = false;
};

struct TableOptions {
  int rwCells = 256;
  int rhoCells = 512;
  /// Overrides for the auto-sized window.
  std::optional<double> rwHi;
  std::optional<double> rhoLo;
  std::optional<double> rhoHi;
};

/// Throws DomainError when more than 1e-6 of the mass sits in the outer cells.
AmplitudeTable tabulate_reduced(const PairAmplitudeField& field, double t,
                                const TableOptions& options, unsigned threads);

/// Density of the opening angle at fixed radii: density(gamma) is
/// sin(gamma) |psi|^2, normalized to unit integral over the grid.
struct GammaDensityTable {
  double r1 = 0.0;
  double r2 = 0.0;
  double t = 0.0;
  std::vector<double> gamma;
  std::vector<double> psiSq;    ///< |psi|^2 (density with sin(gamma) removed)
  std::vector<double> density;  ///< normalized, includes sin(gamma)
  double normalization = 0.0;   ///< int sin(gamma) |psi|^2 d gamma before normalizing
  double modeGamma = 0.0;       ///< argmax of psiSq
  std::size_t modeIndex = 0;
  double secondMomentAboutPi = 0.0;  ///< int (pi - gamma)^2 density
};

std::vector<double> uniform_gamma_grid(int cells);

GammaDensityTable gamma_density(const PairAmplitudeField& field, double r1, double r2, double t,
                                std::span<const double> gammaGrid, unsigned threads);

struct RadialProfile {
  double t = 0.0;
  std::vector<double> r;
  std::vector<double> density;  ///< |psi|^2 r^4 on the anti-aligned diagonal r1 = r2 = r
  double peakR = 0.0;           ///< parabolic refinement of the maximum
  double peakDensity = 0.0;
};

/// Grid on the diagonal covering the relative shell at time t.
std::vector<double> default_radial_grid(const PairAmplitudeField& field, double t, int points);

RadialProfile radial_profile(const PairAmplitudeField& field, double t,
                             std::span<const double> rGrid, unsigned threads);

/// Position-space norm int |psi|^2 d3r1 d3r2 at time t, i.e.
/// 8 pi^2 int |psi|^2 r1^2 r2^2 sin(gamma), integrated in (Rw, rho). A box given
/// in `options` must cover truncationSigmas widths around the shells.
double norm_on_shells(const PairAmplitudeField& field, double t, const TableOptions& options,
                      unsigned threads);

/// Delta(p1 + p2)_x Delta(q1 + q2)_x / hbar, with the momentum spread taken
/// from |F|^2 and the position spread from the sampled events.
double uncertainty_product(const PairAmplitudeField& field,
                           std::span<const DetectionEvent> events);

}  // namespace momalign
