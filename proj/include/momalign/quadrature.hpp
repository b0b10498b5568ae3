#pragma once

#include "momalign/counter_rng.hpp"
#include "momalign/model.hpp"

#include <Eigen/Core>

#include <complex>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace momalign {

using Complex = std::complex<double>;

struct QuadratureSpec {
  int pointsPerOscillation = 8;
  double truncationSigmas = 6.0;
  std::int64_t maxGridPoints = std::int64_t{1} << 32;  ///< cap on P-nodes x k-nodes
  double relTolerance = 1e-4;

  /// Throws DomainError on ppo < 4, truncationSigmas < 3, relTolerance <= 0.
  void validate() const;
};

struct MCOracleSpec {
  std::int64_t sampleCount = 1'000'000;
  std::uint64_t seed = 1;
  int batches = 20;

  /// Throws DomainError on sampleCount < 1000 or batches < 10.
  void validate() const;
};

/// sin(x)/x, the solid-angle average of exp(i x cos xi).
double spherical_sinc(double x);

struct Window {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
};

/// Real envelope W(P, k) of a double radial integral
///
///   I = int dP int dk  W(P, k) j0(P Rw) j0(k rho) exp(-i E t) P^2 k^2,
///   E = P^2 / (2 M) + k^2 / (2 mu).
///
/// The envelope must be negligible at the window edges, or even in the
/// variable when the window starts at zero.
struct ReducedIntegrand {
  std::function<double(double, double)> envelope;
  Window pWindow;
  Window kWindow;
  /// Optional: k interval outside of which W vanishes for all P in [pLo, pHi].
  std::function<Window(double, double)> kBand;
  double totalMass = 2.0;
  double reducedMass = 0.5;
  /// Highest phase rate (rad per unit P, k) contained in the envelope itself.
  double pBandwidth = 0.0;
  double kBandwidth = 0.0;
};

struct PhaseScales {
  double Rw = 0.0;
  double rho = 0.0;
  double t = 0.0;
};

struct QuadratureResult {
  Complex value{};
  double error = 0.0;  ///< |fine - half-density| estimate
  bool accuracyWarning = false;
  std::int64_t pNodes = 0;
  std::int64_t kNodes = 0;
};

/// Trapezoidal double integral on a uniform grid whose spacing keeps every
/// phase advance per cell below 2 pi / pointsPerOscillation. The error is the
/// difference to the same sum on every second node.
QuadratureResult integrate_reduced_2d(const ReducedIntegrand& integrand,
                                      const QuadratureSpec& spec, const PhaseScales& scales);

struct GridQuadrature {
  Eigen::MatrixXcd value;  ///< value(i, j) at (rw[i], rho[j])
  Eigen::MatrixXd error;
  double maxError = 0.0;
  double maxAbs = 0.0;
  bool accuracyWarning = false;
  std::int64_t pNodes = 0;
  std::int64_t kNodes = 0;
};

/// Same integral on the tensor product rw x rho at time t. Work is split in
/// fixed-size column chunks so the result does not depend on `threads`.
GridQuadrature integrate_reduced_2d_grid(const ReducedIntegrand& integrand,
                                         const QuadratureSpec& spec,
                                         std::span<const double> rw,
                                         std::span<const double> rho, double t,
                                         unsigned threads);

struct PairQuadrature {
  std::vector<Complex> value;
  std::vector<double> error;
  double maxError = 0.0;
  double maxAbs = 0.0;
  bool accuracyWarning = false;
  std::int64_t pNodes = 0;
  std::int64_t kNodes = 0;
};

/// Same integral at the points (rw[j], rho[j]).
PairQuadrature integrate_reduced_2d_pairs(const ReducedIntegrand& integrand,
                                          const QuadratureSpec& spec,
                                          std::span<const double> rw,
                                          std::span<const double> rho, double t,
                                          unsigned threads);

// --- Monte Carlo oracle over the unreduced six-dimensional momentum integral.

struct MomentumDraw {
  Vec3 p1 = Vec3::Zero();
  Vec3 p2 = Vec3::Zero();
  double weight = 0.0;  ///< integrand envelope divided by proposal density
};

/// psi(r1, r2, t) = int d3p1 d3p2 F(p1, p2) exp(i (p1.r1 + p2.r2 - E t)),
/// with E = p1^2/(2 m1) + p2^2/(2 m2). `draw` samples the proposal and returns
/// F / q. The proposal must be symmetric under (p1, p2) -> (-p1, -p2) with F
/// even, which lets every draw be paired with its antithetic mirror.
struct SixDIntegrand {
  std::function<MomentumDraw(CounterRng&)> draw;
  double m1 = 1.0;
  double m2 = 1.0;
};

struct MCResult {
  Complex value{};
  double stdErrRe = 0.0;
  double stdErrIm = 0.0;
  std::int64_t samples = 0;

  double stdErr() const;
};

/// Batch-means estimate; sample i draws from CounterRng(seed, i), so the
/// result is bit-identical for any thread count.
MCResult mc_oracle_6d(const SixDIntegrand& integrand, const MCOracleSpec& spec, const Vec3& r1,
                      const Vec3& r2, double t, unsigned threads);

}  // namespace momalign
