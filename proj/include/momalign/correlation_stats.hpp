#pragma once

#include "momalign/pair_amplitude.hpp"
#include "momalign/stationary_phase.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace momalign {

/// Draws joint detections from |psi|^2 d3r1 d3r2 at a fixed time.
///
/// (Rw, rho) is drawn cell-wise from the table (inverse CDF, then r^2-weighted
/// jitter inside the cell); the angle between the two conjugate vectors and
/// the overall orientation are uniform because |psi|^2 depends only on their
/// lengths. Event i uses CounterRng(seed, i).
std::vector<DetectionEvent> sample_events_from_table(const AmplitudeTable& table,
                                                     const PairKinematics& kin,
                                                     std::int64_t count, std::uint64_t seed,
                                                     unsigned threads);

/// Tabulates the field at t and samples it. count must be >= 1000.
std::vector<DetectionEvent> sample_events(const PairAmplitudeField& field, double t,
                                          std::int64_t count, std::uint64_t seed,
                                          unsigned threads, const TableOptions& table = {});

struct RunEcho {
  double m1 = 0.0;
  double m2 = 0.0;
  double E0 = 0.0;
  double deltaP0 = 0.0;
  double deltaE = 0.0;
  double t = 0.0;
  std::uint64_t seed = 0;
};

struct AlignmentReport {
  double sigmaEpsilon = 0.0;  ///< RMS of epsilon = pi - gamma
  double sigmaErr = 0.0;      ///< bootstrap standard error
  double radialPeak1 = 0.0;   ///< histogram mode of r1
  double radialPeak2 = 0.0;
  double radialPeak1Err = 0.0;
  double radialPeak2Err = 0.0;
  double meanCosGamma = 0.0;
  std::int64_t eventCount = 0;
  int bootstrapResamples = 0;
  std::optional<RunEcho> config;
};

struct BootstrapOptions {
  int resamples = 200;
  std::uint64_t seed = 0x5eed;
};

/// Throws DomainError for fewer than 1000 events or fewer than 100 resamples.
AlignmentReport alignment_report(std::span<const DetectionEvent> events,
                                 const BootstrapOptions& bootstrap = {}, unsigned threads = 1);

/// Mode of a sample from a Freedman-Diaconis histogram, refined by a parabola
/// through the three bins around the fullest one.
double histogram_mode(std::span<const double> values);

/// RMS of epsilon computed from the table by quadrature instead of sampling.
double epsilon_rms_quadrature(const AmplitudeTable& table, const PairKinematics& kin,
                              int betaNodes = 128);

enum class ScanVariable { Radius, DeltaP0 };

std::string to_string(ScanVariable v);

struct ScanPoint {
  double abscissa = 0.0;
  double sigmaEpsilon = 0.0;
  double sigmaErr = 0.0;
};

struct ScalingFit {
  double exponent = 0.0;
  double exponentErr = 0.0;
  double logPrefactor = 0.0;
  std::vector<ScanPoint> points;
};

/// Parameters held fixed during a scan: deltaP0 for radius scans, the radius
/// for deltaP0 scans.
struct ScanContext {
  PairKinematics kin;
  double deltaP0 = 0.0;
  double radius = 0.0;
};

/// Least-squares slope of log(sigma) against log(abscissa). Needs >= 4 points
/// spanning at least a factor 8, and the deviation source that is not scanned
/// must stay below 1/3 of the scanned one at the scan's geometric centre.
ScalingFit fit_scaling(std::span<const ScanPoint> points, ScanVariable variable,
                       const ScanContext& context);

struct CrossoverAnalysis {
  std::vector<double> segmentMidpoints;  ///< geometric mean of neighbouring radii
  std::vector<double> segmentSlopes;     ///< local log-log slope between neighbours
  double empiricalCrossover = 0.0;       ///< where the local slope passes -1/4; NaN if it never does
  double slopeAtLow = 0.0;               ///< slope of the first segment
  double slopeAtHigh = 0.0;              ///< slope of the last segment
  double predictedCrossover = 0.0;
};

/// Points must cover [predicted / 10, 10 predicted].
CrossoverAnalysis analyze_crossover(std::span<const ScanPoint> points, double predictedCrossover);

struct CrossoverRow {
  double r = 0.0;
  double t = 0.0;
  double sigmaEpsilon = 0.0;
  double sigmaErr = 0.0;
  double diffractionAngle = 0.0;
  double momentumAngle = 0.0;
  DeviationSource dominant = DeviationSource::Diffraction;
};

struct CrossoverScan {
  std::vector<CrossoverRow> rows;
  CrossoverAnalysis analysis;
};

struct SamplingOptions {
  std::int64_t count = 100000;
  std::uint64_t seed = 1;
  TableOptions table;
  BootstrapOptions bootstrap;
};

/// Samples at t = r / v1 and reports the alignment.
AlignmentReport measure_alignment(const PairAmplitudeField& field, double r,
                                  const SamplingOptions& options, unsigned threads);

/// Seed used for the i-th run of a scan started from `seed`.
std::uint64_t scan_seed(std::uint64_t seed, std::size_t index);

CrossoverScan crossover_scan(const PairAmplitudeField& field, std::span<const double> radii,
                             const SamplingOptions& options, unsigned threads);

/// n log-spaced radii from predicted/10 to 10 predicted.
std::vector<double> crossover_radii(double predictedCrossover, int n);

}  // namespace momalign
