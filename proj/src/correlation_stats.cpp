#include "momalign/correlation_stats.hpp"

#include "momalign/counter_rng.hpp"
#include "momalign/errors.hpp"
#include "momalign/parallel.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace momalign {

namespace {

double cube_root_interp(double a, double b, double u) {
  return std::cbrt(a * a * a + u * (b * b * b - a * a * a));
}

DetectionEvent make_event(const Vec3& x1, const Vec3& x2) {
  DetectionEvent e;
  e.r1 = x1.norm();
  e.r2 = x2.norm();
  e.dir1 = SphericalDirection::from_vector(x1);
  e.dir2 = SphericalDirection::from_vector(x2);
  e.gamma = opening_angle(e.dir1, e.dir2);
  e.epsilon = kPi - e.gamma;
  return e;
}

}  // namespace

std::vector<DetectionEvent> sample_events_from_table(const AmplitudeTable& table,
                                                     const PairKinematics& kin,
                                                     std::int64_t count, std::uint64_t seed,
                                                     unsigned threads) {
  if (count < 1000) throw DomainError("sample_events needs count >= 1000");
  if (!(table.totalMass > 0.0)) throw DomainError("cannot sample a vanishing density");
  const auto nRw = table.cellMass.rows();
  const auto nRho = table.cellMass.cols();
  std::vector<double> cdf(static_cast<std::size_t>(nRw * nRho));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < nRw; ++i) {
    for (Eigen::Index j = 0; j < nRho; ++j) {
      acc += table.cellMass(i, j);
      cdf[static_cast<std::size_t>(i * nRho + j)] = acc;
    }
  }
  const double total = acc;
  const double w1 = kin.m2 / kin.M;
  const double w2 = kin.m1 / kin.M;

  std::vector<DetectionEvent> events(static_cast<std::size_t>(count));
  parallel_for(events.size(), threads, [&](std::size_t n) {
    CounterRng rng(seed, n);
    const double u = rng.uniform() * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    // Skip empty cells that share the same cumulative value.
    while (it != cdf.begin() && *it == *(it - 1)) --it;
    const auto cell = static_cast<Eigen::Index>(it - cdf.begin());
    const auto i = static_cast<std::size_t>(cell / nRho);
    const auto j = static_cast<std::size_t>(cell % nRho);
    const double rw = cube_root_interp(table.rwEdges[i], table.rwEdges[i + 1], rng.uniform());
    const double rho = cube_root_interp(table.rhoEdges[j], table.rhoEdges[j + 1], rng.uniform());
    const double cosB = 2.0 * rng.uniform() - 1.0;
    const double sinB = std::sqrt(std::max(0.0, 1.0 - cosB * cosB));
    Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    q.normalize();
    const Eigen::Matrix3d R = q.toRotationMatrix();
    const Vec3 rwVec = R * Vec3(0.0, 0.0, rw);
    const Vec3 rhoVec = R * Vec3(rho * sinB, 0.0, rho * cosB);
    events[n] = make_event(rwVec + w1 * rhoVec, rwVec - w2 * rhoVec);
  });
  return events;
}

std::vector<DetectionEvent> sample_events(const PairAmplitudeField& field, double t,
                                          std::int64_t count, std::uint64_t seed,
                                          unsigned threads, const TableOptions& table) {
  if (!(t > 0.0)) throw DomainError("sample_events requires t > 0");
  if (count < 1000) throw DomainError("sample_events needs count >= 1000");
  const AmplitudeTable tab = tabulate_reduced(field, t, table, threads);
  return sample_events_from_table(tab, field.kinematics(), count, seed, threads);
}

double histogram_mode(std::span<const double> values) {
  if (values.size() < 10) throw DomainError("histogram_mode needs >= 10 values");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double lo = v.front();
  const double hi = v.back();
  if (!(hi > lo)) return lo;
  const auto q = [&](double f) { return v[static_cast<std::size_t>(f * static_cast<double>(v.size() - 1))]; };
  double width = 2.0 * (q(0.75) - q(0.25)) * std::cbrt(1.0 / static_cast<double>(v.size()));
  if (!(width > 0.0)) width = (hi - lo) / 100.0;
  const auto bins = static_cast<std::size_t>(std::min(1e6, std::ceil((hi - lo) / width)) + 1);
  std::vector<double> counts(bins, 0.0);
  for (double x : v) {
    const auto b = std::min(bins - 1, static_cast<std::size_t>((x - lo) / width));
    counts[b] += 1.0;
  }
  const auto k = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  double offset = 0.0;
  if (k > 0 && k + 1 < bins) {
    const double y0 = counts[k - 1], y1 = counts[k], y2 = counts[k + 1];
    const double denom = y0 - 2.0 * y1 + y2;
    if (denom < 0.0) offset = 0.5 * (y0 - y2) / denom;
  }
  return lo + (static_cast<double>(k) + 0.5 + offset) * width;
}

AlignmentReport alignment_report(std::span<const DetectionEvent> events,
                                 const BootstrapOptions& bootstrap, unsigned threads) {
  if (events.size() < 1000) throw DomainError("alignment_report needs >= 1000 events");
  if (bootstrap.resamples < 100) throw DomainError("alignment_report needs >= 100 resamples");
  const std::size_t n = events.size();

  auto stats = [&](auto index) {
    double e2 = 0.0;
    std::vector<double> r1(n);
    std::vector<double> r2(n);
    for (std::size_t i = 0; i < n; ++i) {
      const DetectionEvent& e = events[index(i)];
      e2 += e.epsilon * e.epsilon;
      r1[i] = e.r1;
      r2[i] = e.r2;
    }
    return std::array<double, 3>{std::sqrt(e2 / static_cast<double>(n)), histogram_mode(r1),
                                 histogram_mode(r2)};
  };

  AlignmentReport rep;
  const auto base = stats([](std::size_t i) { return i; });
  rep.sigmaEpsilon = base[0];
  rep.radialPeak1 = base[1];
  rep.radialPeak2 = base[2];
  double cg = 0.0;
  for (const DetectionEvent& e : events) cg += std::cos(e.gamma);
  rep.meanCosGamma = cg / static_cast<double>(n);
  rep.eventCount = static_cast<std::int64_t>(n);
  rep.bootstrapResamples = bootstrap.resamples;

  std::vector<std::array<double, 3>> boot(static_cast<std::size_t>(bootstrap.resamples));
  parallel_for(boot.size(), threads, [&](std::size_t b) {
    std::vector<std::size_t> idx(n);
    CounterRng rng(bootstrap.seed, b);
    for (std::size_t i = 0; i < n; ++i) {
      idx[i] = std::min(n - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)));
    }
    boot[b] = stats([&](std::size_t i) { return idx[i]; });
  });
  std::array<double, 3> errs{};
  for (int c = 0; c < 3; ++c) {
    double m = 0.0;
    for (const auto& s : boot) m += s[static_cast<std::size_t>(c)];
    m /= static_cast<double>(boot.size());
    double v = 0.0;
    for (const auto& s : boot) {
      const double d = s[static_cast<std::size_t>(c)] - m;
      v += d * d;
    }
    errs[static_cast<std::size_t>(c)] = std::sqrt(v / static_cast<double>(boot.size() - 1));
  }
  rep.sigmaErr = errs[0];
  rep.radialPeak1Err = errs[1];
  rep.radialPeak2Err = errs[2];
  return rep;
}

double epsilon_rms_quadrature(const AmplitudeTable& table, const PairKinematics& kin,
                              int betaNodes) {
  if (betaNodes < 8) throw DomainError("epsilon_rms_quadrature needs >= 8 beta nodes");
  if (!(table.totalMass > 0.0)) throw DomainError("vanishing density");
  // Three-point Gauss-Legendre inside each cell, weighted by r^2, matching
  // the piecewise-constant |psi|^2 the sampler draws from.
  const std::array<double, 3> gx{-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  const std::array<double, 3> gw{5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  const double w1 = kin.m2 / kin.M;
  const double w2 = kin.m1 / kin.M;
  const auto nRw = table.cellMass.rows();
  const auto nRho = table.cellMass.cols();

  auto beta_average = [&](double rw, double rho) {
    double s = 0.0;
    for (int b = 0; b < betaNodes; ++b) {
      const double c = -1.0 + (2.0 * b + 1.0) / betaNodes;
      const double sn = std::sqrt(std::max(0.0, 1.0 - c * c));
      const Vec3 x1(w1 * rho * sn, 0.0, rw + w1 * rho * c);
      const Vec3 x2(-w2 * rho * sn, 0.0, rw - w2 * rho * c);
      const double g = std::atan2(x1.cross(x2).norm(), x1.dot(x2));
      const double e = kPi - g;
      s += e * e;
    }
    return s / betaNodes;
  };

  double num = 0.0;
  double den = 0.0;
  for (Eigen::Index i = 0; i < nRw; ++i) {
    const double a0 = table.rwEdges[static_cast<std::size_t>(i)];
    const double a1 = table.rwEdges[static_cast<std::size_t>(i) + 1];
    for (Eigen::Index j = 0; j < nRho; ++j) {
      const double mass = table.cellMass(i, j);
      if (mass == 0.0) continue;
      const double b0 = table.rhoEdges[static_cast<std::size_t>(j)];
      const double b1 = table.rhoEdges[static_cast<std::size_t>(j) + 1];
      double cellNum = 0.0;
      double cellDen = 0.0;
      for (int p = 0; p < 3; ++p) {
        const double rw = 0.5 * (a0 + a1) + 0.5 * (a1 - a0) * gx[static_cast<std::size_t>(p)];
        for (int q = 0; q < 3; ++q) {
          const double rho = 0.5 * (b0 + b1) + 0.5 * (b1 - b0) * gx[static_cast<std::size_t>(q)];
          const double w = gw[static_cast<std::size_t>(p)] * gw[static_cast<std::size_t>(q)] *
                           rw * rw * rho * rho;
          cellNum += w * beta_average(rw, rho);
          cellDen += w;
        }
      }
      if (cellDen > 0.0) {
        num += mass * cellNum / cellDen;
        den += mass;
      }
    }
  }
  return std::sqrt(num / den);
}

std::string to_string(ScanVariable v) { return v == ScanVariable::Radius ? "radius" : "deltaP0"; }

ScalingFit fit_scaling(std::span<const ScanPoint> points, ScanVariable variable,
                       const ScanContext& context) {
  if (points.size() < 4) throw DomainError("fit_scaling needs >= 4 points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].abscissa > 0.0) || !(points[i].sigmaEpsilon > 0.0)) {
      throw DomainError("fit_scaling needs positive abscissae and widths");
    }
    if (i > 0 && !(points[i].abscissa > points[i - 1].abscissa)) {
      throw DomainError("scan abscissae must be strictly increasing");
    }
  }
  const double lo = points.front().abscissa;
  const double hi = points.back().abscissa;
  if (hi / lo < 8.0 * (1.0 - 1e-12)) {
    throw DomainError("scan must span at least a factor 8");
  }

  const double centre = std::sqrt(lo * hi);
  const SourceSpectrum sp{variable == ScanVariable::Radius ? context.deltaP0 : centre,
                          context.kin.E0, kDefaultDeltaEFraction * context.kin.E0, 1.0};
  const double r = variable == ScanVariable::Radius ? centre : context.radius;
  if (!(sp.deltaP0 > 0.0) || !(r > 0.0)) throw DomainError("scan context incomplete");
  const DeviationBudget b = deviation_budget(context.kin, sp, r);
  if (variable == ScanVariable::Radius && b.momentumAngle > b.diffractionAngle / 3.0) {
    throw DomainError("radius scan contaminated by the momentum-spread term (" +
                      std::to_string(b.momentumAngle) + " > 1/3 of " +
                      std::to_string(b.diffractionAngle) + ")");
  }
  if (variable == ScanVariable::DeltaP0 && b.diffractionAngle > b.momentumAngle / 3.0) {
    throw DomainError("deltaP0 scan contaminated by the diffraction term (" +
                      std::to_string(b.diffractionAngle) + " > 1/3 of " +
                      std::to_string(b.momentumAngle) + ")");
  }

  const auto n = static_cast<double>(points.size());
  double sx = 0.0, sy = 0.0;
  for (const ScanPoint& p : points) {
    sx += std::log(p.abscissa);
    sy += std::log(p.sigmaEpsilon);
  }
  const double mx = sx / n;
  const double my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (const ScanPoint& p : points) {
    const double dx = std::log(p.abscissa) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(p.sigmaEpsilon) - my);
  }
  ScalingFit fit;
  fit.exponent = sxy / sxx;
  fit.logPrefactor = my - fit.exponent * mx;
  double ssr = 0.0;
  for (const ScanPoint& p : points) {
    const double res = std::log(p.sigmaEpsilon) - fit.logPrefactor - fit.exponent * std::log(p.abscissa);
    ssr += res * res;
  }
  fit.exponentErr = std::sqrt(ssr / (n - 2.0) / sxx);
  fit.points.assign(points.begin(), points.end());
  return fit;
}

CrossoverAnalysis analyze_crossover(std::span<const ScanPoint> points, double predictedCrossover) {
  if (!(predictedCrossover > 0.0)) throw DomainError("predicted crossover must be positive");
  if (points.size() < 3) throw DomainError("crossover analysis needs >= 3 points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].abscissa > 0.0) || !(points[i].sigmaEpsilon > 0.0) ||
        (i > 0 && !(points[i].abscissa > points[i - 1].abscissa))) {
      throw DomainError("crossover points must be positive and strictly increasing");
    }
  }
  constexpr double tol = 1e-9;
  if (points.front().abscissa > predictedCrossover / 10.0 * (1.0 + tol) ||
      points.back().abscissa < 10.0 * predictedCrossover * (1.0 - tol)) {
    throw DomainError("crossover scan must span [r*/10, 10 r*]");
  }
  CrossoverAnalysis a;
  a.predictedCrossover = predictedCrossover;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const double lx0 = std::log(points[i].abscissa);
    const double lx1 = std::log(points[i + 1].abscissa);
    a.segmentMidpoints.push_back(std::exp(0.5 * (lx0 + lx1)));
    a.segmentSlopes.push_back((std::log(points[i + 1].sigmaEpsilon) - std::log(points[i].sigmaEpsilon)) /
                              (lx1 - lx0));
  }
  a.slopeAtLow = a.segmentSlopes.front();
  a.slopeAtHigh = a.segmentSlopes.back();
  a.empiricalCrossover = std::numeric_limits<double>::quiet_NaN();
  constexpr double threshold = -0.25;
  for (std::size_t i = 0; i + 1 < a.segmentSlopes.size(); ++i) {
    const double s0 = a.segmentSlopes[i];
    const double s1 = a.segmentSlopes[i + 1];
    if (s0 <= threshold && s1 > threshold) {
      const double l0 = std::log(a.segmentMidpoints[i]);
      const double l1 = std::log(a.segmentMidpoints[i + 1]);
      a.empiricalCrossover = std::exp(l0 + (threshold - s0) / (s1 - s0) * (l1 - l0));
      break;
    }
  }
  return a;
}

AlignmentReport measure_alignment(const PairAmplitudeField& field, double r,
                                  const SamplingOptions& options, unsigned threads) {
  if (!(r > 0.0)) throw DomainError("radius must be positive");
  const double t = r / field.kinematics().v1;
  const auto events = sample_events(field, t, options.count, options.seed, threads, options.table);
  AlignmentReport rep = alignment_report(events, options.bootstrap, threads);
  const PairKinematics& k = field.kinematics();
  const SourceSpectrum& s = field.spectrum();
  rep.config = RunEcho{k.m1, k.m2, k.E0, s.deltaP0, s.deltaE, t, options.seed};
  return rep;
}

std::uint64_t scan_seed(std::uint64_t seed, std::size_t index) {
  return CounterRng::mix(seed ^ CounterRng::mix(static_cast<std::uint64_t>(index) + 1));
}

CrossoverScan crossover_scan(const PairAmplitudeField& field, std::span<const double> radii,
                             const SamplingOptions& options, unsigned threads) {
  const DeviationBudget b0 = deviation_budget(field.kinematics(), field.spectrum(), 1.0);
  const double predicted = b0.crossoverRadius;
  if (radii.empty() || radii.front() > predicted / 10.0 * (1.0 + 1e-9) ||
      radii.back() < 10.0 * predicted * (1.0 - 1e-9)) {
    throw DomainError("crossover scan must span [r*/10, 10 r*]");
  }
  CrossoverScan scan;
  std::vector<ScanPoint> pts;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    SamplingOptions o = options;
    o.seed = scan_seed(options.seed, i);
    const AlignmentReport rep = measure_alignment(field, radii[i], o, threads);
    const DeviationBudget b = deviation_budget(field.kinematics(), field.spectrum(), radii[i]);
    scan.rows.push_back({radii[i], radii[i] / field.kinematics().v1, rep.sigmaEpsilon, rep.sigmaErr,
                         b.diffractionAngle, b.momentumAngle, b.dominant});
    pts.push_back({radii[i], rep.sigmaEpsilon, rep.sigmaErr});
  }
  scan.analysis = analyze_crossover(pts, predicted);
  return scan;
}

std::vector<double> crossover_radii(double predictedCrossover, int n) {
  if (n < 3) throw DomainError("crossover scan needs >= 3 radii");
  std::vector<double> r(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double f = -1.0 + 2.0 * i / (n - 1.0);
    r[static_cast<std::size_t>(i)] = predictedCrossover * std::pow(10.0, f);
  }
  r.front() = predictedCrossover / 10.0;
  r.back() = predictedCrossover * 10.0;
  return r;
}

}  // namespace momalign
