#include "momalign/pair_amplitude.hpp"

#include "momalign/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace momalign {

namespace {

constexpr double kFourPiSq = 16.0 * kPi * kPi;

double sqrt_pos(double x) { return std::sqrt(std::max(0.0, x)); }

// Gaussian width of a free packet whose momentum amplitude is
// exp(-q^2 / (2 s^2)): per-component std of |psi|^2 after time t for mass m.
double spread_width(double s, double t, double m) {
  const double a = 1.0 / (s * s);
  return std::sqrt((a * a + t * t / (m * m)) / (2.0 * a));
}

}  // namespace

PairAmplitudeField::PairAmplitudeField(const SourceSpectrum& spectrum, const PairKinematics& kin,
                                       const QuadratureSpec& spec)
    : spectrum_(spectrum), kin_(kin), spec_(spec) {
  spec_.validate();
  // Re-run the constructors' checks on aggregates built by hand.
  spectrum_ = make_spectrum(spectrum.deltaP0, spectrum.E0, spectrum.deltaE, spectrum.scale);
  kin_ = make_kinematics(kin.m1, kin.m2, kin.E0);
  if (std::abs(spectrum_.E0 - kin_.E0) > 1e-12 * kin_.E0) {
    throw DomainError("spectrum E0 and kinematics E0 differ");
  }

  const double ns = spec_.truncationSigmas;
  const double eMax = spectrum_.E0 + ns * spectrum_.deltaE;
  const double pHi = std::min(ns * spectrum_.deltaP0, std::sqrt(2.0 * kin_.M * eMax));
  pWindow_ = {0.0, pHi};
  kWindow_ = {sqrt_pos(2.0 * kin_.mu * (spectrum_.E0 - ns * spectrum_.deltaE - pHi * pHi / (2.0 * kin_.M))),
              std::sqrt(2.0 * kin_.mu * eMax)};

  // Non-oscillatory momentum-space integrals of |F|^2: the grid resolves the
  // narrowest envelope scale with 12 nodes.
  const double dP = std::min(spectrum_.deltaP0, kin_.M * spectrum_.deltaE / std::max(pHi, 1e-300)) / 12.0;
  const double dK = kin_.mu * spectrum_.deltaE / kWindow_.hi / 12.0;
  const auto nP = static_cast<std::size_t>(std::ceil(pWindow_.width() / dP)) + 1;
  const auto nK = static_cast<std::size_t>(std::ceil(kWindow_.width() / dK)) + 1;
  const double hP = pWindow_.width() / static_cast<double>(nP - 1);
  const double hK = kWindow_.width() / static_cast<double>(nK - 1);
  double s2 = 0.0;
  double s4 = 0.0;
  for (std::size_t i = 0; i < nP; ++i) {
    const double P = static_cast<double>(i) * hP;
    const double wp = (i == 0 || i == nP - 1) ? 0.5 * hP : hP;
    for (std::size_t l = 0; l < nK; ++l) {
      const double k = kWindow_.lo + static_cast<double>(l) * hK;
      const double wk = (l == 0 || l == nK - 1) ? 0.5 * hK : hK;
      const double f = spectrum_.shape(P, P * P / (2.0 * kin_.M) + k * k / (2.0 * kin_.mu));
      const double w = wp * wk * f * f * P * P * k * k;
      s2 += w;
      s4 += w * P * P;
    }
  }
  const double twoPi6 = std::pow(2.0 * kPi, 6);
  norm_ = 1.0 / std::sqrt(twoPi6 * kFourPiSq * s2);
  momentumSpread_ = std::sqrt(s4 / s2 / 3.0);
}

double PairAmplitudeField::envelope(double P, double k) const {
  const double E = P * P / (2.0 * kin_.M) + k * k / (2.0 * kin_.mu);
  return spectrum_.scale * norm_ * spectrum_.shape(P, E);
}

ReducedIntegrand PairAmplitudeField::reduced_integrand() const {
  ReducedIntegrand f;
  f.envelope = [this](double P, double k) { return envelope(P, k); };
  f.pWindow = pWindow_;
  f.kWindow = kWindow_;
  const double ns = spec_.truncationSigmas;
  const double E0 = spectrum_.E0;
  const double dE = spectrum_.deltaE;
  const double M = kin_.M;
  const double mu = kin_.mu;
  const Window kw = kWindow_;
  f.kBand = [=](double pLo, double pHi) {
    const double lo = sqrt_pos(2.0 * mu * (E0 - ns * dE - pHi * pHi / (2.0 * M)));
    const double hi = sqrt_pos(2.0 * mu * (E0 + ns * dE - pLo * pLo / (2.0 * M)));
    return Window{std::max(lo, kw.lo), std::min(hi, kw.hi)};
  };
  f.totalMass = M;
  f.reducedMass = mu;
  f.pBandwidth = ns / spectrum_.deltaP0 + ns * pWindow_.hi / (M * dE);
  f.kBandwidth = ns * kWindow_.hi / (mu * dE);
  return f;
}

SixDIntegrand PairAmplitudeField::six_d_integrand() const {
  SixDIntegrand g;
  g.m1 = kin_.m1;
  g.m2 = kin_.m2;
  const SourceSpectrum sp = spectrum_;
  const PairKinematics kin = kin_;
  const double prefactor =
      sp.scale * norm_ * std::pow(2.0 * kPi * sp.deltaP0 * sp.deltaP0, 1.5) * 4.0 * kPi;
  g.draw = [sp, kin, prefactor](CounterRng& rng) {
    MomentumDraw d;
    const Vec3 P(sp.deltaP0 * rng.normal(), sp.deltaP0 * rng.normal(), sp.deltaP0 * rng.normal());
    const double a = P.squaredNorm() / (2.0 * kin.M);
    const double kc = std::sqrt(2.0 * kin.mu * std::max(sp.E0 - a, sp.deltaE));
    const double sk = 1.5 * kin.mu * sp.deltaE / kc;
    double k = -1.0;
    while (!(k > 0.0)) k = kc + sk * rng.normal();
    const double z = (k - kc) / sk;
    const double accept = 0.5 * std::erfc(-kc / (sk * std::sqrt(2.0)));
    const double q = std::exp(-0.5 * z * z) / (sk * std::sqrt(2.0 * kPi) * accept);
    const double cosT = 2.0 * rng.uniform() - 1.0;
    const double phi = 2.0 * kPi * rng.uniform();
    const double sinT = std::sqrt(std::max(0.0, 1.0 - cosT * cosT));
    const Vec3 kv = k * Vec3(sinT * std::cos(phi), sinT * std::sin(phi), cosT);
    const double E = a + k * k / (2.0 * kin.mu);
    const double g2 = (E - sp.E0) / sp.deltaE;
    d.weight = prefactor * std::exp(-0.5 * g2 * g2) * k * k / q;
    d.p1 = (kin.m1 / kin.M) * P + kv;
    d.p2 = (kin.m2 / kin.M) * P - kv;
    return d;
  };
  return g;
}

SupportWindow PairAmplitudeField::support(double t) const {
  const double ns = spec_.truncationSigmas;
  SupportWindow s;
  s.cmWidth = spread_width(spectrum_.deltaP0, t, kin_.M);
  const double dk = kin_.mu * spectrum_.deltaE / kin_.p0;
  s.relWidth = spread_width(dk, t, kin_.mu);
  s.rhoPeak = kin_.p0 * t / kin_.mu;
  constexpr double margin = 1.2;
  s.rwHi = margin * ns * s.cmWidth;
  s.rhoLo = std::max(0.0, kWindow_.lo * t / kin_.mu - margin * ns * s.relWidth);
  s.rhoHi = kWindow_.hi * t / kin_.mu + margin * ns * s.relWidth;
  return s;
}

QuadratureResult evaluate_amplitude(const PairAmplitudeField& field, const Vec3& r1,
                                    const Vec3& r2, double t) {
  if (!(t > 0.0)) throw DomainError("evaluate_amplitude requires t > 0");
  const ReducedCoordinates rc = reduced_coordinates(r1, r2, field.kinematics());
  QuadratureResult q = integrate_reduced_2d(field.reduced_integrand(), field.spec(),
                                            PhaseScales{rc.Rw, rc.rho, t});
  q.value *= kFourPiSq;
  q.error *= kFourPiSq;
  return q;
}

namespace {

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return v;
}

double cube_moment(double a, double b) { return (b * b * b - a * a * a) / 3.0; }

AmplitudeTable tabulate_impl(const PairAmplitudeField& field, double t,
                             const TableOptions& options, unsigned threads) {
  if (!(t > 0.0)) throw DomainError("tabulation requires t > 0");
  if (options.rwCells < 2 || options.rhoCells < 2) {
    throw DomainError("table needs at least 2 cells per axis");
  }
  const SupportWindow s = field.support(t);
  const double rwHi = options.rwHi.value_or(s.rwHi);
  const double rhoLo = options.rhoLo.value_or(s.rhoLo);
  const double rhoHi = options.rhoHi.value_or(s.rhoHi);
  if (!(rwHi > 0.0) || !(rhoLo >= 0.0) || !(rhoHi > rhoLo)) {
    throw DomainError("invalid table window");
  }

  AmplitudeTable tab;
  tab.t = t;
  tab.rwEdges = linspace(0.0, rwHi, static_cast<std::size_t>(options.rwCells) + 1);
  tab.rhoEdges = linspace(rhoLo, rhoHi, static_cast<std::size_t>(options.rhoCells) + 1);
  for (std::size_t i = 0; i + 1 < tab.rwEdges.size(); ++i) {
    tab.rwCenters.push_back(0.5 * (tab.rwEdges[i] + tab.rwEdges[i + 1]));
  }
  for (std::size_t j = 0; j + 1 < tab.rhoEdges.size(); ++j) {
    tab.rhoCenters.push_back(0.5 * (tab.rhoEdges[j] + tab.rhoEdges[j + 1]));
  }

  const GridQuadrature q = integrate_reduced_2d_grid(field.reduced_integrand(), field.spec(),
                                                     tab.rwCenters, tab.rhoCenters, t, threads);
  tab.psiSq = (kFourPiSq * q.value).cwiseAbs2();
  tab.quadratureError = q.maxAbs > 0.0 ? q.maxError / q.maxAbs : 0.0;
  tab.accuracyWarning = q.accuracyWarning;

  const auto nRw = static_cast<Eigen::Index>(tab.rwCenters.size());
  const auto nRho = static_cast<Eigen::Index>(tab.rhoCenters.size());
  tab.cellMass.resize(nRw, nRho);
  for (Eigen::Index i = 0; i < nRw; ++i) {
    const double wr = cube_moment(tab.rwEdges[static_cast<std::size_t>(i)],
                                  tab.rwEdges[static_cast<std::size_t>(i) + 1]);
    for (Eigen::Index j = 0; j < nRho; ++j) {
      const double wp = cube_moment(tab.rhoEdges[static_cast<std::size_t>(j)],
                                    tab.rhoEdges[static_cast<std::size_t>(j) + 1]);
      tab.cellMass(i, j) = kFourPiSq * tab.psiSq(i, j) * wr * wp;
    }
  }
  tab.totalMass = tab.cellMass.sum();
  double edge = tab.cellMass.row(nRw - 1).sum() + tab.cellMass.col(nRho - 1).sum();
  if (rhoLo > 0.0) edge += tab.cellMass.col(0).sum();
  tab.edgeMass = edge;
  return tab;
}

}  // namespace

AmplitudeTable tabulate_reduced(const PairAmplitudeField& field, double t,
                                const TableOptions& options, unsigned threads) {
  AmplitudeTable tab = tabulate_impl(field, t, options, threads);
  if (tab.totalMass > 0.0 && tab.edgeMass > 1e-6 * tab.totalMass) {
    throw DomainError("table window misses the density: edge cells carry " +
                      std::to_string(tab.edgeMass / tab.totalMass) + " of the mass");
  }
  return tab;
}

std::vector<double> uniform_gamma_grid(int cells) {
  if (cells < 2) throw DomainError("gamma grid needs >= 2 cells");
  return linspace(0.0, kPi, static_cast<std::size_t>(cells) + 1);
}

GammaDensityTable gamma_density(const PairAmplitudeField& field, double r1, double r2, double t,
                                std::span<const double> gammaGrid, unsigned threads) {
  if (!(t > 0.0)) throw DomainError("gamma_density requires t > 0");
  if (!(r1 > 0.0) || !(r2 > 0.0)) throw DomainError("gamma_density requires radii > 0");
  if (gammaGrid.size() < 3) throw DomainError("gamma grid needs >= 3 nodes");
  for (std::size_t i = 0; i < gammaGrid.size(); ++i) {
    if (gammaGrid[i] < 0.0 || gammaGrid[i] > kPi || (i > 0 && !(gammaGrid[i] > gammaGrid[i - 1]))) {
      throw DomainError("gamma grid must be strictly increasing within [0, pi]");
    }
  }
  const PairKinematics& kin = field.kinematics();
  std::vector<double> rw(gammaGrid.size());
  std::vector<double> rho(gammaGrid.size());
  for (std::size_t i = 0; i < gammaGrid.size(); ++i) {
    const Vec3 a(0.0, 0.0, r1);
    const Vec3 b(r2 * std::sin(gammaGrid[i]), 0.0, r2 * std::cos(gammaGrid[i]));
    const ReducedCoordinates rc = reduced_coordinates(a, b, kin);
    rw[i] = rc.Rw;
    rho[i] = rc.rho;
  }
  const PairQuadrature q =
      integrate_reduced_2d_pairs(field.reduced_integrand(), field.spec(), rw, rho, t, threads);

  GammaDensityTable tab;
  tab.r1 = r1;
  tab.r2 = r2;
  tab.t = t;
  tab.gamma.assign(gammaGrid.begin(), gammaGrid.end());
  tab.psiSq.resize(gammaGrid.size());
  tab.density.resize(gammaGrid.size());
  for (std::size_t i = 0; i < gammaGrid.size(); ++i) tab.psiSq[i] = std::norm(kFourPiSq * q.value[i]);
  double norm = 0.0;
  for (std::size_t i = 0; i + 1 < gammaGrid.size(); ++i) {
    const double h = gammaGrid[i + 1] - gammaGrid[i];
    norm += 0.5 * h *
            (std::sin(gammaGrid[i]) * tab.psiSq[i] + std::sin(gammaGrid[i + 1]) * tab.psiSq[i + 1]);
  }
  if (!(norm > 0.0)) throw DomainError("gamma density vanishes on the grid");
  tab.normalization = norm;
  double m2 = 0.0;
  for (std::size_t i = 0; i < gammaGrid.size(); ++i) {
    tab.density[i] = std::sin(gammaGrid[i]) * tab.psiSq[i] / norm;
  }
  for (std::size_t i = 0; i + 1 < gammaGrid.size(); ++i) {
    const double h = gammaGrid[i + 1] - gammaGrid[i];
    const double e0 = kPi - gammaGrid[i];
    const double e1 = kPi - gammaGrid[i + 1];
    m2 += 0.5 * h * (e0 * e0 * tab.density[i] + e1 * e1 * tab.density[i + 1]);
  }
  tab.secondMomentAboutPi = m2;
  const auto it = std::max_element(tab.psiSq.begin(), tab.psiSq.end());
  tab.modeIndex = static_cast<std::size_t>(it - tab.psiSq.begin());
  tab.modeGamma = tab.gamma[tab.modeIndex];
  return tab;
}

std::vector<double> default_radial_grid(const PairAmplitudeField& field, double t, int points) {
  if (!(t > 0.0)) throw DomainError("radial grid requires t > 0");
  if (points < 3) throw DomainError("radial grid needs >= 3 points");
  const SupportWindow s = field.support(t);
  const double half = field.spec().truncationSigmas * s.relWidth;
  const double lo = std::max(0.5 * (s.rhoPeak - half), 1e-6 * s.rhoPeak);
  const double hi = 0.5 * (s.rhoPeak + half);
  return linspace(lo, hi, static_cast<std::size_t>(points));
}

RadialProfile radial_profile(const PairAmplitudeField& field, double t,
                             std::span<const double> rGrid, unsigned threads) {
  if (!(t > 0.0)) throw DomainError("radial_profile requires t > 0");
  if (rGrid.size() < 3) throw DomainError("radial grid needs >= 3 points");
  const PairKinematics& kin = field.kinematics();
  std::vector<double> rw(rGrid.size());
  std::vector<double> rho(rGrid.size());
  for (std::size_t i = 0; i < rGrid.size(); ++i) {
    if (!(rGrid[i] >= 0.0)) throw DomainError("radii must be >= 0");
    rw[i] = std::abs(kin.m1 - kin.m2) * rGrid[i] / kin.M;
    rho[i] = 2.0 * rGrid[i];
  }
  const PairQuadrature q =
      integrate_reduced_2d_pairs(field.reduced_integrand(), field.spec(), rw, rho, t, threads);
  RadialProfile prof;
  prof.t = t;
  prof.r.assign(rGrid.begin(), rGrid.end());
  prof.density.resize(rGrid.size());
  for (std::size_t i = 0; i < rGrid.size(); ++i) {
    const double r2 = rGrid[i] * rGrid[i];
    prof.density[i] = std::norm(kFourPiSq * q.value[i]) * r2 * r2;
  }
  const auto it = std::max_element(prof.density.begin(), prof.density.end());
  const auto k = static_cast<std::size_t>(it - prof.density.begin());
  prof.peakR = prof.r[k];
  prof.peakDensity = *it;
  if (k > 0 && k + 1 < prof.r.size()) {
    // Vertex of the parabola through the three nodes around the maximum.
    const double x0 = prof.r[k - 1], x1 = prof.r[k], x2 = prof.r[k + 1];
    const double y0 = prof.density[k - 1], y1 = prof.density[k], y2 = prof.density[k + 1];
    const double d1 = (y1 - y0) / (x1 - x0);
    const double d2 = (y2 - y1) / (x2 - x1);
    const double curv = (d2 - d1) / (x2 - x0);
    if (curv < 0.0) prof.peakR = 0.5 * (x0 + x1) - d1 / (2.0 * curv);
  }
  return prof;
}

double norm_on_shells(const PairAmplitudeField& field, double t, const TableOptions& options,
                      unsigned threads) {
  if (!(t > 0.0)) throw DomainError("norm_on_shells requires t > 0");
  const SupportWindow s = field.support(t);
  const double ns = field.spec().truncationSigmas;
  if (options.rwHi && *options.rwHi < ns * s.cmWidth) {
    throw DomainError("norm box: Rw range does not cover truncationSigmas widths");
  }
  if (options.rhoLo && *options.rhoLo > std::max(0.0, s.rhoPeak - ns * s.relWidth)) {
    throw DomainError("norm box: rho lower edge cuts into the shell");
  }
  if (options.rhoHi && *options.rhoHi < s.rhoPeak + ns * s.relWidth) {
    throw DomainError("norm box: rho upper edge cuts into the shell");
  }
  return tabulate_impl(field, t, options, threads).totalMass;
}

double uncertainty_product(const PairAmplitudeField& field,
                           std::span<const DetectionEvent> events) {
  if (events.size() < 10000) {
    throw DomainError("uncertainty_product needs >= 10^4 events, got " +
                      std::to_string(events.size()));
  }
  double mean = 0.0;
  for (const DetectionEvent& e : events) mean += (e.position1() + e.position2()).x();
  mean /= static_cast<double>(events.size());
  double var = 0.0;
  for (const DetectionEvent& e : events) {
    const double d = (e.position1() + e.position2()).x() - mean;
    var += d * d;
  }
  var /= static_cast<double>(events.size() - 1);
  return field.momentum_spread() * std::sqrt(var) / UnitsConvention::hbar;
}

}  // namespace momalign
