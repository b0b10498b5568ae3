#include "momalign/quadrature.hpp"

#include "momalign/errors.hpp"
#include "momalign/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace momalign {

void QuadratureSpec::validate() const {
  if (pointsPerOscillation < 4) throw DomainError("pointsPerOscillation must be >= 4");
  if (!(truncationSigmas >= 3.0)) throw DomainError("truncationSigmas must be >= 3");
  if (!(relTolerance > 0.0)) throw DomainError("relTolerance must be > 0");
  if (maxGridPoints < 1) throw DomainError("maxGridPoints must be >= 1");
}

void MCOracleSpec::validate() const {
  if (sampleCount < 1000) {
    throw DomainError("MC oracle needs sampleCount >= 1000, got " + std::to_string(sampleCount));
  }
  if (batches < 10) throw DomainError("MC oracle needs batches >= 10");
}

double spherical_sinc(double x) {
  const double ax = std::abs(x);
  if (ax < 1e-4) {
    const double x2 = x * x;
    return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
  }
  return std::sin(ax) / ax;
}

double MCResult::stdErr() const { return std::hypot(stdErrRe, stdErrIm); }

namespace {

constexpr std::int64_t kMinNodes = 65;
constexpr Eigen::Index kRowBlock = 64;
constexpr Eigen::Index kColChunk = 32;

struct UniformGrid {
  double lo = 0.0;
  double h = 0.0;
  std::int64_t n = 1;  // odd, so the stride-2 subgrid ends on the same node
};

UniformGrid make_grid(const Window& w, double frequency, int ppo) {
  UniformGrid g;
  g.lo = w.lo;
  const double width = w.width();
  if (!(width > 0.0)) {
    g.n = 1;
    g.h = 0.0;
    return g;
  }
  const double h = 2.0 * kPi / (static_cast<double>(ppo) * std::max(frequency, 1e-300));
  double cells = std::ceil(width / h);
  if (!std::isfinite(cells) || cells > 1e15) cells = 1e15;
  auto n = static_cast<std::int64_t>(cells) + 1;
  n = std::max(n, kMinNodes);
  if (n % 2 == 0) ++n;
  g.n = n;
  g.h = width / static_cast<double>(n - 1);
  return g;
}

struct NodeSet {
  std::vector<double> x;
  std::vector<double> w;
};

NodeSet nodes(const UniformGrid& g, int stride) {
  NodeSet s;
  if (g.n == 1) {
    s.x = {g.lo};
    s.w = {0.0};
    return s;
  }
  const std::int64_t n = (g.n - 1) / stride + 1;
  s.x.resize(static_cast<std::size_t>(n));
  s.w.resize(static_cast<std::size_t>(n));
  const double step = g.h * stride;
  for (std::int64_t i = 0; i < n; ++i) {
    s.x[static_cast<std::size_t>(i)] = g.lo + static_cast<double>(i) * step;
    s.w[static_cast<std::size_t>(i)] = (i == 0 || i == n - 1) ? 0.5 * step : step;
  }
  return s;
}

struct Grids {
  UniformGrid p;
  UniformGrid k;
};

Grids choose_grids(const ReducedIntegrand& f, const QuadratureSpec& spec, double rwMax,
                   double rhoMax, double t) {
  spec.validate();
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("time must be finite and >= 0");
  const double fp = rwMax + f.pWindow.hi * std::abs(t) / f.totalMass + f.pBandwidth;
  const double fk = rhoMax + f.kWindow.hi * std::abs(t) / f.reducedMass + f.kBandwidth;
  Grids g{make_grid(f.pWindow, fp, spec.pointsPerOscillation),
          make_grid(f.kWindow, fk, spec.pointsPerOscillation)};
  const double total = static_cast<double>(g.p.n) * static_cast<double>(g.k.n);
  if (total > static_cast<double>(spec.maxGridPoints)) {
    const auto required = total > 9.2e18 ? INT64_MAX : static_cast<std::int64_t>(total);
    throw ResourceError("reduced quadrature needs " + std::to_string(required) +
                            " grid points, more than maxGridPoints=" +
                            std::to_string(spec.maxGridPoints),
                        required);
  }
  return g;
}

// Sum over the (P, k) nodes for every target. `pairs` selects the diagonal
// (rw[j], rho[j]) targets instead of the full tensor product.
Eigen::MatrixXcd reduced_sum(const ReducedIntegrand& f, const NodeSet& ps, const NodeSet& ks,
                             std::span<const double> rw, std::span<const double> rho, double t,
                             bool pairs, unsigned threads) {
  const auto nP = static_cast<Eigen::Index>(ps.x.size());
  const auto nK = static_cast<Eigen::Index>(ks.x.size());
  const auto nRho = static_cast<Eigen::Index>(rho.size());
  const auto nRw = static_cast<Eigen::Index>(rw.size());
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(pairs ? 1 : nRw, nRho);
  if (nRho == 0 || nRw == 0) return out;

  // K(l, j) = w_l k_l^2 j0(k_l rho_j) exp(-i k_l^2 t / (2 mu)), split in re/im.
  Eigen::MatrixXd kre(nK, nRho);
  Eigen::MatrixXd kim(nK, nRho);
  std::vector<Complex> kphase(static_cast<std::size_t>(nK));
  for (Eigen::Index l = 0; l < nK; ++l) {
    const double k = ks.x[static_cast<std::size_t>(l)];
    kphase[static_cast<std::size_t>(l)] =
        ks.w[static_cast<std::size_t>(l)] * k * k * std::polar(1.0, -k * k * t / (2.0 * f.reducedMass));
  }
  parallel_for(static_cast<std::size_t>(nRho), threads, [&](std::size_t j) {
    const double r = rho[j];
    const auto col = static_cast<Eigen::Index>(j);
    for (Eigen::Index l = 0; l < nK; ++l) {
      const double j0 = spherical_sinc(ks.x[static_cast<std::size_t>(l)] * r);
      const Complex c = kphase[static_cast<std::size_t>(l)] * j0;
      kre(l, col) = c.real();
      kim(l, col) = c.imag();
    }
  });

  std::vector<Complex> pphase(static_cast<std::size_t>(nP));
  for (Eigen::Index i = 0; i < nP; ++i) {
    const double p = ps.x[static_cast<std::size_t>(i)];
    pphase[static_cast<std::size_t>(i)] =
        ps.w[static_cast<std::size_t>(i)] * p * p * std::polar(1.0, -p * p * t / (2.0 * f.totalMass));
  }

  const double kLo = ks.x.front();
  const double kStep = nK > 1 ? ks.x[1] - ks.x[0] : 1.0;
  const Eigen::Index nChunks = (nRho + kColChunk - 1) / kColChunk;

  for (Eigen::Index i0 = 0; i0 < nP; i0 += kRowBlock) {
    const Eigen::Index nb = std::min(kRowBlock, nP - i0);
    Eigen::Index l0 = 0;
    Eigen::Index l1 = nK;
    if (f.kBand && nK > 1) {
      const Window band = f.kBand(ps.x[static_cast<std::size_t>(i0)],
                                  ps.x[static_cast<std::size_t>(i0 + nb - 1)]);
      if (!(band.hi > band.lo)) continue;
      l0 = std::clamp<Eigen::Index>(
          static_cast<Eigen::Index>(std::floor((band.lo - kLo) / kStep)) - 1, 0, nK);
      l1 = std::clamp<Eigen::Index>(
          static_cast<Eigen::Index>(std::ceil((band.hi - kLo) / kStep)) + 2, 0, nK);
      if (l1 <= l0) continue;
    }
    const Eigen::Index nl = l1 - l0;

    Eigen::MatrixXd W(nb, nl);
    parallel_for(static_cast<std::size_t>(nb), threads, [&](std::size_t r) {
      const auto row = static_cast<Eigen::Index>(r);
      const double p = ps.x[static_cast<std::size_t>(i0 + row)];
      for (Eigen::Index l = 0; l < nl; ++l) {
        W(row, l) = f.envelope(p, ks.x[static_cast<std::size_t>(l0 + l)]);
      }
    });
    if (W.isZero(0.0)) continue;

    Eigen::MatrixXcd A;
    if (!pairs) {
      A.resize(nRw, nb);
      for (Eigen::Index r = 0; r < nRw; ++r) {
        for (Eigen::Index b = 0; b < nb; ++b) {
          const auto idx = static_cast<std::size_t>(i0 + b);
          A(r, b) = pphase[idx] * spherical_sinc(ps.x[idx] * rw[static_cast<std::size_t>(r)]);
        }
      }
    }

    parallel_for(static_cast<std::size_t>(nChunks), threads, [&](std::size_t c) {
      const Eigen::Index c0 = static_cast<Eigen::Index>(c) * kColChunk;
      const Eigen::Index nc = std::min(kColChunk, nRho - c0);
      const Eigen::MatrixXd ire = W * kre.block(l0, c0, nl, nc);
      const Eigen::MatrixXd iim = W * kim.block(l0, c0, nl, nc);
      Eigen::MatrixXcd inner(nb, nc);
      inner.real() = ire;
      inner.imag() = iim;
      if (!pairs) {
        out.middleCols(c0, nc).noalias() += A * inner;
      } else {
        for (Eigen::Index j = 0; j < nc; ++j) {
          const double r = rw[static_cast<std::size_t>(c0 + j)];
          Complex acc{};
          for (Eigen::Index b = 0; b < nb; ++b) {
            const auto idx = static_cast<std::size_t>(i0 + b);
            acc += pphase[idx] * spherical_sinc(ps.x[idx] * r) * inner(b, j);
          }
          out(0, c0 + j) += acc;
        }
      }
    });
  }
  return out;
}

double span_max(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

void check_targets(std::span<const double> v, const char* name) {
  for (double x : v) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw DomainError(std::string(name) + " targets must be finite and >= 0");
    }
  }
}

}  // namespace

QuadratureResult integrate_reduced_2d(const ReducedIntegrand& integrand,
                                      const QuadratureSpec& spec, const PhaseScales& scales) {
  const double rw[1] = {scales.Rw};
  const double rho[1] = {scales.rho};
  const PairQuadrature q = integrate_reduced_2d_pairs(integrand, spec, rw, rho, scales.t, 1);
  QuadratureResult r;
  r.value = q.value[0];
  r.error = q.error[0];
  r.accuracyWarning = r.error > spec.relTolerance * std::abs(r.value);
  r.pNodes = q.pNodes;
  r.kNodes = q.kNodes;
  return r;
}

GridQuadrature integrate_reduced_2d_grid(const ReducedIntegrand& integrand,
                                         const QuadratureSpec& spec,
                                         std::span<const double> rw,
                                         std::span<const double> rho, double t,
                                         unsigned threads) {
  check_targets(rw, "Rw");
  check_targets(rho, "rho");
  const Grids g = choose_grids(integrand, spec, span_max(rw), span_max(rho), t);
  GridQuadrature out;
  out.pNodes = g.p.n;
  out.kNodes = g.k.n;
  out.value = reduced_sum(integrand, nodes(g.p, 1), nodes(g.k, 1), rw, rho, t, false, threads);
  const Eigen::MatrixXcd coarse =
      reduced_sum(integrand, nodes(g.p, 2), nodes(g.k, 2), rw, rho, t, false, threads);
  out.error = (out.value - coarse).cwiseAbs();
  out.maxError = out.error.size() ? out.error.maxCoeff() : 0.0;
  out.maxAbs = out.value.size() ? out.value.cwiseAbs().maxCoeff() : 0.0;
  out.accuracyWarning = out.maxError > spec.relTolerance * out.maxAbs;
  return out;
}

PairQuadrature integrate_reduced_2d_pairs(const ReducedIntegrand& integrand,
                                          const QuadratureSpec& spec,
                                          std::span<const double> rw,
                                          std::span<const double> rho, double t,
                                          unsigned threads) {
  if (rw.size() != rho.size()) throw DomainError("Rw and rho target lists differ in length");
  check_targets(rw, "Rw");
  check_targets(rho, "rho");
  const Grids g = choose_grids(integrand, spec, span_max(rw), span_max(rho), t);
  const Eigen::MatrixXcd fine =
      reduced_sum(integrand, nodes(g.p, 1), nodes(g.k, 1), rw, rho, t, true, threads);
  const Eigen::MatrixXcd coarse =
      reduced_sum(integrand, nodes(g.p, 2), nodes(g.k, 2), rw, rho, t, true, threads);
  PairQuadrature out;
  out.pNodes = g.p.n;
  out.kNodes = g.k.n;
  out.value.resize(rw.size());
  out.error.resize(rw.size());
  for (std::size_t j = 0; j < rw.size(); ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    out.value[j] = fine(0, col);
    out.error[j] = std::abs(fine(0, col) - coarse(0, col));
    out.maxError = std::max(out.maxError, out.error[j]);
    out.maxAbs = std::max(out.maxAbs, std::abs(out.value[j]));
  }
  out.accuracyWarning = out.maxError > spec.relTolerance * out.maxAbs;
  return out;
}

MCResult mc_oracle_6d(const SixDIntegrand& integrand, const MCOracleSpec& spec, const Vec3& r1,
                      const Vec3& r2, double t, unsigned threads) {
  spec.validate();
  const auto nb = static_cast<std::size_t>(spec.batches);
  const auto n = static_cast<std::size_t>(spec.sampleCount);
  std::vector<Complex> batchMean(nb);
  parallel_for(nb, threads, [&](std::size_t b) {
    const std::size_t begin = b * n / nb;
    const std::size_t end = (b + 1) * n / nb;
    Complex acc{};
    for (std::size_t i = begin; i < end; ++i) {
      CounterRng rng(spec.seed, i);
      const MomentumDraw d = integrand.draw(rng);
      if (d.weight == 0.0) continue;
      const double phase = d.p1.dot(r1) + d.p2.dot(r2);
      const double energy = d.p1.squaredNorm() / (2.0 * integrand.m1) +
                            d.p2.squaredNorm() / (2.0 * integrand.m2);
      // Mean of the draw and its mirror (-p1, -p2).
      acc += d.weight * std::cos(phase) * std::polar(1.0, -energy * t);
    }
    batchMean[b] = acc / static_cast<double>(end - begin);
  });

  // Batches have sizes differing by at most one; weight by size.
  Complex mean{};
  for (std::size_t b = 0; b < nb; ++b) {
    mean += batchMean[b] * static_cast<double>((b + 1) * n / nb - b * n / nb);
  }
  mean /= static_cast<double>(n);
  double vre = 0.0;
  double vim = 0.0;
  for (const Complex& m : batchMean) {
    vre += (m.real() - mean.real()) * (m.real() - mean.real());
    vim += (m.imag() - mean.imag()) * (m.imag() - mean.imag());
  }
  const double denom = static_cast<double>(nb) * static_cast<double>(nb - 1);
  MCResult r;
  r.value = mean;
  r.stdErrRe = std::sqrt(vre / denom);
  r.stdErrIm = std::sqrt(vim / denom);
  r.samples = spec.sampleCount;
  return r;
}

}  // namespace momalign
