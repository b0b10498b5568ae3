#include "momalign/single_particle.hpp"

#include "momalign/errors.hpp"

#include <algorithm>
#include <cmath>

namespace momalign {

void GaussianPacket1D::validate() const {
  if (!(sigma0 > 0.0)) throw DomainError("sigma0 must be positive");
  if (!(m > 0.0)) throw DomainError("m must be positive");
}

double GaussianPacket1D::width(double t) const {
  const double tau = UnitsConvention::hbar * t / (2.0 * m * sigma0 * sigma0);
  return sigma0 * std::sqrt(1.0 + tau * tau);
}

std::complex<double> gaussian_closed_form(const GaussianPacket1D& packet, double x, double t) {
  packet.validate();
  if (t < 0.0) throw DomainError("t must be >= 0");
  using C = std::complex<double>;
  // Completing the square in q = p - k:
  // a = sigma0^2 + i t / 2m, b = x - r0 - k t / m.
  const C a{packet.sigma0 * packet.sigma0, t / (2.0 * packet.m)};
  const double b = x - packet.r0 - packet.k * t / packet.m;
  const double norm = std::pow(2.0 * packet.sigma0 * packet.sigma0 / kPi, 0.25) /
                      std::sqrt(2.0 * kPi);
  const C gauss = std::sqrt(kPi / a) * std::exp(-b * b / (4.0 * a));
  const double phase = packet.k * (x - packet.r0) - packet.k * packet.k * t / (2.0 * packet.m);
  return norm * gauss * std::polar(1.0, phase);
}

std::vector<std::complex<double>> propagate_numeric(const GaussianPacket1D& packet,
                                                    std::span<const double> xGrid, double t,
                                                    const QuadratureSpec& spec) {
  packet.validate();
  spec.validate();
  if (t < 0.0) throw DomainError("t must be >= 0");
  std::vector<std::complex<double>> out(xGrid.size());
  if (xGrid.empty()) return out;

  const double s = 1.0 / (std::sqrt(2.0) * packet.sigma0);  // std of the amplitude Gaussian
  const double half = spec.truncationSigmas * s;
  const double pLo = packet.k - half;
  const double pHi = packet.k + half;

  double xMax = 0.0;
  for (double x : xGrid) xMax = std::max(xMax, std::abs(x - packet.r0));
  const double rate = xMax + std::max(std::abs(pLo), std::abs(pHi)) * t / packet.m +
                      spec.truncationSigmas / s;
  const double h0 = 2.0 * kPi / (spec.pointsPerOscillation * rate);
  auto n = static_cast<std::int64_t>(std::ceil((pHi - pLo) / h0)) + 1;
  n = std::max<std::int64_t>(n, 65);
  if (n > spec.maxGridPoints) {
    throw ResourceError("single-particle quadrature needs " + std::to_string(n) + " nodes", n);
  }
  const double h = (pHi - pLo) / static_cast<double>(n - 1);

  const double amp = std::pow(2.0 * packet.sigma0 * packet.sigma0 / kPi, 0.25);
  std::vector<double> p(static_cast<std::size_t>(n));
  std::vector<std::complex<double>> phi(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const double pi_ = pLo + static_cast<double>(i) * h;
    const double q = pi_ - packet.k;
    const double w = (i == 0 || i == n - 1) ? 0.5 * h : h;
    p[static_cast<std::size_t>(i)] = pi_;
    phi[static_cast<std::size_t>(i)] =
        w * amp * std::exp(-packet.sigma0 * packet.sigma0 * q * q) *
        std::polar(1.0, -pi_ * packet.r0 - pi_ * pi_ * t / (2.0 * packet.m));
  }
  const double pre = 1.0 / std::sqrt(2.0 * kPi);
  for (std::size_t j = 0; j < xGrid.size(); ++j) {
    std::complex<double> acc{};
    for (std::size_t i = 0; i < p.size(); ++i) acc += phi[i] * std::polar(1.0, p[i] * xGrid[j]);
    out[j] = pre * acc;
  }
  return out;
}

std::vector<double> auto_grid(const GaussianPacket1D& packet, double t, std::size_t points) {
  packet.validate();
  points = std::max<std::size_t>(points, 1024);
  const double mean = packet.r0 + packet.velocity() * t;
  const double w = packet.width(t);
  std::vector<double> x(points);
  for (std::size_t i = 0; i < points; ++i) {
    x[i] = mean - 8.0 * w + 16.0 * w * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return x;
}

CentroidWidth track_centroid_width(std::span<const double> xGrid,
                                   std::span<const std::complex<double>> psi) {
  if (xGrid.size() != psi.size() || xGrid.size() < 3) {
    throw DomainError("grid and amplitudes must have equal length >= 3");
  }
  double m0 = 0.0;
  double m1 = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < xGrid.size(); ++i) {
    const double left = i > 0 ? xGrid[i] - xGrid[i - 1] : 0.0;
    const double right = i + 1 < xGrid.size() ? xGrid[i + 1] - xGrid[i] : 0.0;
    const double w = 0.5 * (left + right) * std::norm(psi[i]);
    m0 += w;
    m1 += w * xGrid[i];
    m2 += w * xGrid[i] * xGrid[i];
  }
  if (m0 < 0.999) {
    throw DomainError("only " + std::to_string(m0) + " of the density lies on the grid");
  }
  const double mean = m1 / m0;
  return {mean, std::sqrt(std::max(0.0, m2 / m0 - mean * mean)), m0};
}

}  // namespace momalign
