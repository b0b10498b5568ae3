#pragma once

#include "momalign/quadrature.hpp"

#include <complex>
#include <span>
#include <vector>

namespace momalign {

/// Free one-dimensional Gaussian packet with initial position spread sigma0
/// (standard deviation of |psi|^2) and mean momentum k.
struct GaussianPacket1D {
  double sigma0 = 1.0;
  double k = 0.0;
  double m = 1.0;
  double r0 = 0.0;

  void validate() const;
  double velocity() const { return k / m; }
  /// Standard deviation of |psi(x, t)|^2.
  double width(double t) const;
};

/// Exact evolution psi(x, t) = (2 pi)^(-1/2) int phi(p) exp(i (p x - p^2 t / 2m)) dp
/// with phi(p) = (2 sigma0^2 / pi)^(1/4) exp(-sigma0^2 (p - k)^2 - i p r0).
std::complex<double> gaussian_closed_form(const GaussianPacket1D& packet, double x, double t);

/// Same integral by trapezoidal quadrature over the momentum window
/// k +- truncationSigmas / (sqrt(2) sigma0).
std::vector<std::complex<double>> propagate_numeric(const GaussianPacket1D& packet,
                                                    std::span<const double> xGrid, double t,
                                                    const QuadratureSpec& spec);

/// [mean - 8 width, mean + 8 width] with `points` nodes (at least 1024).
std::vector<double> auto_grid(const GaussianPacket1D& packet, double t, std::size_t points = 1024);

struct CentroidWidth {
  double mean = 0.0;
  double width = 0.0;
  double mass = 0.0;  ///< integral of |psi|^2 over the grid
};

/// Moments of |psi|^2 on a uniform grid. Throws DomainError when less than
/// 99.9% of the (unit-normalized) density lies on the grid.
CentroidWidth track_centroid_width(std::span<const double> xGrid,
                                   std::span<const std::complex<double>> psi);

}  // namespace momalign
