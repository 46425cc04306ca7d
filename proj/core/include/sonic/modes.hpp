#pragma once

#include "sonic/grid.hpp"
#include "sonic/rng.hpp"

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace sonic {

/// Oscillation bound rho on |Im a| and scale floor epsilon on s.
struct StabilityConfig {
  double rho = std::numbers::pi;
  double epsilon = 1e-4;

  /// Throws std::invalid_argument unless rho > 0 and epsilon > 0.
  void validate() const;
};

/// Unconstrained parameters of one mode.
struct ModeRaw {
  double sigma = 0.0;  ///< scale, through softplus
  double alpha = 0.0;  ///< damping, through -softplus
  double beta = 0.0;   ///< oscillation, through rho * tanh
  double t = -2.0;     ///< transverse penalty, through softplus
  std::vector<double> u;  ///< unnormalized direction
};

/// Constrained mode: T(w) = 1 / (i s (w.v) - a + tau |(I - v v^T) w|^2).
struct Mode {
  std::vector<double> direction;
  double scale = 1.0;
  double pole_re = -1.0;
  double pole_im = 0.0;
  double transverse = 0.0;

  complex pole() const noexcept { return {pole_re, pole_im}; }
};

inline double softplus(double x) noexcept {
  // log(1 + e^x) without overflow for large |x|.
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double logistic(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Mode constrain_mode(const ModeRaw& raw, const StabilityConfig& cfg);

/// (D^-1 v) / |D^-1 v| with D = diag(spacings): the direction expressed in
/// physical units and renormalized.
std::vector<double> physical_direction(std::span<const double> v, std::span<const double> spacings);

/// Mode response at one angular frequency. `direction` is used as given.
///
/// The transverse energy is accumulated as sum_d (w_d - (w.v) v_d)^2 rather
/// than |w|^2 - (w.v)^2 so it is never negative, which keeps
/// |T| <= 1/|Re a| exact in floating point.
inline complex mode_response(std::span<const double> direction, double scale, double pole_re,
                             double pole_im, double transverse,
                             std::span<const double> omega) noexcept {
  double along = 0.0;
  for (std::size_t d = 0; d < direction.size(); ++d) along += omega[d] * direction[d];
  double across = 0.0;
  for (std::size_t d = 0; d < direction.size(); ++d) {
    const double r = omega[d] - along * direction[d];
    across += r * r;
  }
  const double re = -pole_re + transverse * across;
  const double im = scale * along - pole_im;
  const double den = re * re + im * im;
  return {re / den, -im / den};
}

complex transfer_at(const Mode& mode, std::span<const double> omega);

/// Mode response sampled on the half-spectrum of `grid`, with the direction
/// first mapped through physical_direction. slab_rows > 0 evaluates in blocks
/// of that many rows of the first axis; results do not depend on it.
std::vector<complex> transfer_field(const Mode& mode, const FrequencyGrid& grid,
                                    std::size_t slab_rows = 0);

/// Default initialization: for D = 2 the direction angle is uniform on [0, pi);
/// otherwise u is Gaussian. sigma = alpha = 0, beta ~ U(-0.5, 0.5), t = -2.
ModeRaw initial_mode(std::size_t dims, CounterRng& rng);

}  // namespace sonic
