#include "sonic/modes.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace sonic {

void StabilityConfig::validate() const {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw std::invalid_argument("rho must be positive");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw std::invalid_argument("epsilon must be positive");
}

Mode constrain_mode(const ModeRaw& raw, const StabilityConfig& cfg) {
  if (!(cfg.epsilon > 0.0)) throw std::invalid_argument("constrain_mode: epsilon must be positive");
  if (!std::isfinite(cfg.rho)) throw std::invalid_argument("constrain_mode: rho must be finite");
  double norm2 = 0.0;
  for (double x : raw.u) norm2 += x * x;
  if (raw.u.empty() || !(norm2 > 0.0) || !std::isfinite(norm2))
    throw std::invalid_argument("constrain_mode: direction u must be non-zero and finite");
  const double norm = std::sqrt(norm2);

  Mode m;
  m.direction.resize(raw.u.size());
  std::transform(raw.u.begin(), raw.u.end(), m.direction.begin(),
                 [norm](double x) { return x / norm; });
  m.scale = softplus(raw.sigma) + cfg.epsilon;
  m.pole_re = -softplus(raw.alpha);
  m.pole_im = cfg.rho * std::tanh(raw.beta);
  m.transverse = softplus(raw.t);
  // softplus underflows to 0 for very negative alpha; keep the pole strictly stable.
  if (!(m.pole_re < 0.0)) m.pole_re = -std::numeric_limits<double>::min();
  return m;
}

std::vector<double> physical_direction(std::span<const double> v, std::span<const double> spacings) {
  if (v.size() != spacings.size())
    throw std::invalid_argument("physical_direction: direction and spacings differ in length");
  std::vector<double> w(v.size());
  double norm2 = 0.0;
  for (std::size_t d = 0; d < v.size(); ++d) {
    w[d] = v[d] / spacings[d];
    norm2 += w[d] * w[d];
  }
  const double norm = std::sqrt(norm2);
  for (double& x : w) x /= norm;
  return w;
}

complex transfer_at(const Mode& mode, std::span<const double> omega) {
  if (omega.size() != mode.direction.size())
    throw std::invalid_argument("transfer_at: frequency has wrong dimension");
  return mode_response(mode.direction, mode.scale, mode.pole_re, mode.pole_im, mode.transverse,
                       omega);
}

std::vector<complex> transfer_field(const Mode& mode, const FrequencyGrid& grid,
                                    std::size_t slab_rows) {
  if (mode.direction.size() != grid.rank())
    throw std::invalid_argument("transfer_field: mode and grid dimensionality differ");
  const auto dir = physical_direction(mode.direction, grid.spacings());
  const std::size_t rows = grid.half_dims().front();
  const std::size_t per_row = grid.half_size() / rows;
  const std::size_t slab = slab_rows == 0 ? rows : std::min(slab_rows, rows);

  std::vector<complex> field(grid.half_size());
  std::vector<double> omega(grid.rank());
  for (std::size_t row0 = 0; row0 < rows; row0 += slab) {
    const std::size_t row1 = std::min(rows, row0 + slab);
    for (std::size_t n = row0 * per_row; n < row1 * per_row; ++n) {
      grid.half_omega(n, omega);
      field[n] = mode_response(dir, mode.scale, mode.pole_re, mode.pole_im, mode.transverse, omega);
    }
  }
  return field;
}

ModeRaw initial_mode(std::size_t dims, CounterRng& rng) {
  ModeRaw raw;
  raw.u.resize(dims);
  if (dims == 2) {
    const double theta = rng.uniform(0.0, std::numbers::pi);
    raw.u = {std::cos(theta), std::sin(theta)};
  } else {
    double norm2 = 0.0;
    do {
      norm2 = 0.0;
      for (double& x : raw.u) {
        x = rng.normal();
        norm2 += x * x;
      }
    } while (norm2 < 1e-12);
    for (double& x : raw.u) x /= std::sqrt(norm2);
  }
  raw.sigma = 0.0;
  raw.alpha = 0.0;
  raw.beta = rng.uniform(-0.5, 0.5);
  raw.t = -2.0;
  return raw;
}

}  // namespace sonic
