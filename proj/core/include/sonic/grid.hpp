#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace sonic {

using complex = std::complex<double>;

/// Sample counts, physical spacings and the angular DFT frequencies they induce.
///
/// Frequencies on axis d are 2*pi*k / (N_d * Delta_d) for the signed index k, stored
/// in canonical DFT order (0, 1, ..., ceil(N/2)-1, -floor(N/2), ..., -1). Every
/// piece of code that maps a spectrum index to an angular frequency goes through
/// this table, so symbol evaluation and transform layout cannot disagree.
///
/// Spectra are stored as half-spectra: the last axis keeps floor(N_D/2)+1 bins.
class FrequencyGrid {
 public:
  FrequencyGrid(std::vector<std::size_t> dims, std::vector<double> spacings);

  std::size_t rank() const noexcept { return dims_.size(); }
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  const std::vector<double>& spacings() const noexcept { return spacings_; }
  const std::vector<double>& freqs(std::size_t axis) const { return freqs_.at(axis); }

  /// Number of spatial samples N = prod N_d.
  std::size_t size() const noexcept { return size_; }
  /// dims() with the last axis reduced to floor(N_D/2)+1.
  const std::vector<std::size_t>& half_dims() const noexcept { return half_dims_; }
  std::size_t half_size() const noexcept { return half_size_; }

  /// Angular frequency vector of half-spectrum bin `flat`.
  void half_omega(std::size_t flat, std::span<double> omega) const;
  /// Multiplicity of a half-spectrum bin in the full spectrum: 1 on the
  /// self-conjugate planes (last index 0 and, for even N_D, N_D/2), else 2.
  double half_weight(std::size_t flat) const noexcept;
  /// Flat half-spectrum index of the all-zero frequency.
  static constexpr std::size_t dc_index() noexcept { return 0; }

  bool operator==(const FrequencyGrid& other) const noexcept {
    return dims_ == other.dims_ && spacings_ == other.spacings_;
  }

 private:
  std::vector<std::size_t> dims_;
  std::vector<double> spacings_;
  std::vector<std::vector<double>> freqs_;
  std::vector<std::size_t> half_dims_;
  std::size_t size_ = 0;
  std::size_t half_size_ = 0;
};

using GridPtr = std::shared_ptr<const FrequencyGrid>;

FrequencyGrid build_frequency_grid(std::vector<std::size_t> dims, std::vector<double> spacings);
GridPtr make_grid(std::vector<std::size_t> dims, std::vector<double> spacings);
/// Unit spacing on every axis.
GridPtr make_grid(std::vector<std::size_t> dims);

/// Real field of shape channels x N_1 x ... x N_D, row-major, channel outermost.
struct Signal {
  std::size_t channels = 0;
  GridPtr grid;
  std::vector<double> data;

  Signal() = default;
  Signal(std::size_t channels, GridPtr grid);

  std::size_t points() const noexcept { return grid ? grid->size() : 0; }
  std::span<double> channel(std::size_t c) { return {data.data() + c * points(), points()}; }
  std::span<const double> channel(std::size_t c) const {
    return {data.data() + c * points(), points()};
  }
};

/// Complex half-spectrum of shape channels x N_1 x ... x (floor(N_D/2)+1).
struct Spectrum {
  std::size_t channels = 0;
  GridPtr grid;
  std::vector<complex> data;

  Spectrum() = default;
  Spectrum(std::size_t channels, GridPtr grid);

  std::size_t bins() const noexcept { return grid ? grid->half_size() : 0; }
  std::span<complex> channel(std::size_t c) { return {data.data() + c * bins(), bins()}; }
  std::span<const complex> channel(std::size_t c) const {
    return {data.data() + c * bins(), bins()};
  }
};

/// Unnormalized forward transform: X_k = sum_n x_n exp(-i w_k . n).
Spectrum dft_forward(const Signal& x);
/// Inverse transform with 1/N scaling. Self-conjugate planes are projected onto
/// their Hermitian part first, so any half-spectrum yields a well-defined real field.
Signal dft_inverse(const Spectrum& X);

/// Zeroes the imaginary part of the DC bin of every channel.
Spectrum enforce_dc_real(Spectrum X);

/// Per-channel zero mean / unit (population) variance, std floored at 1e-6,
/// followed by seeded Gaussian noise of scale noise_scale.
Signal standardize_input(const Signal& x, double noise_scale, std::uint64_t seed);

namespace fft {

/// Single-channel r2c, out has grid.half_size() entries.
void forward(const FrequencyGrid& grid, std::span<const double> in, std::span<complex> out);

/// Single-channel c2r without the 1/N factor: out = Re(sum_half w_k Z_k e^{i w_k.n}).
/// `in` is taken by value because the self-conjugate projection and FFTW's c2r
/// both overwrite it.
void inverse_unnormalized(const FrequencyGrid& grid, std::vector<complex> in, std::span<double> out);

/// Replaces Z on the self-conjugate planes by (Z(w) + conj Z(-w)) / 2.
void project_self_conjugate(const FrequencyGrid& grid, std::span<complex> half);

/// Full (non-reduced) complex inverse DFT with 1/N scaling, out has grid.size() entries.
void inverse_complex(const FrequencyGrid& grid, std::span<const complex> full, std::span<complex> out);

}  // namespace fft

}  // namespace sonic
