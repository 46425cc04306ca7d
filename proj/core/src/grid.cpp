#include "sonic/grid.hpp"

#include "sonic/rng.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <tuple>

namespace sonic {

FrequencyGrid::FrequencyGrid(std::vector<std::size_t> dims, std::vector<double> spacings)
    : dims_(std::move(dims)), spacings_(std::move(spacings)) {
  if (dims_.empty()) throw std::invalid_argument("frequency grid needs at least one axis");
  if (dims_.size() != spacings_.size())
    throw std::invalid_argument("frequency grid: dims and spacings differ in length");
  for (std::size_t d = 0; d < dims_.size(); ++d) {
    if (dims_[d] == 0) throw std::invalid_argument("frequency grid: dimension must be positive");
    if (!(spacings_[d] > 0.0) || !std::isfinite(spacings_[d]))
      throw std::invalid_argument("frequency grid: spacing must be positive and finite");
  }

  constexpr double two_pi = 2.0 * std::numbers::pi;
  freqs_.resize(dims_.size());
  size_ = 1;
  for (std::size_t d = 0; d < dims_.size(); ++d) {
    const std::size_t n = dims_[d];
    const double extent = static_cast<double>(n) * spacings_[d];
    const std::size_t positive = (n + 1) / 2;  // ceil(n/2)
    auto& f = freqs_[d];
    f.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double k = i < positive ? static_cast<double>(i)
                                    : -static_cast<double>(n - i);
      // (2*pi*k) / (N*Delta): doubling N and k scales both factors exactly,
      // so refined grids reproduce coarse frequencies bit for bit.
      f[i] = two_pi * k / extent;
    }
    size_ *= n;
  }
  half_dims_ = dims_;
  half_dims_.back() = dims_.back() / 2 + 1;
  half_size_ = 1;
  for (auto n : half_dims_) half_size_ *= n;
}

void FrequencyGrid::half_omega(std::size_t flat, std::span<double> omega) const {
  for (std::size_t d = rank(); d-- > 0;) {
    const std::size_t k = flat % half_dims_[d];
    flat /= half_dims_[d];
    omega[d] = freqs_[d][k];
  }
}

double FrequencyGrid::half_weight(std::size_t flat) const noexcept {
  const std::size_t last = dims_.back();
  const std::size_t j = flat % half_dims_.back();
  if (j == 0 || (last % 2 == 0 && j == last / 2)) return 1.0;
  return 2.0;
}

FrequencyGrid build_frequency_grid(std::vector<std::size_t> dims, std::vector<double> spacings) {
  return FrequencyGrid(std::move(dims), std::move(spacings));
}

GridPtr make_grid(std::vector<std::size_t> dims, std::vector<double> spacings) {
  return std::make_shared<const FrequencyGrid>(std::move(dims), std::move(spacings));
}

GridPtr make_grid(std::vector<std::size_t> dims) {
  std::vector<double> spacings(dims.size(), 1.0);
  return make_grid(std::move(dims), std::move(spacings));
}

Signal::Signal(std::size_t channels_, GridPtr grid_)
    : channels(channels_), grid(std::move(grid_)), data(channels * grid->size(), 0.0) {}

Spectrum::Spectrum(std::size_t channels_, GridPtr grid_)
    : channels(channels_), grid(std::move(grid_)), data(channels * grid->half_size()) {}

namespace fft {
namespace {

enum class PlanKind { r2c, c2r, c2c_backward };

class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(PlanKind kind, const std::vector<std::size_t>& dims) {
    std::lock_guard lock(mutex_);
    auto key = std::make_tuple(kind, dims);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;

    std::vector<int> n(dims.begin(), dims.end());
    std::size_t total = 1;
    for (auto d : dims) total *= d;
    std::size_t half = total / dims.back() * (dims.back() / 2 + 1);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    const int rank = static_cast<int>(n.size());

    fftw_plan plan = nullptr;
    // FFTW_ESTIMATE never touches the arrays during planning.
    std::vector<double> real(total);
    std::vector<complex> cplx(std::max(total, half));
    std::vector<complex> cplx_out(total);
    auto* c = reinterpret_cast<fftw_complex*>(cplx.data());
    switch (kind) {
      case PlanKind::r2c:
        plan = fftw_plan_dft_r2c(rank, n.data(), real.data(), c, flags);
        break;
      case PlanKind::c2r:
        plan = fftw_plan_dft_c2r(rank, n.data(), c, real.data(), flags);
        break;
      case PlanKind::c2c_backward:
        plan = fftw_plan_dft(rank, n.data(), c, reinterpret_cast<fftw_complex*>(cplx_out.data()),
                             FFTW_BACKWARD, flags);
        break;
    }
    if (!plan) throw std::runtime_error("FFTW failed to create a plan");
    plans_.emplace(std::move(key), plan);
    return plan;
  }

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mutex_;
  std::map<std::tuple<PlanKind, std::vector<std::size_t>>, fftw_plan> plans_;
};

// Multi-index over all axes but the last, reflected k -> (N - k) mod N.
std::size_t reflect_outer(const std::vector<std::size_t>& dims, std::size_t outer) {
  std::size_t result = 0;
  std::size_t stride = 1;
  for (std::size_t d = dims.size() - 1; d-- > 0;) {
    const std::size_t n = dims[d];
    const std::size_t k = outer % n;
    outer /= n;
    result += ((n - k) % n) * stride;
    stride *= n;
  }
  return result;
}

}  // namespace

void forward(const FrequencyGrid& grid, std::span<const double> in, std::span<complex> out) {
  if (in.size() != grid.size() || out.size() != grid.half_size())
    throw std::invalid_argument("fft::forward: buffer size does not match grid");
  fftw_plan plan = PlanCache::instance().get(PlanKind::r2c, grid.dims());
  // r2c leaves the input untouched.
  fftw_execute_dft_r2c(plan, const_cast<double*>(in.data()),
                       reinterpret_cast<fftw_complex*>(out.data()));
}

void project_self_conjugate(const FrequencyGrid& grid, std::span<complex> half) {
  const auto& dims = grid.dims();
  const std::size_t last = dims.back();
  const std::size_t hl = grid.half_dims().back();
  const std::size_t outer = grid.size() / last;
  auto project_plane = [&](std::size_t j) {
    for (std::size_t o = 0; o < outer; ++o) {
      const std::size_t p = reflect_outer(dims, o);
      if (p < o) continue;
      complex& a = half[o * hl + j];
      if (p == o) {
        a = complex(a.real(), 0.0);
        continue;
      }
      complex& b = half[p * hl + j];
      const complex sym = 0.5 * (a + std::conj(b));
      a = sym;
      b = std::conj(sym);
    }
  };
  project_plane(0);
  if (last % 2 == 0 && last / 2 != 0) project_plane(last / 2);
}

void inverse_unnormalized(const FrequencyGrid& grid, std::vector<complex> in, std::span<double> out) {
  if (in.size() != grid.half_size() || out.size() != grid.size())
    throw std::invalid_argument("fft::inverse: buffer size does not match grid");
  project_self_conjugate(grid, in);
  fftw_plan plan = PlanCache::instance().get(PlanKind::c2r, grid.dims());
  fftw_execute_dft_c2r(plan, reinterpret_cast<fftw_complex*>(in.data()), out.data());
}

void inverse_complex(const FrequencyGrid& grid, std::span<const complex> full, std::span<complex> out) {
  if (full.size() != grid.size() || out.size() != grid.size())
    throw std::invalid_argument("fft::inverse_complex: buffer size does not match grid");
  std::vector<complex> scratch(full.begin(), full.end());
  fftw_plan plan = PlanCache::instance().get(PlanKind::c2c_backward, grid.dims());
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(scratch.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  const double scale = 1.0 / static_cast<double>(grid.size());
  for (auto& v : out) v *= scale;
}

}  // namespace fft

Spectrum dft_forward(const Signal& x) {
  if (!x.grid || x.data.size() != x.channels * x.grid->size())
    throw std::invalid_argument("dft_forward: signal shape does not match its grid");
  Spectrum X(x.channels, x.grid);
  for (std::size_t c = 0; c < x.channels; ++c) fft::forward(*x.grid, x.channel(c), X.channel(c));
  return X;
}

Signal dft_inverse(const Spectrum& X) {
  if (!X.grid || X.data.size() != X.channels * X.grid->half_size())
    throw std::invalid_argument("dft_inverse: spectrum shape does not match its grid");
  Signal x(X.channels, X.grid);
  const double scale = 1.0 / static_cast<double>(X.grid->size());
  for (std::size_t c = 0; c < X.channels; ++c) {
    auto in = X.channel(c);
    auto out = x.channel(c);
    fft::inverse_unnormalized(*X.grid, std::vector<complex>(in.begin(), in.end()), out);
    for (auto& v : out) v *= scale;
  }
  return x;
}

Spectrum enforce_dc_real(Spectrum X) {
  for (std::size_t c = 0; c < X.channels; ++c) {
    auto& dc = X.data[c * X.bins() + FrequencyGrid::dc_index()];
    dc = complex(dc.real(), 0.0);
  }
  return X;
}

Signal standardize_input(const Signal& x, double noise_scale, std::uint64_t seed) {
  if (!(noise_scale >= 0.0)) throw std::invalid_argument("standardize_input: negative noise scale");
  if (x.points() < 2) throw std::invalid_argument("standardize_input: channel needs more than one sample");
  Signal y = x;
  CounterRng rng(seed);
  const double n = static_cast<double>(x.points());
  for (std::size_t c = 0; c < x.channels; ++c) {
    auto ch = y.channel(c);
    double mean = 0.0;
    for (double v : ch) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : ch) var += (v - mean) * (v - mean);
    var /= n;
    const double scale = 1.0 / std::max(std::sqrt(var), 1e-6);
    for (double& v : ch) v = (v - mean) * scale;
    if (noise_scale > 0.0) {
      auto noise = rng.split(c);
      for (double& v : ch) v += noise_scale * noise.normal();
    }
  }
  return y;
}

}  // namespace sonic
