#include "sonic/operator.hpp"

#include "sonic/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sonic {

BlockParameters BlockParameters::zeros(const BlockShape& shape) {
  BlockParameters p;
  p.shape = shape;
  const auto M = shape.modes, C = shape.in_channels, K = shape.out_channels, D = shape.dims;
  p.sigma.assign(M, 0.0);
  p.alpha.assign(M, 0.0);
  p.beta.assign(M, 0.0);
  p.t.assign(M, 0.0);
  p.u.assign(M * D, 0.0);
  p.rho = 0.0;
  p.B_re.assign(M * C, 0.0);
  p.B_im.assign(M * C, 0.0);
  p.C_re.assign(K * M, 0.0);
  p.C_im.assign(K * M, 0.0);
  p.W_s.assign(K * C, 0.0);
  return p;
}

std::size_t BlockParameters::spectral_scalar_count() const {
  std::size_t n = 0;
  visit([&](std::string_view key, std::span<const double> values) {
    if (key != "W_s") n += values.size();
  });
  return n;
}

std::size_t BlockParameters::scalar_count() const {
  std::size_t n = 0;
  visit([&](std::string_view, std::span<const double> values) { n += values.size(); });
  return n;
}

ModeRaw SonicBlock::raw_mode(std::size_t m) const {
  const auto D = shape().dims;
  ModeRaw raw;
  raw.sigma = params.sigma.at(m);
  raw.alpha = params.alpha.at(m);
  raw.beta = params.beta.at(m);
  raw.t = params.t.at(m);
  raw.u.assign(params.u.begin() + static_cast<std::ptrdiff_t>(m * D),
               params.u.begin() + static_cast<std::ptrdiff_t>((m + 1) * D));
  return raw;
}

Mode SonicBlock::mode(std::size_t m) const { return constrain_mode(raw_mode(m), stability()); }

void SonicBlock::validate() const {
  const auto& s = shape();
  if (s.modes == 0 || s.in_channels == 0 || s.out_channels == 0 || s.dims == 0)
    throw ConfigError("block: M, C, K and D must all be at least 1");
  const auto M = s.modes, C = s.in_channels, K = s.out_channels, D = s.dims;
  auto check = [](const std::vector<double>& v, std::size_t n, const char* name) {
    if (v.size() != n) throw ConfigError(std::string("block: ") + name + " has the wrong size");
  };
  check(params.sigma, M, "sigma");
  check(params.alpha, M, "alpha");
  check(params.beta, M, "beta");
  check(params.t, M, "t");
  check(params.u, M * D, "u");
  check(params.B_re, M * C, "B_re");
  check(params.B_im, M * C, "B_im");
  check(params.C_re, K * M, "C_re");
  check(params.C_im, K * M, "C_im");
  check(params.W_s, K * C, "W_s");
  if (!(options.epsilon > 0.0)) throw ConfigError("block: epsilon must be positive");
  if (!(options.mode_dropout >= 0.0 && options.mode_dropout < 1.0))
    throw ConfigError("block: mode dropout rate must lie in [0, 1)");
}

SonicBlock SonicBlock::initialize(const BlockShape& shape, const BlockOptions& options,
                                  CounterRng& rng, double rho) {
  StabilityConfig{rho, options.epsilon}.validate();
  SonicBlock block{BlockParameters::zeros(shape), options};
  auto& p = block.params;
  p.rho = rho;
  const auto M = shape.modes, C = shape.in_channels, K = shape.out_channels, D = shape.dims;
  for (std::size_t m = 0; m < M; ++m) {
    ModeRaw raw = initial_mode(D, rng);
    p.sigma[m] = raw.sigma;
    p.alpha[m] = raw.alpha;
    p.beta[m] = raw.beta;
    p.t[m] = raw.t;
    std::copy(raw.u.begin(), raw.u.end(), p.u.begin() + static_cast<std::ptrdiff_t>(m * D));
  }
  const double b_std = 1.0 / std::sqrt(2.0 * static_cast<double>(C));
  const double c_std = 1.0 / std::sqrt(2.0 * static_cast<double>(M));
  for (std::size_t i = 0; i < M * C; ++i) {
    p.B_re[i] = b_std * rng.normal();
    p.B_im[i] = b_std * rng.normal();
  }
  for (std::size_t i = 0; i < K * M; ++i) {
    p.C_re[i] = c_std * rng.normal();
    p.C_im[i] = c_std * rng.normal();
  }
  const double w_std = 1.0 / std::sqrt(static_cast<double>(C));
  for (auto& w : p.W_s) w = w_std * rng.normal();
  block.validate();
  return block;
}

SymbolTerms expand_symbol(const SonicBlock& block, const GridPtr& grid,
                          std::span<const double> mode_scale) {
  const auto& s = block.shape();
  if (grid->rank() != s.dims)
    throw std::invalid_argument("symbol: grid dimensionality does not match the block");
  const auto M = s.modes, C = s.in_channels, K = s.out_channels;
  const std::size_t bins = grid->half_size();

  SymbolTerms terms;
  terms.mode_scale.assign(M, 1.0);
  if (!mode_scale.empty()) {
    if (mode_scale.size() != M) throw std::invalid_argument("symbol: one dropout scale per mode");
    std::copy(mode_scale.begin(), mode_scale.end(), terms.mode_scale.begin());
  }

  terms.modes.reserve(M);
  terms.directions.reserve(M);
  terms.transfer.resize(M * bins);
  const std::size_t rows = grid->half_dims().front();
  const std::size_t per_row = bins / rows;
  const std::size_t slab =
      block.options.slab_rows == 0 ? rows : std::min(block.options.slab_rows, rows);
  std::vector<double> omega(s.dims);
  for (std::size_t m = 0; m < M; ++m) {
    terms.modes.push_back(block.mode(m));
    const Mode& mode = terms.modes.back();
    terms.directions.push_back(physical_direction(mode.direction, grid->spacings()));
    const auto& dir = terms.directions.back();
    complex* T = terms.transfer.data() + m * bins;
    for (std::size_t row0 = 0; row0 < rows; row0 += slab) {
      const std::size_t row1 = std::min(rows, row0 + slab);
      for (std::size_t n = row0 * per_row; n < row1 * per_row; ++n) {
        grid->half_omega(n, omega);
        T[n] = mode_response(dir, mode.scale, mode.pole_re, mode.pole_im, mode.transverse, omega);
      }
    }
  }

  const auto& p = block.params;
  terms.raw.assign(K * C * bins, complex(0.0, 0.0));
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t c = 0; c < C; ++c) {
      complex* H = terms.raw.data() + (k * C + c) * bins;
      for (std::size_t m = 0; m < M; ++m) {
        if (terms.mode_scale[m] == 0.0) continue;
        const complex coef = complex(p.C_re[k * M + m], p.C_im[k * M + m]) *
                             complex(p.B_re[m * C + c], p.B_im[m * C + c]) * terms.mode_scale[m];
        const complex* T = terms.transfer.data() + m * bins;
        for (std::size_t n = 0; n < bins; ++n) H[n] += coef * T[n];
      }
    }
  }

  terms.symbol = SpectralSymbol(K, C, grid);
  terms.gains.assign(K, 1.0);
  terms.gain_floored.assign(K, false);
  if (!block.options.gain_normalize) {
    terms.symbol.values = terms.raw;
    return terms;
  }
  const double count = static_cast<double>(C * bins);
  for (std::size_t k = 0; k < K; ++k) {
    double energy = 0.0;
    for (std::size_t i = k * C * bins; i < (k + 1) * C * bins; ++i) energy += std::norm(terms.raw[i]);
    const double g = std::sqrt(energy / count);
    terms.gain_floored[k] = !(g > kGainFloor);
    terms.gains[k] = terms.gain_floored[k] ? kGainFloor : g;
    const double inv = 1.0 / terms.gains[k];
    for (std::size_t i = k * C * bins; i < (k + 1) * C * bins; ++i)
      terms.symbol.values[i] = terms.raw[i] * inv;
  }
  return terms;
}

SpectralSymbol assemble_symbol(const SonicBlock& block, const GridPtr& grid) {
  return std::move(expand_symbol(block, grid).symbol);
}

SpectralSymbol rms_gain_normalize(SpectralSymbol symbol) {
  const std::size_t per_k = symbol.in_channels * symbol.bins();
  for (std::size_t k = 0; k < symbol.out_channels; ++k) {
    auto first = symbol.values.begin() + static_cast<std::ptrdiff_t>(k * per_k);
    double energy = 0.0;
    for (auto it = first; it != first + static_cast<std::ptrdiff_t>(per_k); ++it) energy += std::norm(*it);
    const double g = std::max(std::sqrt(energy / static_cast<double>(per_k)), kGainFloor);
    const double inv = 1.0 / g;
    for (auto it = first; it != first + static_cast<std::ptrdiff_t>(per_k); ++it) *it *= inv;
  }
  return symbol;
}

Spectrum apply_symbol(const SpectralSymbol& symbol, const Spectrum& X) {
  if (X.channels != symbol.in_channels)
    throw std::invalid_argument("apply_symbol: input channel count does not match the symbol");
  if (!X.grid || !(*X.grid == *symbol.grid))
    throw std::invalid_argument("apply_symbol: spectrum and symbol live on different grids");
  const std::size_t bins = symbol.bins();
  Spectrum Y(symbol.out_channels, symbol.grid);
  for (std::size_t k = 0; k < symbol.out_channels; ++k) {
    complex* y = Y.data.data() + k * bins;
    for (std::size_t c = 0; c < symbol.in_channels; ++c) {
      const complex* h = symbol.values.data() + (k * symbol.in_channels + c) * bins;
      const complex* x = X.data.data() + c * bins;
      for (std::size_t n = 0; n < bins; ++n) y[n] += h[n] * x[n];
    }
  }
  return enforce_dc_real(std::move(Y));
}

std::vector<double> dropout_scales(const SonicBlock& block, bool training, std::uint64_t seed) {
  const auto M = block.shape().modes;
  std::vector<double> scales(M, 1.0);
  const double p = block.options.mode_dropout;
  if (!training || p <= 0.0) return scales;
  CounterRng rng(seed);
  const double keep = 1.0 / (1.0 - p);
  for (auto& s : scales) s = rng.bernoulli(p) ? 0.0 : keep;
  return scales;
}

Signal project_channels(std::span<const double> weights, std::size_t out_channels, const Signal& x) {
  if (weights.size() != out_channels * x.channels)
    throw std::invalid_argument("project_channels: weight matrix does not match channels");
  Signal y(out_channels, x.grid);
  const std::size_t P = x.points();
  for (std::size_t k = 0; k < out_channels; ++k) {
    double* out = y.data.data() + k * P;
    for (std::size_t c = 0; c < x.channels; ++c) {
      const double w = weights[k * x.channels + c];
      if (w == 0.0) continue;
      const double* in = x.data.data() + c * P;
      for (std::size_t i = 0; i < P; ++i) out[i] += w * in[i];
    }
  }
  return y;
}

Signal block_preactivation(const SonicBlock& block, const SpectralSymbol& symbol, const Signal& x) {
  if (x.channels != block.shape().in_channels)
    throw std::invalid_argument("block: input channel count does not match the block");
  Signal z = dft_inverse(apply_symbol(symbol, dft_forward(x)));
  const Signal skip = project_channels(block.params.W_s, block.shape().out_channels, x);
  for (std::size_t i = 0; i < z.data.size(); ++i) z.data[i] += skip.data[i];
  return z;
}

constexpr double kInvSqrt2 = std::numbers::sqrt2 / 2.0;

double gelu(double x) noexcept { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_derivative(double x) noexcept {
  const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const double pdf = std::exp(-0.5 * x * x) * (std::numbers::inv_sqrtpi * kInvSqrt2);
  return cdf + x * pdf;
}

Signal block_forward(const SonicBlock& block, const Signal& x, bool training, std::uint64_t seed) {
  const auto scales = dropout_scales(block, training, seed);
  const SymbolTerms terms = expand_symbol(block, x.grid, scales);
  Signal z = block_preactivation(block, terms.symbol, x);
  for (double& v : z.data) v = gelu(v);
  return z;
}

void SonicNetwork::validate() const {
  if (blocks.empty()) throw ConfigError("network: at least one block is required");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].validate();
    if (i > 0 && blocks[i].shape().in_channels != blocks[i - 1].shape().out_channels)
      throw ConfigError("network: block " + std::to_string(i) +
                        " input channels do not match the previous block's output");
    if (blocks[i].shape().dims != blocks.front().shape().dims)
      throw ConfigError("network: all blocks must share the spatial dimensionality");
  }
  if (out_channels == 0) throw ConfigError("network: head needs at least one output channel");
  if (head.size() != out_channels * feature_channels())
    throw ConfigError("network: head matrix has the wrong size");
}

SonicNetwork SonicNetwork::create(const NetworkSpec& spec, std::uint64_t seed) {
  if (spec.depth == 0) throw ConfigError("network: depth must be at least 1");
  CounterRng root(seed);
  SonicNetwork net;
  for (std::size_t i = 0; i < spec.depth; ++i) {
    BlockShape shape{spec.modes, i == 0 ? spec.in_channels : spec.width, spec.width, spec.dims};
    auto rng = root.split(i);
    net.blocks.push_back(SonicBlock::initialize(shape, spec.options, rng, spec.rho));
  }
  net.out_channels = spec.out_channels;
  net.head.resize(spec.out_channels * spec.width);
  auto rng = root.split(spec.depth);
  const double std_head = 1.0 / std::sqrt(static_cast<double>(spec.width));
  for (auto& w : net.head) w = std_head * rng.normal();
  net.validate();
  return net;
}

std::size_t SonicNetwork::scalar_count() const {
  std::size_t n = 0;
  visit([&](const std::string&, std::span<const double> v) { n += v.size(); });
  return n;
}

NetworkGradient NetworkGradient::zeros_like(const SonicNetwork& net) {
  NetworkGradient g;
  for (const auto& b : net.blocks) g.blocks.push_back(BlockParameters::zeros(b.shape()));
  g.head.assign(net.head.size(), 0.0);
  return g;
}

Signal network_forward(const SonicNetwork& net, const Signal& x) {
  Signal h = x;
  for (const auto& block : net.blocks) h = block_forward(block, h);
  return project_channels(net.head, net.out_channels, h);
}

std::size_t count_parameters(std::size_t modes, std::size_t in_channels, std::size_t out_channels,
                             std::size_t dims) {
  const auto M = modes, C = in_channels, K = out_channels, D = dims;
  return 2 * K * M + 2 * M * C + (4 + D) * M + 1;
}

SpectralSymbol resample_to_grid(const SonicBlock& block, const GridPtr& new_grid) {
  if (new_grid->rank() != block.shape().dims)
    throw std::invalid_argument("resample_to_grid: grid dimensionality does not match the block");
  return assemble_symbol(block, new_grid);
}

std::vector<std::vector<complex>> mode_responses(const SonicBlock& block, const FrequencyGrid& grid) {
  if (grid.rank() != block.shape().dims)
    throw std::invalid_argument("mode_responses: grid dimensionality does not match the block");
  std::vector<std::vector<complex>> fields;
  for (std::size_t m = 0; m < block.shape().modes; ++m)
    fields.push_back(transfer_field(block.mode(m), grid, block.options.slab_rows));
  return fields;
}

SpatialKernel spatial_kernel(const SpectralSymbol& symbol, std::size_t k, std::size_t c) {
  if (k >= symbol.out_channels || c >= symbol.in_channels)
    throw std::invalid_argument("spatial_kernel: channel index out of range");
  const auto& grid = *symbol.grid;
  auto slice = symbol.slice(k, c);

  Spectrum one(1, symbol.grid);
  std::copy(slice.begin(), slice.end(), one.data.begin());
  SpatialKernel result{dft_inverse(one), 0.0};

  // Hermitian completion of the half-spectrum, then a full complex inverse.
  std::vector<complex> half(slice.begin(), slice.end());
  fft::project_self_conjugate(grid, half);
  const auto& dims = grid.dims();
  const std::size_t last = dims.back();
  const std::size_t hl = grid.half_dims().back();
  const std::size_t outer = grid.size() / last;
  auto reflect = [&](std::size_t o) {
    std::size_t r = 0, stride = 1;
    for (std::size_t d = dims.size() - 1; d-- > 0;) {
      const std::size_t n = dims[d], kk = o % n;
      o /= n;
      r += ((n - kk) % n) * stride;
      stride *= n;
    }
    return r;
  };
  std::vector<complex> full(grid.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < last; ++j) {
      full[o * last + j] = j < hl ? half[o * hl + j] : std::conj(half[reflect(o) * hl + (last - j)]);
    }
  }
  std::vector<complex> spatial(grid.size());
  fft::inverse_complex(grid, full, spatial);
  double max_re = 0.0, max_im = 0.0;
  for (const auto& v : spatial) {
    max_re = std::max(max_re, std::abs(v.real()));
    max_im = std::max(max_im, std::abs(v.imag()));
  }
  result.imaginary_residual = max_re > 0.0 ? max_im / max_re : max_im;
  return result;
}

}  // namespace sonic
