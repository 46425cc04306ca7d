#include "sonic/oracle.hpp"

#include "sonic/operator.hpp"
#include "sonic/rng.hpp"
#include "sonic/serialization.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace sonic::oracle {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

using Mat = Eigen::MatrixXcd;

Mat to_eigen(const ComplexMatrix& m) {
  Mat out(static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols));
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m(r, c);
  return out;
}

ComplexMatrix from_eigen(const Mat& m) {
  ComplexMatrix out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (std::size_t r = 0; r < out.rows; ++r)
    for (std::size_t c = 0; c < out.cols; ++c) out(r, c) = m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  return out;
}

std::vector<std::size_t> unravel(std::size_t flat, const std::vector<std::size_t>& dims) {
  std::vector<std::size_t> idx(dims.size());
  for (std::size_t d = dims.size(); d-- > 0;) {
    idx[d] = flat % dims[d];
    flat /= dims[d];
  }
  return idx;
}

std::size_t ravel(const std::vector<std::size_t>& idx, const std::vector<std::size_t>& dims) {
  std::size_t flat = 0;
  for (std::size_t d = 0; d < dims.size(); ++d) flat = flat * dims[d] + idx[d];
  return flat;
}

// exp(sign * 2 pi i sum_d k_d n_d / N_d), each term reduced modulo N_d first.
complex twiddle(const std::vector<std::size_t>& k, const std::vector<std::size_t>& n,
                const std::vector<std::size_t>& dims, int sign) {
  double turns = 0.0;
  for (std::size_t d = 0; d < dims.size(); ++d)
    turns += static_cast<double>((k[d] * n[d]) % dims[d]) / static_cast<double>(dims[d]);
  const double angle = sign * kTwoPi * turns;
  return {std::cos(angle), std::sin(angle)};
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

GridPtr random_grid(CounterRng& rng, std::size_t max_side) {
  const std::size_t h = 1 + rng.below(max_side), w = 1 + rng.below(max_side);
  return make_grid({h, w}, {rng.uniform(0.25, 2.0), rng.uniform(0.25, 2.0)});
}

Signal random_signal(std::size_t channels, const GridPtr& grid, CounterRng& rng) {
  Signal s(channels, grid);
  for (double& v : s.data) v = rng.normal();
  return s;
}

SonicBlock random_block(const BlockShape& shape, CounterRng& rng) {
  BlockOptions opts;
  opts.gain_normalize = rng.bernoulli(0.5);
  SonicBlock b = SonicBlock::initialize(shape, opts, rng);
  for (auto& v : b.params.sigma) v = rng.uniform(-2.0, 2.0);
  for (auto& v : b.params.alpha) v = rng.uniform(-2.0, 2.0);
  for (auto& v : b.params.beta) v = rng.uniform(-2.0, 2.0);
  for (auto& v : b.params.t) v = rng.uniform(-4.0, 1.0);
  return b;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

}  // namespace

void LtiSystem::validate() const {
  if (A.rows == 0 || A.rows != A.cols) throw std::invalid_argument("LTI system: A must be square and non-empty");
  if (B.rows != A.rows) throw std::invalid_argument("LTI system: B must have as many rows as A");
  if (C.cols != A.rows) throw std::invalid_argument("LTI system: C must have as many columns as A");
}

Signal circular_convolve_direct(const Signal& kernel, const Signal& x) {
  if (!kernel.grid || !x.grid || !(*kernel.grid == *x.grid))
    throw std::invalid_argument("circular_convolve_direct: kernel and input must share a grid");
  if (x.channels == 0 || kernel.channels % x.channels != 0)
    throw std::invalid_argument("circular_convolve_direct: kernel channels must be K * C");
  const std::size_t C = x.channels, K = kernel.channels / C;
  const auto& dims = x.grid->dims();
  const std::size_t N = x.grid->size();
  std::vector<std::vector<std::size_t>> index(N);
  for (std::size_t i = 0; i < N; ++i) index[i] = unravel(i, dims);

  Signal y(K, x.grid);
  std::vector<std::size_t> diff(dims.size());
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t tau = 0; tau < N; ++tau) {
      for (std::size_t d = 0; d < dims.size(); ++d) diff[d] = (index[n][d] + dims[d] - index[tau][d]) % dims[d];
      const std::size_t src = ravel(diff, dims);
      for (std::size_t k = 0; k < K; ++k)
        for (std::size_t c = 0; c < C; ++c)
          y.data[k * N + n] += kernel.data[(k * C + c) * N + tau] * x.data[c * N + src];
    }
  }
  return y;
}

std::vector<complex> dft_direct_full(const std::vector<std::size_t>& dims, std::span<const complex> x, int sign) {
  std::size_t N = 1;
  for (auto d : dims) N *= d;
  if (x.size() != N) throw std::invalid_argument("dft_direct_full: size does not match dims");
  std::vector<complex> out(N);
  for (std::size_t k = 0; k < N; ++k) {
    const auto kk = unravel(k, dims);
    complex acc(0.0, 0.0);
    for (std::size_t n = 0; n < N; ++n) acc += x[n] * twiddle(kk, unravel(n, dims), dims, sign);
    out[k] = acc;
  }
  return out;
}

Spectrum dft_direct(const Signal& x) {
  const auto& dims = x.grid->dims();
  const auto& half = x.grid->half_dims();
  const std::size_t N = x.grid->size();
  Spectrum X(x.channels, x.grid);
  for (std::size_t c = 0; c < x.channels; ++c) {
    for (std::size_t k = 0; k < x.grid->half_size(); ++k) {
      const auto kk = unravel(k, half);
      complex acc(0.0, 0.0);
      for (std::size_t n = 0; n < N; ++n) acc += x.data[c * N + n] * twiddle(kk, unravel(n, dims), dims, -1);
      X.data[c * x.grid->half_size() + k] = acc;
    }
  }
  return X;
}

ComplexMatrix resolvent_transfer(const LtiSystem& sys, complex s) {
  sys.validate();
  const Mat A = to_eigen(sys.A);
  const Mat M = s * Mat::Identity(A.rows(), A.cols()) - A;
  Eigen::FullPivLU<Mat> lu(M);
  if (!lu.isInvertible()) throw std::domain_error("resolvent_transfer: sI - A is singular");
  return from_eigen(to_eigen(sys.C) * lu.solve(to_eigen(sys.B)));
}

ComplexMatrix matrix_exponential(const ComplexMatrix& A) {
  if (A.rows != A.cols) throw std::invalid_argument("matrix_exponential: matrix must be square");
  const Mat a = to_eigen(A);
  const double norm = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Mat x = a / std::ldexp(1.0, squarings);

  constexpr int q = 6;
  double c = 1.0;
  const auto n = a.rows();
  Mat num = Mat::Identity(n, n), den = Mat::Identity(n, n), power = Mat::Identity(n, n);
  for (int k = 1; k <= q; ++k) {
    c *= static_cast<double>(q - k + 1) / static_cast<double>(k * (2 * q - k + 1));
    power = power * x;
    num += c * power;
    den += ((k % 2) ? -c : c) * power;
  }
  Mat e = den.partialPivLu().solve(num);
  for (int i = 0; i < squarings; ++i) e = e * e;
  return from_eigen(e);
}

ImpulseResponse impulse_response_numeric(const LtiSystem& sys, double t_max, double dt) {
  sys.validate();
  if (!(dt > 0.0) || !(t_max >= 0.0)) throw std::invalid_argument("impulse response needs dt > 0 and t_max >= 0");
  const auto steps = static_cast<std::size_t>(std::floor(t_max / dt + 1e-9));
  const Mat B = to_eigen(sys.B), C = to_eigen(sys.C);
  ImpulseResponse out;
  out.dt = dt;
  out.samples.reserve(steps + 1);
  ComplexMatrix At(sys.A.rows, sys.A.cols);
  for (std::size_t i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) * dt;
    for (std::size_t j = 0; j < At.data.size(); ++j) At.data[j] = sys.A.data[j] * t;
    out.samples.push_back(from_eigen(C * to_eigen(matrix_exponential(At)) * B));
  }
  return out;
}

ComplexMatrix numeric_laplace(const ImpulseResponse& k, complex s) {
  if (k.samples.empty()) throw std::invalid_argument("numeric_laplace: no samples");
  ComplexMatrix acc(k.samples.front().rows, k.samples.front().cols);
  const std::size_t last = k.samples.size() - 1;
  for (std::size_t i = 0; i <= last; ++i) {
    const double w = (i == 0 || i == last) ? 0.5 : 1.0;
    const complex f = w * k.dt * std::exp(-s * (static_cast<double>(i) * k.dt));
    for (std::size_t j = 0; j < acc.data.size(); ++j) acc.data[j] += f * k.samples[i].data[j];
  }
  return acc;
}

double s4nd_reduction_check(const Mode& mode, std::size_t axis, const FrequencyGrid& grid) {
  const std::size_t D = grid.rank();
  if (axis >= D || mode.direction.size() != D)
    throw std::invalid_argument("s4nd_reduction_check: axis or direction does not match the grid");
  if (mode.transverse != 0.0) throw std::invalid_argument("s4nd_reduction_check: mode must have zero transverse penalty");
  const auto dir = physical_direction(mode.direction, grid.spacings());
  for (std::size_t d = 0; d < D; ++d)
    if (std::abs(dir[d] - (d == axis ? 1.0 : 0.0)) > 1e-15)
      throw std::invalid_argument("s4nd_reduction_check: mode is not aligned with the axis");

  const auto field = transfer_field(mode, grid);
  std::vector<double> omega(D);
  double dev = 0.0;
  for (std::size_t n = 0; n < grid.half_size(); ++n) {
    grid.half_omega(n, omega);
    const complex expected = 1.0 / (complex(0.0, mode.scale * omega[axis]) - mode.pole());
    dev = std::max(dev, std::abs(field[n] - expected));
  }
  return dev;
}

double absorbed_identity_deviation(double scale, complex pole, double omega) {
  const Mode mode{{1.0, 0.0}, scale, pole.real(), pole.imag(), 0.0};
  const std::vector<double> w{omega, 0.0};
  const complex T = transfer_at(mode, w);
  LtiSystem sys;
  sys.A = ComplexMatrix(1, 1);
  sys.A(0, 0) = pole / scale;
  sys.B = ComplexMatrix(1, 1);
  sys.B(0, 0) = 1.0;
  sys.C = sys.B;
  const complex H = resolvent_transfer(sys, complex(0.0, omega))(0, 0);
  return std::abs(T - H / scale);
}

OracleCheck check_convolution_theorem(std::uint64_t seed, std::size_t pairs) {
  CounterRng rng = CounterRng(seed).split(1);
  double worst = 0.0;
  double worst_residual = 0.0;
  for (std::size_t p = 0; p < pairs; ++p) {
    const GridPtr grid = random_grid(rng, 8);
    const std::size_t C = 1 + rng.below(3), K = 1 + rng.below(3);
    SpectralSymbol symbol;
    if (p % 2 == 0) {
      symbol = assemble_symbol(random_block({1 + rng.below(4), C, K, 2}, rng), grid);
    } else {
      symbol = SpectralSymbol(K, C, grid);
      for (auto& v : symbol.values) v = complex(rng.normal(), rng.normal());
    }
    const Signal x = random_signal(C, grid, rng);
    const Signal fast = dft_inverse(apply_symbol(symbol, dft_forward(x)));

    Signal kernel(K * C, grid);
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t c = 0; c < C; ++c) {
        const auto sk = spatial_kernel(symbol, k, c);
        worst_residual = std::max(worst_residual, sk.imaginary_residual);
        std::copy(sk.kernel.data.begin(), sk.kernel.data.end(), kernel.channel(k * C + c).begin());
      }
    }
    const Signal direct = circular_convolve_direct(kernel, x);
    double diff = 0.0;
    for (std::size_t i = 0; i < fast.data.size(); ++i) diff = std::max(diff, std::abs(fast.data[i] - direct.data[i]));
    const double scale = std::max(max_abs(direct.data), 1e-300);
    worst = std::max(worst, diff / scale);
  }
  return {"convolution_theorem", worst < 1e-9, worst, 1e-9,
          std::to_string(pairs) + " random pairs up to 8x8; max kernel imaginary residual " + fmt(worst_residual)};
}

OracleCheck check_direct_dft(std::uint64_t seed) {
  CounterRng rng = CounterRng(seed).split(2);
  const std::vector<std::vector<std::size_t>> shapes{{16, 16}, {15, 9}, {7, 16}, {1, 5}, {13}, {16}, {3, 4, 5}, {2, 1}};
  double worst = 0.0;
  for (const auto& dims : shapes) {
    const GridPtr grid = make_grid(dims);
    const Signal x = random_signal(2, grid, rng);
    const Spectrum fast = dft_forward(x), direct = dft_direct(x);
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < fast.data.size(); ++i) {
      diff = std::max(diff, std::abs(fast.data[i] - direct.data[i]));
      scale = std::max(scale, std::abs(direct.data[i]));
    }
    worst = std::max(worst, diff / scale);
  }
  return {"direct_dft", worst < 1e-10, worst, 1e-10, "fast vs direct DFT, sizes up to 16 per axis incl. odd"};
}

OracleCheck check_dft_convolution(std::uint64_t seed) {
  CounterRng rng = CounterRng(seed).split(3);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const GridPtr grid = random_grid(rng, 8);
    const Signal f = random_signal(1, grid, rng), g = random_signal(1, grid, rng);
    const Signal conv = circular_convolve_direct(f, g);
    const std::vector<complex> fc(f.data.begin(), f.data.end()), gc(g.data.begin(), g.data.end()),
        cc(conv.data.begin(), conv.data.end());
    const auto& dims = grid->dims();
    const auto F = dft_direct_full(dims, fc, -1), G = dft_direct_full(dims, gc, -1), FG = dft_direct_full(dims, cc, -1);
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < F.size(); ++i) {
      diff = std::max(diff, std::abs(FG[i] - F[i] * G[i]));
      scale = std::max(scale, std::abs(FG[i]));
    }
    worst = std::max(worst, diff / std::max(scale, 1e-300));
  }
  return {"dft_convolution_theorem", worst < 1e-9, worst, 1e-9, "F(f*g) = F(f)F(g), direct transforms"};
}

OracleCheck check_resolution_invariance(std::uint64_t seed) {
  CounterRng rng = CounterRng(seed).split(4);
  NetworkSpec spec;
  spec.in_channels = 3;
  spec.width = 4;
  spec.depth = 1;
  spec.modes = 6;
  spec.out_channels = 2;
  SonicNetwork net = SonicNetwork::create(spec, rng.next_u64());
  for (auto& v : net.blocks[0].params.t) v = rng.uniform(-3.0, 1.0);
  const SonicNetwork loaded = network_from_json(network_to_json(net));
  const SonicBlock& block = loaded.blocks[0];

  const auto coarse_grid = make_grid({32, 32}, {1.0, 1.0});
  const auto fine_grid = make_grid({64, 64}, {1.0, 1.0});
  const auto coarse = mode_responses(block, *coarse_grid);
  const auto fine = mode_responses(block, *fine_grid);
  std::size_t mismatches = 0, compared = 0;
  std::vector<double> wc(2), wf(2);
  const auto& hc = coarse_grid->half_dims();
  const auto& hf = fine_grid->half_dims();
  for (std::size_t r = 0; r < hc[0]; ++r) {
    // Signed row index k on the coarse grid is row (2k mod 64) on the fine grid.
    const std::size_t rf = r < 16 ? 2 * r : 64 - 2 * (32 - r);
    for (std::size_t c = 0; c < hc[1]; ++c) {
      const std::size_t nc = r * hc[1] + c, nf = rf * hf[1] + 2 * c;
      coarse_grid->half_omega(nc, wc);
      fine_grid->half_omega(nf, wf);
      if (wc != wf) {
        ++mismatches;
        continue;
      }
      for (std::size_t m = 0; m < coarse.size(); ++m) {
        ++compared;
        if (coarse[m][nc] != fine[m][nf]) ++mismatches;
      }
    }
  }

  const std::vector<GridPtr> grids{make_grid({32, 32}, {1.0, 1.0}), make_grid({64, 64}, {0.5, 0.5}),
                                   make_grid({17, 23}, {0.3, 2.0}), make_grid({1, 1}, {1.0, 1.0})};
  const auto reference = expand_symbol(block, grids.front());
  const std::size_t bins0 = grids.front()->half_size();
  std::size_t dc_mismatches = 0;
  for (const auto& g : grids) {
    const auto terms = expand_symbol(block, g);
    const std::size_t bins = g->half_size();
    for (std::size_t kc = 0; kc < block.shape().out_channels * block.shape().in_channels; ++kc)
      if (terms.raw[kc * bins] != reference.raw[kc * bins0]) ++dc_mismatches;
  }
  const bool ok = mismatches == 0 && dc_mismatches == 0 && compared > 0;
  return {"resolution_invariance", ok, static_cast<double>(mismatches + dc_mismatches), 0.0,
          std::to_string(compared) + " shared (mode, frequency) values 32x32 -> 64x64 after a save/load round trip; " +
              std::to_string(dc_mismatches) + " DC mismatches over 4 grids"};
}

OracleCheck check_s4nd_reduction(std::uint64_t seed) {
  CounterRng rng = CounterRng(seed).split(5);
  double worst = 0.0;
  const std::vector<GridPtr> grids{make_grid({16, 16}), make_grid({16, 16}, {0.5, 1.5})};
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t axis = static_cast<std::size_t>(trial % 2);
    Mode mode;
    mode.direction = {axis == 0 ? 1.0 : 0.0, axis == 1 ? 1.0 : 0.0};
    mode.scale = rng.uniform(0.05, 3.0);
    mode.pole_re = -rng.uniform(0.05, 3.0);
    mode.pole_im = rng.uniform(-3.0, 3.0);
    mode.transverse = 0.0;
    worst = std::max(worst, s4nd_reduction_check(mode, axis, *grids[static_cast<std::size_t>(trial / 2) % 2]));
  }
  return {"s4nd_reduction", worst < 1e-15, worst, 1e-15, "axis-aligned, tau = 0 modes over 16x16 grids"};
}

OracleCheck check_absorbed_identity(std::uint64_t seed, std::size_t pairs) {
  CounterRng rng = CounterRng(seed).split(6);
  double worst = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const double s = rng.uniform(0.05, 5.0);
    const complex a(-rng.uniform(0.05, 5.0), rng.uniform(-5.0, 5.0));
    const double w = rng.uniform(-10.0, 10.0);
    worst = std::max(worst, absorbed_identity_deviation(s, a, w));
  }
  return {"absorbed_identity", worst < 1e-12, worst, 1e-12,
          std::to_string(pairs) + " random (s, a): T = (1/s) C (i w - a/s)^-1 B"};
}

OracleCheck check_stability_bound(std::uint64_t seed, std::size_t evaluations) {
  CounterRng rng = CounterRng(seed).split(7);
  double worst = 0.0;
  for (std::size_t i = 0; i < evaluations; ++i) {
    const std::size_t D = 1 + rng.below(3);
    ModeRaw raw;
    raw.sigma = rng.uniform(-8.0, 8.0);
    raw.alpha = rng.uniform(-8.0, 8.0);
    raw.beta = rng.uniform(-4.0, 4.0);
    raw.t = rng.uniform(-8.0, 4.0);
    raw.u.resize(D);
    for (auto& v : raw.u) v = rng.normal();
    const Mode mode = constrain_mode(raw, {rng.uniform(0.1, 10.0), 1e-4});
    std::vector<double> omega(D);
    for (auto& w : omega) w = rng.uniform(-10.0, 10.0);
    const double ratio = std::abs(transfer_at(mode, omega)) * std::abs(mode.pole_re);
    worst = std::max(worst, ratio);
  }
  return {"stability_bound", worst <= 1.0 + 1e-12, worst, 1.0 + 1e-12,
          "sup |T(w)| |Re a| over " + std::to_string(evaluations) + " random (mode, w)"};
}

OracleCheck check_parameter_count(std::uint64_t seed, std::size_t configs) {
  CounterRng rng = CounterRng(seed).split(8);
  std::size_t mismatches = 0;
  std::ostringstream detail;
  for (std::size_t i = 0; i < configs; ++i) {
    const BlockShape shape{1 + rng.below(16), 1 + rng.below(8), 1 + rng.below(8), 1 + rng.below(3)};
    const SonicBlock block = SonicBlock::initialize(shape, {}, rng);
    std::size_t enumerated = 0;
    block.params.visit([&](std::string_view key, std::span<const double> v) {
      if (key != "W_s") enumerated += v.size();
    });
    const std::size_t formula = count_parameters(shape.modes, shape.in_channels, shape.out_channels, shape.dims);
    if (enumerated != formula) ++mismatches;
    detail << (i ? "; " : "") << "M" << shape.modes << " C" << shape.in_channels << " K" << shape.out_channels << " D"
           << shape.dims << ": " << enumerated << "/" << formula;
  }
  return {"parameter_count", mismatches == 0, static_cast<double>(mismatches), 0.0, detail.str()};
}

OracleCheck check_resolvent_examples() {
  auto scalar = [](complex a) {
    LtiSystem s;
    s.A = ComplexMatrix(1, 1);
    s.A(0, 0) = a;
    s.B = ComplexMatrix(1, 1);
    s.B(0, 0) = 1.0;
    s.C = s.B;
    return s;
  };
  double worst = std::abs(resolvent_transfer(scalar(-1.0), 0.0)(0, 0) - 1.0);
  worst = std::max(worst, std::abs(resolvent_transfer(scalar(-1.0), complex(0.0, 1.0))(0, 0) - complex(0.5, -0.5)));
  LtiSystem diag;
  diag.A = ComplexMatrix(2, 2);
  diag.A(0, 0) = -1.0;
  diag.A(1, 1) = -2.0;
  diag.B = ComplexMatrix(2, 1);
  diag.B(0, 0) = diag.B(1, 0) = 1.0;
  diag.C = ComplexMatrix(1, 2);
  diag.C(0, 0) = diag.C(0, 1) = 1.0;
  worst = std::max(worst, std::abs(resolvent_transfer(diag, 0.0)(0, 0) - 1.5));
  bool singular_rejected = false;
  try {
    resolvent_transfer(scalar(-1.0), -1.0);
  } catch (const std::domain_error&) {
    singular_rejected = true;
  }
  return {"resolvent_examples", worst < 1e-14 && singular_rejected, worst, 1e-14,
          "scalar, diagonal and imaginary-axis resolvents; singular sI - A rejected"};
}

OracleCheck check_impulse_laplace() {
  LtiSystem sys;
  sys.A = ComplexMatrix(2, 2);
  sys.A(0, 0) = complex(-1.0, 0.5);
  sys.A(0, 1) = 0.3;
  sys.A(1, 1) = complex(-0.7, -1.0);
  sys.B = ComplexMatrix(2, 1);
  sys.B(0, 0) = 1.0;
  sys.B(1, 0) = complex(0.5, 0.2);
  sys.C = ComplexMatrix(1, 2);
  sys.C(0, 0) = 1.0;
  sys.C(0, 1) = -0.4;
  const auto k = impulse_response_numeric(sys, 40.0, 1e-3);
  const double at_zero = std::abs(k.samples.front()(0, 0) - (sys.C(0, 0) * sys.B(0, 0) + sys.C(0, 1) * sys.B(1, 0)));
  const double laplace = std::abs(numeric_laplace(k, complex(0.0, 1.0))(0, 0) - resolvent_transfer(sys, complex(0.0, 1.0))(0, 0));
  const bool ok = at_zero == 0.0 && laplace < 1e-3;
  return {"impulse_laplace", ok, laplace, 1e-3,
          "trapezoidal Laplace of C exp(At) B at s = i, t_max = 40, dt = 1e-3; |K(0) - CB| = " + fmt(at_zero)};
}

std::vector<OracleCheck> run_oracle_suite(std::uint64_t seed) {
  return {check_direct_dft(seed),        check_dft_convolution(seed),    check_convolution_theorem(seed),
          check_resolution_invariance(seed), check_s4nd_reduction(seed), check_absorbed_identity(seed),
          check_stability_bound(seed),   check_parameter_count(seed),    check_resolvent_examples(),
          check_impulse_laplace()};
}

}  // namespace sonic::oracle
