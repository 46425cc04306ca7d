#include "sonic/gradients.hpp"

#include "sonic/errors.hpp"
#include "sonic/parallel.hpp"
#include "sonic/rng.hpp"
#include "sonic/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace sonic {
namespace {

constexpr std::size_t kChunk = 4;

struct BlockCache {
  Signal input;
  Spectrum input_spectrum;
  Signal preactivation;
};

struct ChunkAccumulator {
  double loss = 0.0;
  std::vector<std::vector<complex>> symbol_grad;  // per block, K x C x bins
  std::vector<std::vector<double>> skip_grad;     // per block, K x C
  std::vector<double> head_grad;
};

void check_batch(const SonicNetwork& net, std::span<const Example> batch) {
  if (batch.empty()) throw std::invalid_argument("batch must not be empty");
  const auto& grid = batch.front().input.grid;
  for (const auto& ex : batch) {
    if (!ex.input.grid || !(*ex.input.grid == *grid))
      throw std::invalid_argument("all batch inputs must share one grid");
    if (ex.input.channels != net.in_channels())
      throw std::invalid_argument("batch input channels do not match the network");
  }
}

Signal block_forward_cached(const SonicBlock& block, const SpectralSymbol& symbol, const Signal& x,
                            BlockCache& cache) {
  cache.input = x;
  cache.input_spectrum = dft_forward(x);
  cache.preactivation = dft_inverse(apply_symbol(symbol, cache.input_spectrum));
  const Signal skip = project_channels(block.params.W_s, block.shape().out_channels, x);
  for (std::size_t i = 0; i < skip.data.size(); ++i) cache.preactivation.data[i] += skip.data[i];
  Signal a = cache.preactivation;
  for (double& v : a.data) v = gelu(v);
  return a;
}

// Gradient of the block output a = gelu(z) back to the block input, accumulating
// the symbol and skip gradients.
Signal block_backward(const SonicBlock& block, const SpectralSymbol& symbol, const BlockCache& cache,
                      const Signal& grad_out, std::vector<complex>& symbol_grad,
                      std::vector<double>& skip_grad) {
  const auto& grid = *cache.input.grid;
  const std::size_t C = block.shape().in_channels, K = block.shape().out_channels;
  const std::size_t P = grid.size(), bins = grid.half_size();
  const double invN = 1.0 / static_cast<double>(P);

  Signal gz(K, cache.input.grid);
  for (std::size_t i = 0; i < gz.data.size(); ++i)
    gz.data[i] = grad_out.data[i] * gelu_derivative(cache.preactivation.data[i]);

  Signal gx(C, cache.input.grid);
  for (std::size_t k = 0; k < K; ++k) {
    const double* g = gz.data.data() + k * P;
    for (std::size_t c = 0; c < C; ++c) {
      const double* x = cache.input.data.data() + c * P;
      double* dx = gx.data.data() + c * P;
      const double w = block.params.W_s[k * C + c];
      double acc = 0.0;
      for (std::size_t i = 0; i < P; ++i) {
        acc += g[i] * x[i];
        dx[i] += w * g[i];
      }
      skip_grad[k * C + c] += acc;
    }
  }

  // y = Re(sum_half w Y e^{i w.n}) / N  =>  dL/dY = (w / N) rfft(dL/dy).
  std::vector<double> weight(bins);
  for (std::size_t n = 0; n < bins; ++n) weight[n] = grid.half_weight(n);
  Spectrum gY(K, cache.input.grid);
  for (std::size_t k = 0; k < K; ++k) {
    auto out = gY.channel(k);
    fft::forward(grid, gz.channel(k), out);
    for (std::size_t n = 0; n < bins; ++n) out[n] *= weight[n] * invN;
    out[FrequencyGrid::dc_index()] = complex(out[FrequencyGrid::dc_index()].real(), 0.0);
  }

  std::vector<complex> gX(C * bins, complex(0.0, 0.0));
  for (std::size_t k = 0; k < K; ++k) {
    const complex* gy = gY.data.data() + k * bins;
    for (std::size_t c = 0; c < C; ++c) {
      const complex* X = cache.input_spectrum.data.data() + c * bins;
      const complex* H = symbol.values.data() + (k * C + c) * bins;
      complex* gH = symbol_grad.data() + (k * C + c) * bins;
      complex* gx_c = gX.data() + c * bins;
      for (std::size_t n = 0; n < bins; ++n) {
        gH[n] += gy[n] * std::conj(X[n]);
        gx_c[n] += std::conj(H[n]) * gy[n];
      }
    }
  }

  // X = rfft(x)  =>  dL/dx = Re(sum_half g e^{i w.n}) = c2r(g / w).
  std::vector<double> spatial(P);
  for (std::size_t c = 0; c < C; ++c) {
    std::vector<complex> g(gX.begin() + static_cast<std::ptrdiff_t>(c * bins),
                           gX.begin() + static_cast<std::ptrdiff_t>((c + 1) * bins));
    for (std::size_t n = 0; n < bins; ++n) g[n] /= weight[n];
    fft::inverse_unnormalized(grid, std::move(g), spatial);
    double* dx = gx.data.data() + c * P;
    for (std::size_t i = 0; i < P; ++i) dx[i] += spatial[i];
  }
  return gx;
}

// Gradient of the normalized symbol back to the raw block parameters.
void symbol_backward(const SonicBlock& block, const SymbolTerms& terms, const FrequencyGrid& grid,
                     const std::vector<complex>& grad_symbol, BlockParameters& out) {
  const auto& s = block.shape();
  const std::size_t M = s.modes, C = s.in_channels, K = s.out_channels, D = s.dims;
  const std::size_t bins = grid.half_size();
  const auto& p = block.params;

  std::vector<complex> grad_raw(grad_symbol.size());
  if (block.options.gain_normalize) {
    const double count = static_cast<double>(C * bins);
    for (std::size_t k = 0; k < K; ++k) {
      const double g = terms.gains[k];
      const std::size_t first = k * C * bins, last = (k + 1) * C * bins;
      if (terms.gain_floored[k]) {
        for (std::size_t i = first; i < last; ++i) grad_raw[i] = grad_symbol[i] / g;
        continue;
      }
      double proj = 0.0;
      for (std::size_t i = first; i < last; ++i)
        proj += (std::conj(grad_symbol[i]) * terms.raw[i]).real();
      const double coef = proj / (g * g * g * count);
      for (std::size_t i = first; i < last; ++i) grad_raw[i] = grad_symbol[i] / g - terms.raw[i] * coef;
    }
  } else {
    grad_raw = grad_symbol;
  }

  std::vector<complex> grad_T(M * bins, complex(0.0, 0.0));
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t c = 0; c < C; ++c) {
      const complex* gR = grad_raw.data() + (k * C + c) * bins;
      for (std::size_t m = 0; m < M; ++m) {
        const double scale = terms.mode_scale[m];
        if (scale == 0.0) continue;
        const complex Ckm(p.C_re[k * M + m], p.C_im[k * M + m]);
        const complex Bmc(p.B_re[m * C + c], p.B_im[m * C + c]);
        const complex* T = terms.transfer.data() + m * bins;
        complex* gT = grad_T.data() + m * bins;
        const complex back = std::conj(Ckm * Bmc * scale);
        complex acc(0.0, 0.0);
        for (std::size_t n = 0; n < bins; ++n) {
          acc += gR[n] * std::conj(T[n]);
          gT[n] += back * gR[n];
        }
        const complex gC = acc * std::conj(Bmc) * scale;
        const complex gB = acc * std::conj(Ckm) * scale;
        out.C_re[k * M + m] += gC.real();
        out.C_im[k * M + m] += gC.imag();
        out.B_re[m * C + c] += gB.real();
        out.B_im[m * C + c] += gB.imag();
      }
    }
  }

  std::vector<double> omega(D), r(D), g_dir(D);
  for (std::size_t m = 0; m < M; ++m) {
    const Mode& mode = terms.modes[m];
    const auto& dir = terms.directions[m];
    const complex* T = terms.transfer.data() + m * bins;
    const complex* gT = grad_T.data() + m * bins;
    double g_scale = 0.0, g_pole_re = 0.0, g_pole_im = 0.0, g_tau = 0.0;
    std::fill(g_dir.begin(), g_dir.end(), 0.0);
    for (std::size_t n = 0; n < bins; ++n) {
      if (gT[n] == complex(0.0, 0.0)) continue;
      grid.half_omega(n, omega);
      // T = 1/den  =>  dL/dden = -conj(T)^2 dL/dT.
      const complex ct = std::conj(T[n]);
      const complex g_den = -(ct * ct) * gT[n];
      double along = 0.0;
      for (std::size_t d = 0; d < D; ++d) along += omega[d] * dir[d];
      double across = 0.0, r_dot_dir = 0.0;
      for (std::size_t d = 0; d < D; ++d) {
        r[d] = omega[d] - along * dir[d];
        across += r[d] * r[d];
        r_dot_dir += r[d] * dir[d];
      }
      g_scale += g_den.imag() * along;
      g_pole_re -= g_den.real();
      g_pole_im -= g_den.imag();
      g_tau += g_den.real() * across;
      const double g_along = g_den.imag() * mode.scale;
      const double g_across = g_den.real() * mode.transverse;
      for (std::size_t d = 0; d < D; ++d)
        g_dir[d] += g_along * omega[d] - 2.0 * g_across * (along * r[d] + r_dot_dir * omega[d]);
    }

    out.sigma[m] += g_scale * logistic(p.sigma[m]);
    out.alpha[m] += -g_pole_re * logistic(p.alpha[m]);
    const double th = std::tanh(p.beta[m]);
    out.beta[m] += g_pole_im * p.rho * (1.0 - th * th);
    out.rho += g_pole_im * th;
    out.t[m] += g_tau * logistic(p.t[m]);

    // dir = normalize(v / spacing), v = normalize(u).
    const double* u = p.u.data() + m * D;
    double u_norm = 0.0;
    for (std::size_t d = 0; d < D; ++d) u_norm += u[d] * u[d];
    u_norm = std::sqrt(u_norm);
    const auto& spacing = grid.spacings();
    double scaled_norm = 0.0;
    for (std::size_t d = 0; d < D; ++d) {
      const double w = mode.direction[d] / spacing[d];
      scaled_norm += w * w;
    }
    scaled_norm = std::sqrt(scaled_norm);
    double dot = 0.0;
    for (std::size_t d = 0; d < D; ++d) dot += dir[d] * g_dir[d];
    std::vector<double> g_v(D);
    for (std::size_t d = 0; d < D; ++d) g_v[d] = (g_dir[d] - dir[d] * dot) / scaled_norm / spacing[d];
    double dot_v = 0.0;
    for (std::size_t d = 0; d < D; ++d) dot_v += mode.direction[d] * g_v[d];
    for (std::size_t d = 0; d < D; ++d)
      out.u[m * D + d] += (g_v[d] - mode.direction[d] * dot_v) / u_norm;
  }
}

std::string first_nonfinite_key(const SonicNetwork& net, const NetworkGradient* grad) {
  std::string found;
  auto scan = [&](const std::string& key, std::span<const double> values) {
    if (!found.empty()) return;
    for (double v : values)
      if (!std::isfinite(v)) {
        found = key;
        return;
      }
  };
  net.visit(scan);
  if (found.empty() && grad) grad->visit(scan);
  return found.empty() ? std::string("activations") : found;
}

}  // namespace

LossGradient loss_and_gradients(const SonicNetwork& net, std::span<const Example> batch,
                                const Objective& objective, const ForwardOptions& options,
                                std::vector<Signal>* outputs) {
  net.validate();
  check_batch(net, batch);
  const GridPtr grid = batch.front().input.grid;
  const std::size_t L = net.blocks.size();
  const std::size_t bins = grid->half_size();

  std::vector<SymbolTerms> terms;
  terms.reserve(L);
  for (std::size_t i = 0; i < L; ++i) {
    const auto scales = dropout_scales(net.blocks[i], options.training, mix64(options.seed + i));
    terms.push_back(expand_symbol(net.blocks[i], grid, scales));
  }

  if (outputs) outputs->assign(batch.size(), Signal());
  const std::size_t chunks = (batch.size() + kChunk - 1) / kChunk;
  std::vector<ChunkAccumulator> acc(chunks);
  parallel_for(chunks, [&](std::size_t ci) {
    ChunkAccumulator& a = acc[ci];
    a.symbol_grad.resize(L);
    a.skip_grad.resize(L);
    for (std::size_t i = 0; i < L; ++i) {
      const auto& s = net.blocks[i].shape();
      a.symbol_grad[i].assign(s.out_channels * s.in_channels * bins, complex(0.0, 0.0));
      a.skip_grad[i].assign(s.out_channels * s.in_channels, 0.0);
    }
    a.head_grad.assign(net.head.size(), 0.0);

    std::vector<BlockCache> caches(L);
    const std::size_t end = std::min(batch.size(), (ci + 1) * kChunk);
    for (std::size_t b = ci * kChunk; b < end; ++b) {
      Signal h = batch[b].input;
      for (std::size_t i = 0; i < L; ++i)
        h = block_forward_cached(net.blocks[i], terms[i].symbol, h, caches[i]);
      Signal out = project_channels(net.head, net.out_channels, h);
      SampleLoss sl = evaluate_objective(objective, out, batch[b]);
      a.loss += sl.loss;

      const std::size_t F = net.feature_channels(), P = grid->size();
      Signal g(F, grid);
      for (std::size_t o = 0; o < net.out_channels; ++o) {
        const double* go = sl.grad.data.data() + o * P;
        for (std::size_t k = 0; k < F; ++k) {
          const double* feat = h.data.data() + k * P;
          double* gk = g.data.data() + k * P;
          const double w = net.head[o * F + k];
          double s = 0.0;
          for (std::size_t q = 0; q < P; ++q) {
            s += go[q] * feat[q];
            gk[q] += w * go[q];
          }
          a.head_grad[o * F + k] += s;
        }
      }
      for (std::size_t i = L; i-- > 0;)
        g = block_backward(net.blocks[i], terms[i].symbol, caches[i], g, a.symbol_grad[i], a.skip_grad[i]);
      if (outputs) (*outputs)[b] = std::move(out);
    }
  });

  // Ordered reduction.
  for (std::size_t ci = 1; ci < chunks; ++ci) {
    acc[0].loss += acc[ci].loss;
    for (std::size_t i = 0; i < L; ++i) {
      for (std::size_t j = 0; j < acc[0].symbol_grad[i].size(); ++j)
        acc[0].symbol_grad[i][j] += acc[ci].symbol_grad[i][j];
      for (std::size_t j = 0; j < acc[0].skip_grad[i].size(); ++j)
        acc[0].skip_grad[i][j] += acc[ci].skip_grad[i][j];
    }
    for (std::size_t j = 0; j < acc[0].head_grad.size(); ++j) acc[0].head_grad[j] += acc[ci].head_grad[j];
  }

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  LossGradient result;
  result.loss = acc[0].loss * inv_b;
  result.grad = NetworkGradient::zeros_like(net);
  for (std::size_t i = 0; i < L; ++i) {
    auto& gs = acc[0].symbol_grad[i];
    for (auto& v : gs) v *= inv_b;
    auto& bp = result.grad.blocks[i];
    for (std::size_t j = 0; j < bp.W_s.size(); ++j) bp.W_s[j] = acc[0].skip_grad[i][j] * inv_b;
    symbol_backward(net.blocks[i], terms[i], *grid, gs, bp);
  }
  for (std::size_t j = 0; j < result.grad.head.size(); ++j) result.grad.head[j] = acc[0].head_grad[j] * inv_b;

  if (!std::isfinite(result.loss))
    throw NonFiniteError("non-finite loss", first_nonfinite_key(net, &result.grad));
  return result;
}

double batch_loss(const SonicNetwork& net, std::span<const Example> batch, const Objective& objective) {
  check_batch(net, batch);
  double total = 0.0;
  for (const auto& ex : batch) total += objective_value(objective, network_forward(net, ex.input), ex);
  return total / static_cast<double>(batch.size());
}

NetworkGradient finite_difference_gradients(const SonicNetwork& net, std::span<const Example> batch,
                                            const Objective& objective, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite differences need h > 0");
  NetworkGradient grad = NetworkGradient::zeros_like(net);
  SonicNetwork probe = net;

  std::vector<std::span<double>> params, grads;
  probe.visit([&](const std::string&, std::span<double> v) { params.push_back(v); });
  grad.visit([&](const std::string&, std::span<double> v) { grads.push_back(v); });
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      const double original = params[b][i];
      const double step = h * std::max(1.0, std::abs(original));
      params[b][i] = original + step;
      const double up = batch_loss(probe, batch, objective);
      params[b][i] = original - step;
      const double down = batch_loss(probe, batch, objective);
      params[b][i] = original;
      grads[b][i] = (up - down) / (2.0 * step);
    }
  }
  return grad;
}

const BlockError& GradCheckReport::worst() const {
  if (blocks.empty()) throw std::logic_error("empty gradient check report");
  return *std::max_element(blocks.begin(), blocks.end(),
                           [](const auto& a, const auto& b) { return a.max_rel < b.max_rel; });
}

std::string GradCheckReport::to_csv() const {
  std::ostringstream os;
  os << "key,count,max_rel_error,mean_rel_error,pass\n";
  os << std::setprecision(6) << std::scientific;
  for (const auto& b : blocks)
    os << b.key << ',' << b.count << ',' << b.max_rel << ',' << b.mean_rel << ','
       << (b.max_rel < threshold ? "true" : "false") << '\n';
  return os.str();
}

GradCheckReport gradient_check(const SonicNetwork& net, std::span<const Example> batch,
                               const Objective& objective, double h, double threshold,
                               const std::function<void(NetworkGradient&)>& tamper) {
  LossGradient analytic = loss_and_gradients(net, batch, objective);
  if (tamper) tamper(analytic.grad);
  const NetworkGradient numeric = finite_difference_gradients(net, batch, objective, h);

  GradCheckReport report;
  report.threshold = threshold;
  std::vector<std::span<const double>> numeric_blocks;
  numeric.visit([&](const std::string&, std::span<const double> v) { numeric_blocks.push_back(v); });
  std::size_t b = 0;
  analytic.grad.visit([&](const std::string& key, std::span<const double> ga) {
    const auto gf = numeric_blocks[b++];
    BlockError e{key, ga.size(), 0.0, 0.0};
    for (std::size_t i = 0; i < ga.size(); ++i) {
      const double denom = std::max({std::abs(ga[i]), std::abs(gf[i]), 1e-8});
      const double rel = std::abs(ga[i] - gf[i]) / denom;
      e.max_rel = std::max(e.max_rel, rel);
      e.mean_rel += rel;
    }
    if (e.count > 0) e.mean_rel /= static_cast<double>(e.count);
    report.max_rel = std::max(report.max_rel, e.max_rel);
    report.blocks.push_back(std::move(e));
  });
  return report;
}

GradCheckSetup default_gradcheck_setup(std::uint64_t seed) {
  NetworkSpec spec;
  spec.in_channels = 2;
  spec.width = 2;
  spec.depth = 2;
  spec.modes = 2;
  spec.out_channels = kSynthShapeClasses;
  GradCheckSetup setup;
  setup.net = SonicNetwork::create(spec, mix64(seed));
  setup.objective.kind = ObjectiveKind::segmentation;
  setup.objective.num_classes = kSynthShapeClasses;
  const GridPtr grid = make_grid({16, 16});
  for (std::uint64_t i = 0; i < 2; ++i) {
    const TaskSample sample = gen_synthshape(mix64(seed) + i, 16);
    Example ex;
    ex.input = Signal(2, grid);
    for (std::size_t j = 0; j < ex.input.data.size(); ++j) ex.input.data[j] = sample.image.data[j] - 0.5;
    ex.mask = sample.mask;
    setup.batch.push_back(std::move(ex));
  }
  return setup;
}

}  // namespace sonic
