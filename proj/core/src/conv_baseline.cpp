#include "sonic/conv_baseline.hpp"

#include "sonic/errors.hpp"
#include "sonic/operator.hpp"
#include "sonic/parallel.hpp"
#include "sonic/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sonic {
namespace {

constexpr std::size_t kTaps = 9;
constexpr std::size_t kChunk = 4;

void check_2d(const Signal& x) {
  if (!x.grid || x.grid->rank() != 2) throw std::invalid_argument("conv baseline expects 2D signals");
}

// y[o] += sum_c w[o, c] (*) x[c], zero padding.
Signal conv3x3(const ConvLayer& layer, const Signal& x) {
  const std::size_t H = x.grid->dims()[0], W = x.grid->dims()[1], P = H * W;
  Signal y(layer.out_channels, x.grid);
  for (std::size_t o = 0; o < layer.out_channels; ++o) {
    double* out = y.data.data() + o * P;
    for (std::size_t c = 0; c < layer.in_channels; ++c) {
      const double* in = x.data.data() + c * P;
      const double* w = layer.weights.data() + (o * layer.in_channels + c) * kTaps;
      for (std::size_t di = 0; di < 3; ++di) {
        for (std::size_t dj = 0; dj < 3; ++dj) {
          const double wt = w[di * 3 + dj];
          const std::size_t r0 = di == 0 ? 1 : 0, r1 = di == 2 ? H - 1 : H;
          const std::size_t c0 = dj == 0 ? 1 : 0, c1 = dj == 2 ? W - 1 : W;
          for (std::size_t r = r0; r < r1; ++r) {
            const double* src = in + (r + di - 1) * W;
            double* dst = out + r * W;
            for (std::size_t q = c0; q < c1; ++q) dst[q] += wt * src[q + dj - 1];
          }
        }
      }
    }
  }
  return y;
}

// Accumulates dL/dw and returns dL/dx for y = conv3x3(x).
Signal conv3x3_backward(const ConvLayer& layer, const Signal& x, const Signal& gy, std::vector<double>& gw) {
  const std::size_t H = x.grid->dims()[0], W = x.grid->dims()[1], P = H * W;
  Signal gx(layer.in_channels, x.grid);
  for (std::size_t o = 0; o < layer.out_channels; ++o) {
    const double* g = gy.data.data() + o * P;
    for (std::size_t c = 0; c < layer.in_channels; ++c) {
      const double* in = x.data.data() + c * P;
      double* gin = gx.data.data() + c * P;
      const std::size_t base = (o * layer.in_channels + c) * kTaps;
      for (std::size_t di = 0; di < 3; ++di) {
        for (std::size_t dj = 0; dj < 3; ++dj) {
          const double wt = layer.weights[base + di * 3 + dj];
          const std::size_t r0 = di == 0 ? 1 : 0, r1 = di == 2 ? H - 1 : H;
          const std::size_t c0 = dj == 0 ? 1 : 0, c1 = dj == 2 ? W - 1 : W;
          double acc = 0.0;
          for (std::size_t r = r0; r < r1; ++r) {
            const std::size_t row = (r + di - 1) * W;
            for (std::size_t q = c0; q < c1; ++q) {
              acc += g[r * W + q] * in[row + q + dj - 1];
              gin[row + q + dj - 1] += wt * g[r * W + q];
            }
          }
          gw[base + di * 3 + dj] += acc;
        }
      }
    }
  }
  return gx;
}

struct Chunk {
  double loss = 0.0;
  ConvNet grad;
};

}  // namespace

ConvNet ConvNet::create(const ConvSpec& spec, std::uint64_t seed) {
  if (spec.depth == 0 || spec.width == 0 || spec.in_channels == 0 || spec.out_channels == 0)
    throw ConfigError("conv baseline: all sizes must be positive");
  CounterRng root(seed);
  ConvNet net;
  for (std::size_t i = 0; i < spec.depth; ++i) {
    ConvLayer layer{i == 0 ? spec.in_channels : spec.width, spec.width, {}};
    layer.weights.resize(layer.out_channels * layer.in_channels * kTaps);
    CounterRng rng = root.split(i);
    const double std_w = std::sqrt(2.0 / static_cast<double>(kTaps * layer.in_channels));
    for (double& w : layer.weights) w = std_w * rng.normal();
    net.layers.push_back(std::move(layer));
  }
  net.out_channels = spec.out_channels;
  net.head.resize(spec.out_channels * spec.width);
  CounterRng rng = root.split(spec.depth);
  const double std_head = 1.0 / std::sqrt(static_cast<double>(spec.width));
  for (double& w : net.head) w = std_head * rng.normal();
  return net;
}

ConvNet ConvNet::zeros_like(const ConvNet& net) {
  ConvNet g = net;
  for (auto& l : g.layers) std::fill(l.weights.begin(), l.weights.end(), 0.0);
  std::fill(g.head.begin(), g.head.end(), 0.0);
  return g;
}

void ConvNet::validate() const {
  if (layers.empty()) throw ConfigError("conv baseline: at least one layer is required");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.weights.size() != l.out_channels * l.in_channels * kTaps)
      throw ConfigError("conv baseline: layer " + std::to_string(i) + " has the wrong weight count");
    if (i > 0 && l.in_channels != layers[i - 1].out_channels)
      throw ConfigError("conv baseline: channel chain broken at layer " + std::to_string(i));
  }
  if (out_channels == 0 || head.size() != out_channels * feature_channels())
    throw ConfigError("conv baseline: head matrix has the wrong size");
}

std::size_t ConvNet::scalar_count() const {
  std::size_t n = head.size();
  for (const auto& l : layers) n += l.weights.size();
  return n;
}

std::size_t conv_parameter_count(const ConvSpec& s) {
  return kTaps * (s.in_channels * s.width + (s.depth - 1) * s.width * s.width) + s.out_channels * s.width;
}

std::size_t matched_conv_width(std::size_t budget, std::size_t in_channels, std::size_t depth,
                               std::size_t out_channels) {
  std::size_t best = 1;
  double best_gap = INFINITY;
  for (std::size_t w = 1; w <= 4096; ++w) {
    const auto n = conv_parameter_count({in_channels, w, depth, out_channels});
    const double gap = std::abs(static_cast<double>(n) - static_cast<double>(budget));
    if (gap < best_gap) {
      best_gap = gap;
      best = w;
    }
    if (n > budget) break;
  }
  return best;
}

Signal conv_forward(const ConvNet& net, const Signal& x) {
  check_2d(x);
  if (x.channels != net.in_channels()) throw std::invalid_argument("conv baseline: input channel mismatch");
  Signal h = x;
  for (const auto& layer : net.layers) {
    h = conv3x3(layer, h);
    for (double& v : h.data) v = gelu(v);
  }
  return project_channels(net.head, net.out_channels, h);
}

double conv_batch_loss(const ConvNet& net, std::span<const Example> batch, const Objective& objective) {
  if (batch.empty()) throw std::invalid_argument("batch must not be empty");
  double total = 0.0;
  for (const auto& ex : batch) total += objective_value(objective, conv_forward(net, ex.input), ex);
  return total / static_cast<double>(batch.size());
}

ConvLossGradient conv_loss_and_gradients(const ConvNet& net, std::span<const Example> batch,
                                         const Objective& objective, std::vector<Signal>* outputs) {
  net.validate();
  if (batch.empty()) throw std::invalid_argument("batch must not be empty");
  const std::size_t L = net.layers.size();
  if (outputs) outputs->assign(batch.size(), Signal());
  const std::size_t chunks = (batch.size() + kChunk - 1) / kChunk;
  std::vector<Chunk> acc(chunks);

  parallel_for(chunks, [&](std::size_t ci) {
    Chunk& a = acc[ci];
    a.grad = ConvNet::zeros_like(net);
    std::vector<Signal> inputs(L), pre(L);
    const std::size_t end = std::min(batch.size(), (ci + 1) * kChunk);
    for (std::size_t b = ci * kChunk; b < end; ++b) {
      check_2d(batch[b].input);
      Signal h = batch[b].input;
      for (std::size_t i = 0; i < L; ++i) {
        inputs[i] = h;
        pre[i] = conv3x3(net.layers[i], h);
        h = pre[i];
        for (double& v : h.data) v = gelu(v);
      }
      Signal out = project_channels(net.head, net.out_channels, h);
      SampleLoss sl = evaluate_objective(objective, out, batch[b]);
      a.loss += sl.loss;

      const std::size_t F = net.feature_channels(), P = h.points();
      Signal g(F, h.grid);
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
          a.grad.head[o * F + k] += s;
        }
      }
      for (std::size_t i = L; i-- > 0;) {
        for (std::size_t q = 0; q < g.data.size(); ++q) g.data[q] *= gelu_derivative(pre[i].data[q]);
        g = conv3x3_backward(net.layers[i], inputs[i], g, a.grad.layers[i].weights);
      }
      if (outputs) (*outputs)[b] = std::move(out);
    }
  });

  ConvLossGradient result{0.0, ConvNet::zeros_like(net)};
  for (auto& a : acc) {
    result.loss += a.loss;
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t q = 0; q < a.grad.layers[i].weights.size(); ++q)
        result.grad.layers[i].weights[q] += a.grad.layers[i].weights[q];
    for (std::size_t q = 0; q < a.grad.head.size(); ++q) result.grad.head[q] += a.grad.head[q];
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  result.loss *= inv;
  for (auto& l : result.grad.layers)
    for (double& v : l.weights) v *= inv;
  for (double& v : result.grad.head) v *= inv;
  if (!std::isfinite(result.loss)) throw NonFiniteError("non-finite loss", "conv baseline");
  return result;
}

}  // namespace sonic
