#pragma once

#include "sonic/grid.hpp"
#include "sonic/losses.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sonic {

/// 3x3 convolution, zero padding, no bias. Weights are out x in x 3 x 3.
struct ConvLayer {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::vector<double> weights;
};

struct ConvSpec {
  std::size_t in_channels = 3;
  std::size_t width = 8;
  std::size_t depth = 4;
  std::size_t out_channels = 3;
};

/// Local baseline: depth x (3x3 conv + GELU), then a pointwise head. The
/// receptive field of an output pixel is (2 depth + 1)^2. The same type holds
/// gradients.
struct ConvNet {
  std::vector<ConvLayer> layers;
  std::size_t out_channels = 0;
  std::vector<double> head;  ///< out_channels x width

  static ConvNet create(const ConvSpec& spec, std::uint64_t seed);
  static ConvNet zeros_like(const ConvNet& net);
  void validate() const;
  std::size_t in_channels() const { return layers.front().in_channels; }
  std::size_t feature_channels() const { return layers.back().out_channels; }
  std::size_t scalar_count() const;

  template <class F>
  void visit(F&& f) {
    for (std::size_t i = 0; i < layers.size(); ++i)
      f("layers." + std::to_string(i) + ".weight", std::span<double>(layers[i].weights));
    f(std::string("head"), std::span<double>(head));
  }
  template <class F>
  void visit(F&& f) const {
    for (std::size_t i = 0; i < layers.size(); ++i)
      f("layers." + std::to_string(i) + ".weight", std::span<const double>(layers[i].weights));
    f(std::string("head"), std::span<const double>(head));
  }
};

/// Scalars of a ConvSpec: 9 (C W + (depth - 1) W^2) + out W.
std::size_t conv_parameter_count(const ConvSpec& spec);

/// Width whose parameter count is closest to `budget` (smaller width on ties).
std::size_t matched_conv_width(std::size_t budget, std::size_t in_channels, std::size_t depth,
                               std::size_t out_channels);

Signal conv_forward(const ConvNet& net, const Signal& x);

struct ConvLossGradient {
  double loss = 0.0;
  ConvNet grad;
};

/// Mean batch loss and exact gradient; chunked ordered reduction as for the
/// spectral network.
ConvLossGradient conv_loss_and_gradients(const ConvNet& net, std::span<const Example> batch,
                                         const Objective& objective, std::vector<Signal>* outputs = nullptr);

double conv_batch_loss(const ConvNet& net, std::span<const Example> batch, const Objective& objective);

}  // namespace sonic
