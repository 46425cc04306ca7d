#pragma once

#include "sonic/losses.hpp"
#include "sonic/operator.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace sonic {

struct ForwardOptions {
  bool training = false;  ///< enables mode dropout
  std::uint64_t seed = 0;
};

struct LossGradient {
  double loss = 0.0;  ///< mean over the batch
  NetworkGradient grad;
};

/// Mean batch loss and its exact gradient with respect to every raw parameter.
///
/// The reverse pass runs by hand over the fixed graph: objective, head, then
/// per block GELU, skip, inverse real DFT, symbol multiply, forward real DFT,
/// and once per batch back through gain normalization, rank-M mixing, the
/// mode responses, the physical-direction map and the reparameterizations.
/// Samples are processed in fixed chunks of four whose partial sums are
/// reduced in chunk order, so results do not depend on the thread count.
///
/// Throws NonFiniteError naming a parameter block when the loss is not finite.
LossGradient loss_and_gradients(const SonicNetwork& net, std::span<const Example> batch,
                                const Objective& objective, const ForwardOptions& options = {},
                                std::vector<Signal>* outputs = nullptr);

/// Mean batch loss, forward only, dropout disabled.
double batch_loss(const SonicNetwork& net, std::span<const Example> batch, const Objective& objective);

/// Central differences (L(p + h_i e_i) - L(p - h_i e_i)) / (2 h_i) with
/// h_i = h * max(1, |p_i|).
NetworkGradient finite_difference_gradients(const SonicNetwork& net, std::span<const Example> batch,
                                            const Objective& objective, double h = 1e-5);

struct BlockError {
  std::string key;
  std::size_t count = 0;
  double max_rel = 0.0;
  double mean_rel = 0.0;
};

struct GradCheckReport {
  std::vector<BlockError> blocks;
  double max_rel = 0.0;
  double threshold = 1e-4;

  bool passed() const noexcept { return max_rel < threshold; }
  /// Key of the block with the largest error.
  const BlockError& worst() const;
  /// key,count,max_rel_error,mean_rel_error,pass
  std::string to_csv() const;
};

/// Relative error |g_a - g_f| / max(|g_a|, |g_f|, 1e-8) per parameter block.
/// `tamper` may modify the analytic gradient before comparison (fault injection).
GradCheckReport gradient_check(const SonicNetwork& net, std::span<const Example> batch,
                               const Objective& objective, double h = 1e-5, double threshold = 1e-4,
                               const std::function<void(NetworkGradient&)>& tamper = {});

struct GradCheckSetup {
  SonicNetwork net;
  std::vector<Example> batch;
  Objective objective;
};

/// Two blocks with M = 2, C = 2, K = 2 and a six-class segmentation head over
/// two 16x16 SynthShape samples (first two colour channels, centred) on a
/// unit-spacing grid, where the untrained network is far from saturation.
GradCheckSetup default_gradcheck_setup(std::uint64_t seed);

}  // namespace sonic
