#pragma once

#include "sonic/grid.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace sonic {

/// One network input with its target. `mask` holds per-pixel class ids for
/// segmentation; `label` is the class for classification.
struct Example {
  Signal input;
  std::vector<int> mask;
  int label = -1;
};

struct LossWeights {
  double ce = 1.0;
  double dice = 1.0;
};

enum class ObjectiveKind {
  squared_norm,    ///< 0.5 |y|^2, used by tests
  segmentation,    ///< weighted cross-entropy + (1 - soft Dice) per pixel
  classification,  ///< cross-entropy on logits averaged over a central patch
};

struct Objective {
  ObjectiveKind kind = ObjectiveKind::segmentation;
  std::size_t num_classes = 6;
  LossWeights weights;
  /// Per-class cross-entropy weights; empty means uniform.
  std::vector<double> class_weights;
  /// Side length of the central readout patch (classification).
  std::size_t center_patch = 4;
  double dice_smooth = 1e-12;
};

struct LossValue {
  double loss = 0.0;
  std::vector<double> grad;  ///< same layout as the logits
};

/// Row-major logits [classes][pixels].
LossValue combined_loss(std::span<const double> logits, std::span<const int> target,
                        std::size_t classes, const LossWeights& weights,
                        std::span<const double> class_weights, double dice_smooth = 1e-12);

/// Mean over foreground classes of (2 I_c + s) / (S_c + s); a class with
/// S_c = 0 scores 1. `probs` is [classes][pixels].
double soft_dice(std::span<const double> probs, std::span<const int> target, std::size_t classes,
                 double smooth);

/// In-place softmax over the class axis for each pixel.
void softmax_channels(std::span<double> logits, std::size_t classes);

struct DiceResult {
  std::vector<double> per_class;  ///< foreground classes 1..num_classes-1
  double mean = 0.0;
};

/// Hard Dice 2|P_c & G_c| / (|P_c| + |G_c|), 1 when both are empty.
DiceResult dice_score(std::span<const int> pred, std::span<const int> truth, std::size_t num_classes);

std::vector<int> argmax_channels(const Signal& logits);

/// Logits averaged over the centred patch_side x patch_side window of a 2D signal.
std::vector<double> center_logits(const Signal& logits, std::size_t patch_side);

/// Loss for one network output and the gradient with respect to it.
struct SampleLoss {
  double loss = 0.0;
  Signal grad;
};

SampleLoss evaluate_objective(const Objective& objective, const Signal& output, const Example& example);

/// Loss only (no gradient), used by finite differences.
double objective_value(const Objective& objective, const Signal& output, const Example& example);

/// Task metric of one output: mean foreground Dice or 0/1 accuracy.
double objective_metric(const Objective& objective, const Signal& output, const Example& example);

/// Inverse-frequency weights N / (classes * n_c). A class absent from every mask
/// takes the largest observed weight.
std::vector<double> inverse_frequency_weights(std::span<const std::vector<int>> masks,
                                              std::size_t num_classes);

}  // namespace sonic
