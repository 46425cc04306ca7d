#include "sonic/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sonic {

void softmax_channels(std::span<double> logits, std::size_t classes) {
  const std::size_t P = logits.size() / classes;
  for (std::size_t i = 0; i < P; ++i) {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < classes; ++c) peak = std::max(peak, logits[c * P + i]);
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      double& v = logits[c * P + i];
      v = std::exp(v - peak);
      total += v;
    }
    for (std::size_t c = 0; c < classes; ++c) logits[c * P + i] /= total;
  }
}

double soft_dice(std::span<const double> probs, std::span<const int> target, std::size_t classes,
                 double smooth) {
  if (classes < 2) return 1.0;
  const std::size_t P = target.size();
  double sum = 0.0;
  for (std::size_t c = 1; c < classes; ++c) {
    double inter = 0.0, total = 0.0;
    for (std::size_t i = 0; i < P; ++i) {
      const double g = target[i] == static_cast<int>(c) ? 1.0 : 0.0;
      inter += probs[c * P + i] * g;
      total += probs[c * P + i] + g;
    }
    sum += total + smooth > 0.0 ? (2.0 * inter + smooth) / (total + smooth) : 1.0;
  }
  return sum / static_cast<double>(classes - 1);
}

LossValue combined_loss(std::span<const double> logits, std::span<const int> target,
                        std::size_t classes, const LossWeights& weights,
                        std::span<const double> class_weights, double dice_smooth) {
  const std::size_t P = target.size();
  if (classes == 0 || logits.size() != classes * P)
    throw std::invalid_argument("combined_loss: logits do not match target shape");
  if (!class_weights.empty() && class_weights.size() != classes)
    throw std::invalid_argument("combined_loss: one class weight per class");
  auto weight_of = [&](int c) { return class_weights.empty() ? 1.0 : class_weights[static_cast<std::size_t>(c)]; };

  std::vector<double> probs(logits.begin(), logits.end());
  softmax_channels(probs, classes);

  LossValue out;
  out.grad.assign(logits.size(), 0.0);

  // Weighted cross-entropy, normalized by the total target weight.
  double total_weight = 0.0;
  for (std::size_t i = 0; i < P; ++i) {
    const int y = target[i];
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
      throw std::invalid_argument("combined_loss: target label out of range");
    total_weight += weight_of(y);
  }
  if (weights.ce != 0.0 && total_weight > 0.0) {
    double ce = 0.0;
    for (std::size_t i = 0; i < P; ++i) {
      const auto y = static_cast<std::size_t>(target[i]);
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < classes; ++c) peak = std::max(peak, logits[c * P + i]);
      double total = 0.0;
      for (std::size_t c = 0; c < classes; ++c) total += std::exp(logits[c * P + i] - peak);
      const double log_p = logits[y * P + i] - peak - std::log(total);
      const double w = weight_of(target[i]) / total_weight;
      ce -= w * log_p;
      for (std::size_t c = 0; c < classes; ++c)
        out.grad[c * P + i] += weights.ce * w * (probs[c * P + i] - (c == y ? 1.0 : 0.0));
    }
    out.loss += weights.ce * ce;
  }

  if (weights.dice != 0.0 && classes > 1) {
    // q = dL/dp, then back through the softmax.
    std::vector<double> q(logits.size(), 0.0);
    const double scale = 1.0 / static_cast<double>(classes - 1);
    double dice_sum = 0.0;
    for (std::size_t c = 1; c < classes; ++c) {
      double inter = 0.0, total = 0.0;
      for (std::size_t i = 0; i < P; ++i) {
        const double g = target[i] == static_cast<int>(c) ? 1.0 : 0.0;
        inter += probs[c * P + i] * g;
        total += probs[c * P + i] + g;
      }
      const double den = total + dice_smooth;
      if (!(den > 0.0)) {
        dice_sum += 1.0;
        continue;
      }
      const double num = 2.0 * inter + dice_smooth;
      dice_sum += num / den;
      for (std::size_t i = 0; i < P; ++i) {
        const double g = target[i] == static_cast<int>(c) ? 1.0 : 0.0;
        q[c * P + i] = -scale * (2.0 * g * den - num) / (den * den);
      }
    }
    out.loss += weights.dice * (1.0 - dice_sum * scale);
    for (std::size_t i = 0; i < P; ++i) {
      double dot = 0.0;
      for (std::size_t c = 0; c < classes; ++c) dot += probs[c * P + i] * q[c * P + i];
      for (std::size_t c = 0; c < classes; ++c)
        out.grad[c * P + i] += weights.dice * probs[c * P + i] * (q[c * P + i] - dot);
    }
  }
  return out;
}

DiceResult dice_score(std::span<const int> pred, std::span<const int> truth, std::size_t num_classes) {
  if (pred.size() != truth.size()) throw std::invalid_argument("dice_score: masks differ in size");
  DiceResult r;
  if (num_classes < 2) {
    r.mean = 1.0;
    return r;
  }
  std::vector<std::size_t> inter(num_classes, 0), p_count(num_classes, 0), t_count(num_classes, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int p = pred[i], t = truth[i];
    if (p < 0 || t < 0 || static_cast<std::size_t>(p) >= num_classes ||
        static_cast<std::size_t>(t) >= num_classes)
      throw std::invalid_argument("dice_score: label out of range");
    ++p_count[static_cast<std::size_t>(p)];
    ++t_count[static_cast<std::size_t>(t)];
    if (p == t) ++inter[static_cast<std::size_t>(p)];
  }
  double sum = 0.0;
  for (std::size_t c = 1; c < num_classes; ++c) {
    const std::size_t den = p_count[c] + t_count[c];
    const double d = den == 0 ? 1.0 : 2.0 * static_cast<double>(inter[c]) / static_cast<double>(den);
    r.per_class.push_back(d);
    sum += d;
  }
  r.mean = sum / static_cast<double>(num_classes - 1);
  return r;
}

std::vector<int> argmax_channels(const Signal& logits) {
  const std::size_t P = logits.points();
  std::vector<int> labels(P, 0);
  for (std::size_t i = 0; i < P; ++i) {
    double best = logits.data[i];
    for (std::size_t c = 1; c < logits.channels; ++c) {
      const double v = logits.data[c * P + i];
      if (v > best) {
        best = v;
        labels[i] = static_cast<int>(c);
      }
    }
  }
  return labels;
}

namespace {

struct Patch {
  std::size_t row0, col0, side_r, side_c, width;
};

Patch center_patch(const Signal& s, std::size_t side) {
  if (!s.grid || s.grid->rank() != 2) throw std::invalid_argument("center readout needs a 2D signal");
  const auto H = s.grid->dims()[0], W = s.grid->dims()[1];
  const std::size_t sr = std::clamp<std::size_t>(side, 1, H), sc = std::clamp<std::size_t>(side, 1, W);
  return {(H - sr) / 2, (W - sc) / 2, sr, sc, W};
}

}  // namespace

std::vector<double> center_logits(const Signal& logits, std::size_t patch_side) {
  const Patch p = center_patch(logits, patch_side);
  std::vector<double> out(logits.channels, 0.0);
  const double inv = 1.0 / static_cast<double>(p.side_r * p.side_c);
  for (std::size_t c = 0; c < logits.channels; ++c) {
    auto ch = logits.channel(c);
    double s = 0.0;
    for (std::size_t r = p.row0; r < p.row0 + p.side_r; ++r)
      for (std::size_t q = p.col0; q < p.col0 + p.side_c; ++q) s += ch[r * p.width + q];
    out[c] = s * inv;
  }
  return out;
}

SampleLoss evaluate_objective(const Objective& objective, const Signal& output, const Example& example) {
  SampleLoss result;
  result.grad = Signal(output.channels, output.grid);
  switch (objective.kind) {
    case ObjectiveKind::squared_norm: {
      for (std::size_t i = 0; i < output.data.size(); ++i) {
        result.loss += 0.5 * output.data[i] * output.data[i];
        result.grad.data[i] = output.data[i];
      }
      break;
    }
    case ObjectiveKind::segmentation: {
      if (output.channels != objective.num_classes)
        throw std::invalid_argument("segmentation objective: output channels != classes");
      auto lv = combined_loss(output.data, example.mask, objective.num_classes, objective.weights,
                              objective.class_weights, objective.dice_smooth);
      result.loss = lv.loss;
      result.grad.data = std::move(lv.grad);
      break;
    }
    case ObjectiveKind::classification: {
      if (output.channels != objective.num_classes)
        throw std::invalid_argument("classification objective: output channels != classes");
      if (example.label < 0 || static_cast<std::size_t>(example.label) >= objective.num_classes)
        throw std::invalid_argument("classification objective: label out of range");
      auto logits = center_logits(output, objective.center_patch);
      const double peak = *std::max_element(logits.begin(), logits.end());
      double total = 0.0;
      for (double v : logits) total += std::exp(v - peak);
      const auto y = static_cast<std::size_t>(example.label);
      result.loss = -(logits[y] - peak - std::log(total));
      const Patch p = center_patch(output, objective.center_patch);
      const double inv = 1.0 / static_cast<double>(p.side_r * p.side_c);
      for (std::size_t c = 0; c < logits.size(); ++c) {
        const double g = (std::exp(logits[c] - peak) / total - (c == y ? 1.0 : 0.0)) * inv;
        auto ch = result.grad.channel(c);
        for (std::size_t r = p.row0; r < p.row0 + p.side_r; ++r)
          for (std::size_t q = p.col0; q < p.col0 + p.side_c; ++q) ch[r * p.width + q] = g;
      }
      break;
    }
  }
  return result;
}

double objective_value(const Objective& objective, const Signal& output, const Example& example) {
  switch (objective.kind) {
    case ObjectiveKind::squared_norm: {
      double s = 0.0;
      for (double v : output.data) s += 0.5 * v * v;
      return s;
    }
    case ObjectiveKind::segmentation:
    case ObjectiveKind::classification:
      return evaluate_objective(objective, output, example).loss;
  }
  return 0.0;
}

double objective_metric(const Objective& objective, const Signal& output, const Example& example) {
  switch (objective.kind) {
    case ObjectiveKind::squared_norm:
      return 0.0;
    case ObjectiveKind::segmentation:
      return dice_score(argmax_channels(output), example.mask, objective.num_classes).mean;
    case ObjectiveKind::classification: {
      const auto logits = center_logits(output, objective.center_patch);
      const auto best = std::max_element(logits.begin(), logits.end()) - logits.begin();
      return best == example.label ? 1.0 : 0.0;
    }
  }
  return 0.0;
}

std::vector<double> inverse_frequency_weights(std::span<const std::vector<int>> masks,
                                              std::size_t num_classes) {
  std::vector<double> counts(num_classes, 0.0);
  double total = 0.0;
  for (const auto& mask : masks) {
    for (int v : mask) {
      if (v >= 0 && static_cast<std::size_t>(v) < num_classes) {
        counts[static_cast<std::size_t>(v)] += 1.0;
        total += 1.0;
      }
    }
  }
  std::vector<double> w(num_classes, 0.0);
  double largest = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (counts[c] > 0.0) {
      w[c] = total / (static_cast<double>(num_classes) * counts[c]);
      largest = std::max(largest, w[c]);
    }
  }
  for (auto& v : w)
    if (v == 0.0) v = largest > 0.0 ? largest : 1.0;
  return w;
}

}  // namespace sonic
