#include "sonic/train.hpp"

#include "sonic/errors.hpp"
#include "sonic/gradients.hpp"
#include "sonic/parallel.hpp"
#include "sonic/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace sonic {
namespace {

constexpr std::uint64_t kTestOffset = 1ULL << 40;
constexpr std::uint64_t kStatsOffset = 1ULL << 41;
constexpr std::uint64_t kShuffleStream = 0x5348;

std::vector<TaskSample> generate_range(TaskKind kind, std::size_t size, std::uint64_t first, std::size_t count) {
  std::vector<TaskSample> out(count);
  parallel_for(count, [&](std::size_t i) { out[i] = generate_sample(kind, first + i, size); });
  return out;
}

std::vector<Example> to_examples(const ModelFile& model, std::span<const TaskSample> samples) {
  std::vector<Example> out(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) { out[i] = to_example(model, samples[i]); });
  return out;
}

// Per-sample loss and metric contributions, reduced in index order.
struct SampleScore {
  double loss = 0.0;
  double metric = 0.0;
  std::vector<double> per_class;
};

SampleScore score(const Objective& objective, const Signal& output, const Example& ex) {
  SampleScore s;
  s.loss = objective_value(objective, output, ex);
  if (objective.kind == ObjectiveKind::segmentation) {
    const auto d = dice_score(argmax_channels(output), ex.mask, objective.num_classes);
    s.metric = d.mean;
    s.per_class = d.per_class;
  } else {
    s.metric = objective_metric(objective, output, ex);
    s.per_class.assign(objective.num_classes, 0.0);
    s.per_class[static_cast<std::size_t>(ex.label)] = s.metric;
  }
  return s;
}

Metrics reduce(std::span<const SampleScore> scores, std::span<const Example> examples, const Objective& objective) {
  Metrics m;
  const double n = static_cast<double>(scores.size());
  double metric = 0.0;
  const bool seg = objective.kind == ObjectiveKind::segmentation;
  const std::size_t width = seg ? objective.num_classes - 1 : objective.num_classes;
  m.per_class.assign(width, 0.0);
  std::vector<double> label_count(width, 0.0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    m.loss += scores[i].loss;
    metric += scores[i].metric;
    for (std::size_t c = 0; c < width; ++c) m.per_class[c] += scores[i].per_class[c];
    if (!seg) label_count[static_cast<std::size_t>(examples[i].label)] += 1.0;
  }
  m.loss /= n;
  for (std::size_t c = 0; c < width; ++c) {
    const double denom = seg ? n : label_count[c];
    m.per_class[c] = denom > 0.0 ? m.per_class[c] / denom : 0.0;
  }
  (seg ? m.mean_dice : m.accuracy) = metric / n;
  return m;
}

// Architecture-specific pieces of the training loop.
struct Trainer {
  ModelFile& model;

  double step(std::span<const Example> batch, const Objective& obj, const ForwardOptions& fwd, AdamW& opt,
              double lr, std::vector<Signal>& outputs) {
    if (model.arch == Architecture::sonic) {
      auto lg = loss_and_gradients(model.sonic, batch, obj, fwd, &outputs);
      opt.step(model.sonic, lg.grad, lr);
      guard_directions(model.sonic);
      return lg.loss;
    }
    auto lg = conv_loss_and_gradients(model.conv, batch, obj, &outputs);
    opt.step(model.conv, lg.grad, lr);
    return lg.loss;
  }
};

std::string fmt(double v) { return format_real(v); }

}  // namespace

void TrainConfig::validate() const {
  if (!std::isfinite(learning_rate) || learning_rate < 0.0) throw ConfigError("learning rate must be finite and >= 0");
  if (!std::isfinite(weight_decay) || weight_decay < 0.0) throw ConfigError("weight decay must be finite and >= 0");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (train_samples == 0) throw ConfigError("train_samples must be positive");
  if (stats_samples == 0) throw ConfigError("stats_samples must be positive");
  if (!std::isfinite(loss_weights.ce) || !std::isfinite(loss_weights.dice) || loss_weights.ce < 0.0 ||
      loss_weights.dice < 0.0)
    throw ConfigError("loss weights must be finite and non-negative");
}

SeedSplits seed_splits(std::uint64_t seed, std::size_t train_samples, std::size_t) {
  const std::uint64_t base = mix64(seed);
  return {base, base + train_samples, base + kTestOffset, base + kStatsOffset};
}

std::size_t task_classes(TaskKind kind) noexcept {
  return kind == TaskKind::synthshape ? kSynthShapeClasses : kHalliGalliClasses;
}

ChannelStats estimate_channel_stats(TaskKind kind, std::size_t size, std::uint64_t first_seed, std::size_t count) {
  if (count == 0) throw std::invalid_argument("channel statistics need at least one sample");
  const auto samples = generate_range(kind, size, first_seed, count);
  const std::size_t C = samples.front().image.channels;
  ChannelStats stats;
  stats.mean.assign(C, 0.0);
  stats.stddev.assign(C, 0.0);
  double n = 0.0;
  for (const auto& s : samples) {
    n += static_cast<double>(s.image.points());
    for (std::size_t c = 0; c < C; ++c)
      for (double v : s.image.channel(c)) stats.mean[c] += v;
  }
  for (auto& m : stats.mean) m /= n;
  for (const auto& s : samples)
    for (std::size_t c = 0; c < C; ++c)
      for (double v : s.image.channel(c)) stats.stddev[c] += (v - stats.mean[c]) * (v - stats.mean[c]);
  for (auto& sd : stats.stddev) sd = std::max(std::sqrt(sd / n), 1e-6);
  return stats;
}

std::vector<double> estimate_class_weights(TaskKind kind, std::size_t size, std::uint64_t first_seed,
                                           std::size_t count) {
  const auto samples = generate_range(kind, size, first_seed, count);
  std::vector<std::vector<int>> masks;
  masks.reserve(samples.size());
  for (const auto& s : samples) masks.push_back(s.mask);
  return inverse_frequency_weights(masks, task_classes(kind));
}

ModelFile init_model(Architecture arch, TaskKind kind, std::size_t size, const NetworkSpec& spec,
                     std::uint64_t seed, std::size_t stats_samples, std::size_t conv_width) {
  ModelFile m;
  m.arch = arch;
  m.task = kind;
  m.image_size = size;
  m.center_patch = std::max<std::size_t>(1, size / 8);
  m.input_stats = estimate_channel_stats(kind, size, seed_splits(seed, 0, 0).stats, stats_samples);

  NetworkSpec s = spec;
  s.in_channels = 3;
  s.out_channels = task_classes(kind);
  s.dims = 2;
  const SonicNetwork sonic = SonicNetwork::create(s, mix64(seed ^ 0x1417));
  if (arch == Architecture::sonic) {
    m.sonic = sonic;
  } else {
    const std::size_t width =
        conv_width ? conv_width : matched_conv_width(sonic.scalar_count(), s.in_channels, 4, s.out_channels);
    m.conv = ConvNet::create({s.in_channels, width, 4, s.out_channels}, mix64(seed ^ 0xc0de));
  }
  return m;
}

Objective make_objective(const ModelFile& model, const LossWeights& weights, std::vector<double> class_weights) {
  Objective obj;
  obj.num_classes = task_classes(model.task);
  obj.weights = weights;
  if (model.task == TaskKind::synthshape) {
    obj.kind = ObjectiveKind::segmentation;
    obj.class_weights = std::move(class_weights);
  } else {
    obj.kind = ObjectiveKind::classification;
    obj.center_patch = model.center_patch;
  }
  return obj;
}

Example to_example(const ModelFile& model, const TaskSample& sample) {
  Example ex;
  ex.input = normalize_channels(sample.image, model.input_stats);
  ex.mask = sample.mask;
  ex.label = sample.label;
  return ex;
}

Signal predict(const ModelFile& model, const Signal& input) {
  return model.arch == Architecture::sonic ? network_forward(model.sonic, input) : conv_forward(model.conv, input);
}

Metrics evaluate(const ModelFile& model, std::span<const Example> examples, const Objective& objective) {
  if (examples.empty()) throw std::invalid_argument("evaluate needs at least one example");
  std::vector<SampleScore> scores(examples.size());
  parallel_for(examples.size(), [&](std::size_t i) {
    scores[i] = score(objective, predict(model, examples[i].input), examples[i]);
  });
  return reduce(scores, examples, objective);
}

double headline(const Metrics& m, TaskKind kind) noexcept {
  return kind == TaskKind::synthshape ? m.mean_dice : m.accuracy;
}

TrainResult train(ModelFile model, const TrainConfig& cfg, const std::function<void(const EpochLog&)>& progress) {
  cfg.validate();
  const std::size_t n_train = cfg.train_samples, n_val = cfg.validation_count();
  const SeedSplits seeds = seed_splits(cfg.seed, n_train, n_val);
  const std::size_t size = model.image_size;

  std::vector<double> class_weights;
  if (model.task == TaskKind::synthshape)
    class_weights = estimate_class_weights(model.task, size, seeds.stats, cfg.stats_samples);
  const Objective objective = make_objective(model, cfg.loss_weights, class_weights);

  const auto train_set = to_examples(model, generate_range(model.task, size, seeds.train, n_train));
  const auto val_set = to_examples(model, generate_range(model.task, size, seeds.val, n_val));

  TrainResult result;
  result.optimizer = AdamW(AdamWConfig{0.9, 0.999, 1e-8, cfg.weight_decay});
  result.best = model;
  result.best_metric = -1.0;

  const std::size_t batches = (n_train + cfg.batch_size - 1) / cfg.batch_size;
  const OneCycle cycle{cfg.learning_rate, cfg.epochs * batches};
  Trainer trainer{model};
  std::vector<std::size_t> order(n_train);
  std::vector<SampleScore> scores(n_train);
  std::vector<Example> batch;
  std::vector<Signal> outputs;
  std::size_t step = 0;
  CounterRng shuffle_root = CounterRng(cfg.seed).split(kShuffleStream);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    CounterRng rng = shuffle_root.split(epoch);
    for (std::size_t i = n_train - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);

    try {
      for (std::size_t b = 0; b < batches; ++b) {
        const std::size_t lo = b * cfg.batch_size, hi = std::min(n_train, lo + cfg.batch_size);
        batch.clear();
        for (std::size_t i = lo; i < hi; ++i) batch.push_back(train_set[order[i]]);
        const double lr = cfg.schedule == Schedule::one_cycle ? cycle.lr_at(step) : cfg.learning_rate;
        const ForwardOptions fwd{true, mix64(cfg.seed ^ (0x9e37ULL + step))};
        trainer.step(batch, objective, fwd, result.optimizer, lr, outputs);
        for (std::size_t i = lo; i < hi; ++i)
          scores[order[i]] = score(objective, outputs[i - lo], train_set[order[i]]);
        ++step;
      }
    } catch (const NonFiniteError& e) {
      result.diverged = true;
      result.diverged_block = e.block();
      result.message = "training diverged in epoch " + std::to_string(epoch) + ": " + e.what();
      break;
    }

    EpochLog train_log{epoch, "train", reduce(scores, train_set, objective)};
    EpochLog val_log{epoch, "val", evaluate(model, val_set, objective)};
    result.log.push_back(train_log);
    result.log.push_back(val_log);
    if (progress) {
      progress(train_log);
      progress(val_log);
    }
    const double metric = headline(val_log.metrics, model.task);
    if (metric > result.best_metric) {
      result.best_metric = metric;
      result.best_epoch = epoch;
      result.best = model;
    }
  }
  result.last = model;
  if (result.best_metric < 0.0) result.best_metric = 0.0;
  return result;
}

std::string metrics_csv(std::span<const EpochLog> log, TaskKind kind) {
  std::ostringstream os;
  const bool seg = kind == TaskKind::synthshape;
  os << "epoch,split,loss," << (seg ? "mean_dice" : "accuracy");
  const std::size_t width = seg ? kSynthShapeClasses - 1 : kHalliGalliClasses;
  for (std::size_t c = 0; c < width; ++c) os << (seg ? ",dice_" : ",acc_") << (seg ? c + 1 : c);
  os << '\n';
  for (const auto& e : log) {
    os << e.epoch << ',' << e.split << ',' << fmt(e.metrics.loss) << ',' << fmt(headline(e.metrics, kind));
    for (double v : e.metrics.per_class) os << ',' << fmt(v);
    os << '\n';
  }
  return os.str();
}

std::vector<RobustnessRow> evaluate_robustness(const ModelFile& model, std::size_t samples, std::uint64_t seed,
                                               bool combined) {
  if (samples == 0) throw std::invalid_argument("robustness evaluation needs at least one sample");
  const SeedSplits seeds = seed_splits(seed, 0, 0);
  const auto clean = generate_range(model.task, model.image_size, seeds.test, samples);
  const Objective objective = make_objective(model, {}, {});

  auto metric_of = [&](const std::vector<TaskSample>& set) {
    return headline(evaluate(model, to_examples(model, set), objective), model.task);
  };

  std::vector<RobustnessRow> rows;
  rows.push_back({"clean", 0.0, metric_of(clean)});
  const auto grid = robustness_grid();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::vector<TaskSample> perturbed(samples);
    parallel_for(samples, [&](std::size_t i) {
      perturbed[i] = apply_perturbation(clean[i], grid[g], mix64(clean[i].seed ^ (g + 1)));
    });
    rows.push_back({std::string(to_string(grid[g].kind)), grid[g].level, metric_of(perturbed)});
  }
  if (combined) {
    for (std::size_t tier = 0; tier < kSeverityTiers; ++tier) {
      std::vector<TaskSample> perturbed(samples);
      parallel_for(samples, [&](std::size_t i) {
        perturbed[i] = apply_combined(clean[i], tier, mix64(clean[i].seed ^ (0x100 + tier)));
      });
      rows.push_back({"combined", static_cast<double>(tier + 1), metric_of(perturbed)});
    }
  }
  return rows;
}

std::string robustness_csv(std::span<const RobustnessRow> rows) {
  std::ostringstream os;
  os << "kind,level,metric\n";
  for (const auto& r : rows) os << r.kind << ',' << fmt(r.level) << ',' << fmt(r.metric) << '\n';
  return os.str();
}

void guard_directions(SonicNetwork& net) {
  for (std::size_t i = 0; i < net.blocks.size(); ++i) {
    auto& p = net.blocks[i].params;
    const std::size_t D = p.shape.dims;
    for (std::size_t m = 0; m < p.shape.modes; ++m) {
      double n = 0.0;
      for (std::size_t d = 0; d < D; ++d) n += p.u[m * D + d] * p.u[m * D + d];
      n = std::sqrt(n);
      if (!(n > 0.0) || !std::isfinite(n))
        throw NonFiniteError("degenerate direction vector", "blocks." + std::to_string(i) + ".u");
      if (n < 0.5 || n > 2.0)
        for (std::size_t d = 0; d < D; ++d) p.u[m * D + d] /= n;
    }
  }
}

}  // namespace sonic
