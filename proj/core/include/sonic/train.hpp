#pragma once

#include "sonic/losses.hpp"
#include "sonic/operator.hpp"
#include "sonic/optimizer.hpp"
#include "sonic/serialization.hpp"
#include "sonic/tasks.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace sonic {

struct TrainConfig {
  double learning_rate = 1e-2;
  double weight_decay = 1e-4;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  Schedule schedule = Schedule::one_cycle;
  std::uint64_t seed = 0;
  LossWeights loss_weights;
  std::size_t train_samples = 512;
  /// 0 selects train_samples / 4, i.e. 20% of all generated seeds.
  std::size_t val_samples = 0;
  /// Batch used for input statistics and class weights.
  std::size_t stats_samples = 1024;

  std::size_t validation_count() const { return val_samples ? val_samples : std::max<std::size_t>(1, train_samples / 4); }
  /// Throws ConfigError unless lr >= 0 (0 freezes the model), epochs, batch size
  /// and sample counts are positive, and everything is finite.
  void validate() const;
};

/// Disjoint seed ranges of one run: sample i of a split uses base + i.
struct SeedSplits {
  std::uint64_t train = 0, val = 0, test = 0, stats = 0;
};
SeedSplits seed_splits(std::uint64_t seed, std::size_t train_samples, std::size_t val_samples);

ChannelStats estimate_channel_stats(TaskKind kind, std::size_t size, std::uint64_t first_seed, std::size_t count);

/// Inverse-frequency class weights from the masks of `count` generated samples.
std::vector<double> estimate_class_weights(TaskKind kind, std::size_t size, std::uint64_t first_seed,
                                           std::size_t count);

std::size_t task_classes(TaskKind kind) noexcept;

/// Fresh model for a task. The conv baseline's width is matched to the scalar
/// count of the spectral network described by `spec` when conv_width is 0.
ModelFile init_model(Architecture arch, TaskKind kind, std::size_t size, const NetworkSpec& spec,
                     std::uint64_t seed, std::size_t stats_samples = 1024, std::size_t conv_width = 0);

Objective make_objective(const ModelFile& model, const LossWeights& weights, std::vector<double> class_weights);

Example to_example(const ModelFile& model, const TaskSample& sample);

/// Raw network output (logits) for a normalized input.
Signal predict(const ModelFile& model, const Signal& input);

struct Metrics {
  double loss = 0.0;
  double mean_dice = 0.0;             ///< segmentation
  double accuracy = 0.0;              ///< classification
  std::vector<double> per_class;      ///< Dice per foreground class, or recall per class
};

/// Sample-mean metrics of a model on a set of examples.
Metrics evaluate(const ModelFile& model, std::span<const Example> examples, const Objective& objective);

/// Headline metric: mean Dice for segmentation, accuracy for classification.
double headline(const Metrics& m, TaskKind kind) noexcept;

struct EpochLog {
  std::size_t epoch = 0;
  std::string split;  ///< "train" or "val"
  Metrics metrics;
};

struct TrainResult {
  ModelFile best;   ///< highest validation metric
  ModelFile last;
  AdamW optimizer;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_metric = 0.0;
  bool diverged = false;
  std::string diverged_block;
  std::string message;
};

/// Deterministic for a fixed configuration: data order, dropout masks and the
/// gradient reduction are all seeded or ordered. A non-finite loss or update
/// stops training and returns the last good checkpoint with `diverged` set.
TrainResult train(ModelFile model, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& progress = {});

/// epoch,split,loss,mean_dice,dice_1..dice_5 or epoch,split,loss,accuracy,acc_0..acc_2
std::string metrics_csv(std::span<const EpochLog> log, TaskKind kind);

struct RobustnessRow {
  std::string kind;  ///< "clean", a perturbation kind, or "combined"
  double level = 0.0;
  double metric = 0.0;
};

/// Clean row plus one row per severity of each perturbation kind, each the mean
/// metric over `samples` held-out samples. `combined` appends the three
/// combined tiers.
std::vector<RobustnessRow> evaluate_robustness(const ModelFile& model, std::size_t samples, std::uint64_t seed,
                                               bool combined = false);

/// kind,level,metric
std::string robustness_csv(std::span<const RobustnessRow> rows);

/// Rescales any direction vector u whose norm left [0.5, 2] back to unit norm.
void guard_directions(SonicNetwork& net);

}  // namespace sonic
