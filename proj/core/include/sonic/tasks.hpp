#pragma once

#include "sonic/grid.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sonic {

enum class TaskKind { synthshape, halligalli };

std::string_view to_string(TaskKind kind) noexcept;
/// Throws std::invalid_argument on an unknown name.
TaskKind parse_task_kind(std::string_view name);

/// Shape classes. SynthShape mask ids equal these values; HalliGalli uses the
/// first three and labels them 0..2.
enum ShapeClass : int { kCircle = 1, kSquare = 2, kTriangle = 3, kCross = 4, kStar = 5 };

inline constexpr std::size_t kSynthShapeClasses = 6;  ///< background + 5 shapes
inline constexpr std::size_t kHalliGalliClasses = 3;

/// One drawn primitive, in pixel coordinates (column x, row y, pixel centres at integers).
/// `radius` is the radius of the circle of equal area; every class has area pi r^2.
struct ShapeRecord {
  int cls = kCircle;
  double cx = 0.0, cy = 0.0;
  double radius = 1.0;
  double angle = 0.0;
  std::array<double, 3> color{};
};

bool shape_contains(const ShapeRecord& shape, double x, double y) noexcept;
/// Radius of the smallest origin-centred disc holding the shape.
double shape_extent(const ShapeRecord& shape) noexcept;

/// Images sample the unit square: spacing 1/H by 1/W, so physical lengths do
/// not change with resolution.
GridPtr image_grid(std::size_t height, std::size_t width);

/// Base RGB colour of a class before jitter.
std::array<double, 3> base_color(int cls);

struct TaskSample {
  TaskKind kind = TaskKind::synthshape;
  std::uint64_t seed = 0;
  Signal image;           ///< 3 x H x W in [0, 1]
  std::vector<int> mask;  ///< H x W class ids (HalliGalli: shape ids of the corner shapes)
  int label = -1;         ///< HalliGalli class, -1 for SynthShape
  std::vector<ShapeRecord> shapes;

  std::size_t height() const { return image.grid->dims()[0]; }
  std::size_t width() const { return image.grid->dims()[1]; }
};

struct SynthShapeConfig {
  std::size_t min_shapes = 2;
  std::size_t max_shapes = 6;
  double min_radius = 0.09;  ///< fraction of the image side
  double max_radius = 0.15;
  double color_jitter = 0.15;
  std::size_t placement_attempts = 64;
};

/// 2 to 6 non-overlapping primitives on a black background. Pixels are filled
/// where the pixel centre lies inside the shape; a new shape is rejected when it
/// touches (8-neighbourhood) an earlier one.
TaskSample gen_synthshape(std::uint64_t seed, std::size_t size, const SynthShapeConfig& cfg = {});

struct HalliGalliConfig {
  double corner = 0.30;       ///< corner region side, fraction of the image
  double min_radius = 0.07;
  double max_radius = 0.09;
  double center = 0.25;       ///< central texture patch side, fraction of the image
  double color_jitter = 0.10;
};

/// Four corner shapes drawn from {circle, square, triangle} so that exactly one
/// type appears twice; the label is that type (0..2). The centre holds grayscale
/// noise independent of the corners.
TaskSample gen_halligalli(std::uint64_t seed, std::size_t size, const HalliGalliConfig& cfg = {});

/// Label for corner shape types given as 0..2: the type seen exactly twice, or
/// -1 if no type or more than one type appears exactly twice.
int halligalli_label(const std::array<int, 4>& corner_types);

TaskSample generate_sample(TaskKind kind, std::uint64_t seed, std::size_t size);

/// Dataset-level per-channel input statistics.
struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

/// (x_c - mean_c) / stddev_c per channel.
Signal normalize_channels(const Signal& x, const ChannelStats& stats);

enum class PerturbationKind { rescale, rotate, translate, distort, noise };

std::string_view to_string(PerturbationKind kind) noexcept;
/// Throws std::invalid_argument on an unknown name.
PerturbationKind parse_perturbation_kind(std::string_view name);

/// level: scale factor, degrees, fraction of the side, displacement sigma in
/// pixels, noise sigma.
struct Perturbation {
  PerturbationKind kind = PerturbationKind::noise;
  double level = 0.0;
};

/// Throws std::invalid_argument when the level lies outside the kind's range.
void validate(const Perturbation& p);

TaskSample apply_perturbation(const TaskSample& sample, const Perturbation& p, std::uint64_t seed);

/// Severity tiers per kind: rescale {0.75, 1.0, 1.5}, rotate {15, 30, 45},
/// translate {0.1, 0.2, 0.3}, distort {2, 4, 6}, noise {0.1, 0.2, 0.3}.
std::span<const Perturbation> robustness_grid();
inline constexpr std::size_t kSeverityTiers = 3;

/// Tier i of every kind, applied in the order rescale, rotate, translate,
/// distort, noise.
TaskSample apply_combined(const TaskSample& sample, std::size_t tier, std::uint64_t seed);

}  // namespace sonic
