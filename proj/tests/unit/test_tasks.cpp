#include "sonic/tasks.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace sonic {
namespace {

TEST(SynthShape, DeterministicPerSeed) {
  const TaskSample a = gen_synthshape(42, 32), b = gen_synthshape(42, 32);
  EXPECT_EQ(a.image.data, b.image.data);
  EXPECT_EQ(a.mask, b.mask);
  EXPECT_NE(gen_synthshape(43, 32).image.data, a.image.data);
}

TEST(SynthShape, ValuesAndLabelsInRange) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const TaskSample s = gen_synthshape(seed, 32);
    EXPECT_EQ(s.image.channels, 3u);
    for (double v : s.image.data) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
    for (int m : s.mask) EXPECT_TRUE(m >= 0 && m <= 5);
    EXPECT_GE(s.shapes.size(), 2u);
    EXPECT_LE(s.shapes.size(), 6u);
  }
}

TEST(SynthShape, MaskEqualsReRasterizedShapes) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const TaskSample s = gen_synthshape(seed, 48);
    const std::size_t N = 48;
    std::vector<int> expected(N * N, 0);
    for (const auto& shape : s.shapes)
      for (std::size_t r = 0; r < N; ++r)
        for (std::size_t c = 0; c < N; ++c)
          if (shape_contains(shape, static_cast<double>(c), static_cast<double>(r))) {
            EXPECT_EQ(expected[r * N + c], 0) << "overlapping shapes at seed " << seed;
            expected[r * N + c] = shape.cls;
          }
    EXPECT_EQ(s.mask, expected) << "seed " << seed;
  }
}

TEST(SynthShape, BackgroundIsBlackAndShapesColoured) {
  const TaskSample s = gen_synthshape(7, 32);
  const std::size_t P = 32 * 32;
  for (std::size_t i = 0; i < P; ++i) {
    if (s.mask[i] != 0) continue;
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(s.image.data[c * P + i], 0.0);
  }
}

TEST(SynthShape, RejectsSmallSize) { EXPECT_THROW(gen_synthshape(1, 15), std::invalid_argument); }

TEST(HalliGalli, LabelRuleExamples) {
  EXPECT_EQ(halligalli_label({0, 0, 1, 2}), 0);
  EXPECT_EQ(halligalli_label({2, 1, 1, 0}), 1);
  EXPECT_EQ(halligalli_label({0, 0, 1, 1}), -1);
  EXPECT_EQ(halligalli_label({2, 2, 2, 0}), -1);
  EXPECT_EQ(halligalli_label({1, 1, 1, 1}), -1);
}

TEST(HalliGalli, DeterministicAndConsistentLabel) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const TaskSample a = gen_halligalli(seed, 32), b = gen_halligalli(seed, 32);
    EXPECT_EQ(a.image.data, b.image.data);
    EXPECT_EQ(a.label, b.label);
    ASSERT_EQ(a.shapes.size(), 4u);
    std::array<int, 4> types{};
    for (std::size_t i = 0; i < 4; ++i) types[i] = a.shapes[i].cls - kCircle;
    EXPECT_EQ(halligalli_label(types), a.label);
  }
}

TEST(HalliGalli, LabelsApproximatelyUniform) {
  std::array<int, 3> counts{};
  const int n = 10000;
  for (int seed = 0; seed < n; ++seed) ++counts.at(static_cast<std::size_t>(gen_halligalli(seed, 32).label));
  for (int c : counts) EXPECT_NEAR(static_cast<double>(c) / n, 1.0 / 3.0, 0.03);
}

TEST(HalliGalli, RejectsSmallSize) { EXPECT_THROW(gen_halligalli(1, 31), std::invalid_argument); }

TEST(ImageGrid, UnitSquareSpacing) {
  const GridPtr g = image_grid(32, 16);
  EXPECT_EQ(g->dims(), (std::vector<std::size_t>{32, 16}));
  EXPECT_EQ(g->spacings(), (std::vector<double>{1.0 / 32, 1.0 / 16}));
  EXPECT_THROW(image_grid(0, 4), std::invalid_argument);
}

TEST(Perturbation, ZeroNoiseIsBitwiseIdentity) {
  const TaskSample s = gen_synthshape(3, 32);
  const TaskSample p = apply_perturbation(s, {PerturbationKind::noise, 0.0}, 9);
  EXPECT_EQ(p.image.data, s.image.data);
  EXPECT_EQ(p.mask, s.mask);
}

TEST(Perturbation, NoiseIsSeededAndClamped) {
  const TaskSample s = gen_synthshape(3, 32);
  const TaskSample a = apply_perturbation(s, {PerturbationKind::noise, 0.3}, 9);
  EXPECT_EQ(a.image.data, apply_perturbation(s, {PerturbationKind::noise, 0.3}, 9).image.data);
  EXPECT_NE(a.image.data, apply_perturbation(s, {PerturbationKind::noise, 0.3}, 10).image.data);
  for (double v : a.image.data) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
  EXPECT_EQ(a.mask, s.mask);
}

TEST(Perturbation, TranslateTenPercentOf64IsSixPixels) {
  const TaskSample s = gen_synthshape(5, 64);
  const TaskSample t = apply_perturbation(s, {PerturbationKind::translate, 0.10}, 1);
  const std::size_t N = 64, P = N * N;
  for (std::size_t r = 0; r < N; ++r)
    for (std::size_t c = 0; c < N; ++c) {
      const bool inside = r >= 6 && c >= 6;
      const std::size_t from = (r - 6) * N + (c - 6);
      EXPECT_EQ(t.mask[r * N + c], inside ? s.mask[from] : 0);
      for (std::size_t ch = 0; ch < 3; ++ch)
        EXPECT_EQ(t.image.data[ch * P + r * N + c], inside ? s.image.data[ch * P + from] : 0.0);
    }
}

TEST(Perturbation, FullTurnRotationIsIdentity) {
  const TaskSample s = gen_synthshape(6, 32);
  const TaskSample r = apply_perturbation(s, {PerturbationKind::rotate, 360.0}, 1);
  for (std::size_t i = 0; i < s.image.data.size(); ++i) EXPECT_NEAR(r.image.data[i], s.image.data[i], 1e-6);
  EXPECT_EQ(r.mask, s.mask);
}

TEST(Perturbation, UnitRescaleIsIdentity) {
  const TaskSample s = gen_synthshape(7, 32);
  const TaskSample r = apply_perturbation(s, {PerturbationKind::rescale, 1.0}, 1);
  for (std::size_t i = 0; i < s.image.data.size(); ++i) EXPECT_NEAR(r.image.data[i], s.image.data[i], 1e-12);
  EXPECT_EQ(r.mask, s.mask);
}

TEST(Perturbation, MasksKeepValidClassIds) {
  const TaskSample s = gen_synthshape(8, 32);
  for (const auto& p : robustness_grid()) {
    const TaskSample t = apply_perturbation(s, p, 4);
    for (int m : t.mask) EXPECT_TRUE(m >= 0 && m <= 5) << to_string(p.kind);
    for (double v : t.image.data) EXPECT_TRUE(v >= 0.0 && v <= 1.0) << to_string(p.kind);
    EXPECT_EQ(t.image.data, apply_perturbation(s, p, 4).image.data);
  }
}

TEST(Perturbation, TranslationOnlyMovesOrCropsLabels) {
  const TaskSample s = gen_synthshape(9, 32);
  std::set<int> before(s.mask.begin(), s.mask.end());
  const TaskSample t = apply_perturbation(s, {PerturbationKind::translate, 0.3}, 1);
  for (int m : t.mask) EXPECT_TRUE(before.count(m));
}

TEST(Perturbation, GridHasFiveKindsAndThreeTiers) {
  const auto grid = robustness_grid();
  ASSERT_EQ(grid.size(), 15u);
  EXPECT_EQ(grid[0].kind, PerturbationKind::rescale);
  EXPECT_EQ(grid[14].kind, PerturbationKind::noise);
  EXPECT_EQ(grid[14].level, 0.3);
}

TEST(Perturbation, RejectsInvalidLevelsAndNames) {
  EXPECT_THROW(validate({PerturbationKind::noise, -0.1}), std::invalid_argument);
  EXPECT_THROW(validate({PerturbationKind::rescale, 0.0}), std::invalid_argument);
  EXPECT_THROW(parse_perturbation_kind("blur"), std::invalid_argument);
  EXPECT_THROW(parse_task_kind("mnist"), std::invalid_argument);
  EXPECT_EQ(parse_perturbation_kind("distort"), PerturbationKind::distort);
}

TEST(Perturbation, CombinedTierIsDeterministic) {
  const TaskSample s = gen_synthshape(10, 32);
  const TaskSample a = apply_combined(s, 1, 3), b = apply_combined(s, 1, 3);
  EXPECT_EQ(a.image.data, b.image.data);
  EXPECT_EQ(a.mask, b.mask);
  EXPECT_THROW(apply_combined(s, 3, 3), std::invalid_argument);
}

TEST(ChannelStats, NormalizeChannels) {
  TaskSample s = gen_synthshape(11, 16);
  const ChannelStats st{{0.5, 0.25, 0.0}, {2.0, 0.5, 1.0}};
  const Signal n = normalize_channels(s.image, st);
  const std::size_t P = 256;
  for (std::size_t i = 0; i < P; ++i) {
    EXPECT_DOUBLE_EQ(n.data[i], (s.image.data[i] - 0.5) / 2.0);
    EXPECT_DOUBLE_EQ(n.data[P + i], (s.image.data[P + i] - 0.25) / 0.5);
  }
}

}  // namespace
}  // namespace sonic
