#include "sonic/errors.hpp"
#include "sonic/gradients.hpp"
#include "sonic/rng.hpp"
#include "sonic/tasks.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <stdexcept>

namespace sonic {
namespace {

std::map<std::string, std::vector<double>> flatten(const NetworkGradient& g) {
  std::map<std::string, std::vector<double>> out;
  g.visit([&](const std::string& key, std::span<const double> v) { out[key].assign(v.begin(), v.end()); });
  return out;
}

Example random_example(std::size_t channels, const GridPtr& grid, std::uint64_t seed) {
  CounterRng rng(seed);
  Example ex;
  ex.input = Signal(channels, grid);
  for (double& v : ex.input.data) v = rng.normal();
  return ex;
}

TEST(GradientCheck, DefaultSetupPassesForSeveralSeeds) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const GradCheckSetup s = default_gradcheck_setup(seed);
    const GradCheckReport r = gradient_check(s.net, s.batch, s.objective);
    EXPECT_TRUE(r.passed()) << "seed " << seed << " worst " << r.worst().key << " " << r.max_rel;
    EXPECT_EQ(r.blocks.size(), 2 * 11 + 1u);
  }
}

TEST(GradientCheck, SetupMatchesRequestedShape) {
  const GradCheckSetup s = default_gradcheck_setup(1);
  ASSERT_EQ(s.net.blocks.size(), 2u);
  for (const auto& b : s.net.blocks) EXPECT_EQ(b.shape(), (BlockShape{2, 2, 2, 2}));
  ASSERT_EQ(s.batch.size(), 2u);
  EXPECT_EQ(s.batch[0].input.grid->dims(), (std::vector<std::size_t>{16, 16}));
}

TEST(GradientCheck, CsvHasHeaderAndOneRowPerKey) {
  const GradCheckSetup s = default_gradcheck_setup(4);
  const std::string csv = gradient_check(s.net, s.batch, s.objective).to_csv();
  EXPECT_EQ(csv.rfind("key,count,max_rel_error,mean_rel_error,pass\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 23);
}

TEST(GradientCheck, InjectedFaultIsLocalizedToItsBlock) {
  const GradCheckSetup s = default_gradcheck_setup(5);
  const auto r = gradient_check(s.net, s.batch, s.objective, 1e-5, 1e-4, [](NetworkGradient& g) {
    g.blocks[1].C_re[0] += 1e-2 + 0.1 * std::abs(g.blocks[1].C_re[0]);
  });
  EXPECT_FALSE(r.passed());
  EXPECT_EQ(r.worst().key, "blocks.1.C_re");
  for (const auto& b : r.blocks)
    if (b.key != "blocks.1.C_re") EXPECT_LT(b.max_rel, 1e-4) << b.key;
}

TEST(GradientCheck, ClassificationObjectivePasses) {
  NetworkSpec spec;
  spec.in_channels = 2;
  spec.width = 3;
  spec.depth = 2;
  spec.modes = 2;
  spec.out_channels = 3;
  const SonicNetwork net = SonicNetwork::create(spec, 6);
  const auto grid = make_grid({8, 8});
  std::vector<Example> batch{random_example(2, grid, 7), random_example(2, grid, 8)};
  batch[0].label = 2;
  batch[1].label = 0;
  Objective obj;
  obj.kind = ObjectiveKind::classification;
  obj.num_classes = 3;
  obj.center_patch = 4;
  const auto r = gradient_check(net, batch, obj);
  EXPECT_TRUE(r.passed()) << r.worst().key << " " << r.max_rel;
}

TEST(LossGradient, ZeroNetworkHasZeroLossAndGradient) {
  NetworkSpec spec;
  spec.in_channels = 2;
  spec.width = 2;
  spec.depth = 2;
  spec.modes = 2;
  spec.out_channels = 2;
  SonicNetwork net = SonicNetwork::create(spec, 9);
  for (auto& b : net.blocks)
    for (auto* v : {&b.params.B_re, &b.params.B_im, &b.params.W_s}) std::fill(v->begin(), v->end(), 0.0);
  Objective obj;
  obj.kind = ObjectiveKind::squared_norm;
  const std::vector<Example> batch{random_example(2, make_grid({8, 8}), 10)};
  const LossGradient lg = loss_and_gradients(net, batch, obj);
  EXPECT_EQ(lg.loss, 0.0);
  for (const auto& [key, v] : flatten(lg.grad))
    for (double g : v) EXPECT_EQ(g, 0.0) << key;
}

TEST(LossGradient, DeterministicAndIndependentOfThreadCount) {
  const GradCheckSetup s = default_gradcheck_setup(11);
  std::vector<Example> batch;
  for (std::size_t i = 0; i < 9; ++i) batch.push_back(s.batch[i % 2]);
  ::setenv("SONIC_THREADS", "1", 1);
  const LossGradient a = loss_and_gradients(s.net, batch, s.objective);
  ::setenv("SONIC_THREADS", "4", 1);
  const LossGradient b = loss_and_gradients(s.net, batch, s.objective);
  ::unsetenv("SONIC_THREADS");
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(flatten(a.grad), flatten(b.grad));
}

TEST(LossGradient, LossMatchesForwardOnlyBatchLoss) {
  const GradCheckSetup s = default_gradcheck_setup(12);
  EXPECT_DOUBLE_EQ(loss_and_gradients(s.net, s.batch, s.objective).loss, batch_loss(s.net, s.batch, s.objective));
}

TEST(LossGradient, DirectionGradientIsOrthogonalToU) {
  const GradCheckSetup s = default_gradcheck_setup(13);
  const LossGradient lg = loss_and_gradients(s.net, s.batch, s.objective);
  for (std::size_t b = 0; b < s.net.blocks.size(); ++b) {
    const auto& p = s.net.blocks[b].params;
    const auto& g = lg.grad.blocks[b].u;
    const std::size_t D = p.shape.dims;
    for (std::size_t m = 0; m < p.shape.modes; ++m) {
      double dot = 0.0;
      for (std::size_t d = 0; d < D; ++d) dot += p.u[m * D + d] * g[m * D + d];
      EXPECT_LT(std::abs(dot), 1e-10);
    }
  }
}

TEST(LossGradient, UnitSquareGridAgreesNormwise) {
  GradCheckSetup s = default_gradcheck_setup(14);
  const auto grid = image_grid(16, 16);
  for (auto& ex : s.batch) ex.input.grid = grid;
  const auto analytic = flatten(loss_and_gradients(s.net, s.batch, s.objective).grad);
  const auto numeric = flatten(finite_difference_gradients(s.net, s.batch, s.objective));
  for (const auto& [key, ga] : analytic) {
    const auto& gf = numeric.at(key);
    double diff = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < ga.size(); ++i) {
      diff += (ga[i] - gf[i]) * (ga[i] - gf[i]);
      norm += gf[i] * gf[i];
    }
    EXPECT_LT(std::sqrt(diff), 1e-5 * std::max(std::sqrt(norm), 1e-6)) << key;
  }
}

TEST(LossGradient, NonFiniteInputThrowsNamingABlock) {
  GradCheckSetup s = default_gradcheck_setup(15);
  s.batch[0].input.data[3] = std::numeric_limits<double>::quiet_NaN();
  try {
    loss_and_gradients(s.net, s.batch, s.objective);
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_FALSE(e.block().empty());
  }
}

TEST(LossGradient, RejectsMismatchedBatch) {
  const GradCheckSetup s = default_gradcheck_setup(16);
  EXPECT_THROW(loss_and_gradients(s.net, {}, s.objective), std::invalid_argument);
  std::vector<Example> wrong{random_example(3, make_grid({16, 16}), 17)};
  EXPECT_THROW(loss_and_gradients(s.net, wrong, s.objective), std::invalid_argument);
  std::vector<Example> mixed{s.batch[0], s.batch[1]};
  mixed[1].input = Signal(2, make_grid({8, 8}));
  EXPECT_THROW(loss_and_gradients(s.net, mixed, s.objective), std::invalid_argument);
}

}  // namespace
}  // namespace sonic
