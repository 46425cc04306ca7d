#include "sonic/errors.hpp"
#include "sonic/operator.hpp"
#include "sonic/oracle.hpp"
#include "sonic/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

namespace sonic {
namespace {

Signal random_signal(std::size_t channels, const GridPtr& grid, std::uint64_t seed) {
  CounterRng rng(seed);
  Signal x(channels, grid);
  for (double& v : x.data) v = rng.normal();
  return x;
}

SonicBlock random_block(const BlockShape& shape, std::uint64_t seed, bool gain = true) {
  CounterRng rng(seed);
  BlockOptions opts;
  opts.gain_normalize = gain;
  SonicBlock b = SonicBlock::initialize(shape, opts, rng);
  for (auto& v : b.params.sigma) v = rng.uniform(-1, 1);
  for (auto& v : b.params.alpha) v = rng.uniform(-1, 1);
  for (auto& v : b.params.t) v = rng.uniform(-3, 0);
  return b;
}

SonicBlock unit_block(std::size_t modes, bool gain = false) {
  CounterRng rng(11);
  BlockOptions opts;
  opts.gain_normalize = gain;
  SonicBlock b = SonicBlock::initialize({modes, 1, 1, 2}, opts, rng);
  std::fill(b.params.B_re.begin(), b.params.B_re.end(), 1.0);
  std::fill(b.params.B_im.begin(), b.params.B_im.end(), 0.0);
  std::fill(b.params.C_re.begin(), b.params.C_re.end(), 1.0);
  std::fill(b.params.C_im.begin(), b.params.C_im.end(), 0.0);
  return b;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Signal circshift(const Signal& x, std::size_t dr, std::size_t dc) {
  const std::size_t H = x.grid->dims()[0], W = x.grid->dims()[1];
  Signal y(x.channels, x.grid);
  for (std::size_t c = 0; c < x.channels; ++c)
    for (std::size_t r = 0; r < H; ++r)
      for (std::size_t q = 0; q < W; ++q)
        y.channel(c)[((r + dr) % H) * W + (q + dc) % W] = x.channel(c)[r * W + q];
  return y;
}

TEST(AssembleSymbol, RankOneUnitMixingEqualsTransferField) {
  const SonicBlock b = unit_block(1);
  const auto grid = make_grid({6, 5});
  const SpectralSymbol s = assemble_symbol(b, grid);
  EXPECT_EQ(s.values, transfer_field(b.mode(0), *grid));
}

TEST(AssembleSymbol, ZeroInputMixingAnnihilates) {
  SonicBlock b = random_block({3, 2, 2, 2}, 1, false);
  std::fill(b.params.B_re.begin(), b.params.B_re.end(), 0.0);
  std::fill(b.params.B_im.begin(), b.params.B_im.end(), 0.0);
  for (const complex& v : assemble_symbol(b, make_grid({4, 4})).values) EXPECT_EQ(v, complex(0, 0));
}

TEST(AssembleSymbol, SuperpositionOfTwoModes) {
  const SonicBlock b = unit_block(2);
  const auto grid = make_grid({7, 6}, {0.5, 1.0});
  const SpectralSymbol s = assemble_symbol(b, grid);
  const auto t0 = transfer_field(b.mode(0), *grid), t1 = transfer_field(b.mode(1), *grid);
  for (std::size_t n = 0; n < grid->half_size(); ++n) EXPECT_LT(std::abs(s.values[n] - (t0[n] + t1[n])), 1e-15);
}

TEST(AssembleSymbol, MatchesEntrywiseFactorization) {
  const SonicBlock b = random_block({3, 2, 4, 2}, 2, false);
  const auto grid = make_grid({5, 6});
  const SpectralSymbol s = assemble_symbol(b, grid);
  std::vector<std::vector<complex>> T;
  for (std::size_t m = 0; m < 3; ++m) T.push_back(transfer_field(b.mode(m), *grid));
  const auto& p = b.params;
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t n = 0; n < grid->half_size(); ++n) {
        complex acc(0, 0);
        for (std::size_t m = 0; m < 3; ++m)
          acc += complex(p.C_re[k * 3 + m], p.C_im[k * 3 + m]) * T[m][n] * complex(p.B_re[m * 2 + c], p.B_im[m * 2 + c]);
        EXPECT_LT(std::abs(s.at(k, c, n) - acc), 1e-13 * std::max(1.0, std::abs(acc)));
      }
}

TEST(AssembleSymbol, DeterministicAndSlabIndependent) {
  SonicBlock b = random_block({4, 2, 3, 2}, 3);
  const auto grid = make_grid({9, 8});
  const auto whole = assemble_symbol(b, grid).values;
  EXPECT_EQ(assemble_symbol(b, grid).values, whole);
  b.options.slab_rows = 2;
  EXPECT_EQ(assemble_symbol(b, grid).values, whole);
}

TEST(RmsGainNormalize, ConstantMagnitudeBecomesOne) {
  SpectralSymbol s(2, 3, make_grid({4, 4}));
  for (std::size_t i = 0; i < s.values.size(); ++i) s.values[i] = std::polar(4.0, 0.1 * static_cast<double>(i));
  for (const complex& v : rms_gain_normalize(s).values) EXPECT_NEAR(std::abs(v), 1.0, 1e-14);
}

TEST(RmsGainNormalize, PerOutputChannelUnitRmsAndIdempotent) {
  const SonicBlock b = random_block({3, 2, 3, 2}, 4, false);
  const SpectralSymbol once = rms_gain_normalize(assemble_symbol(b, make_grid({8, 8})));
  const std::size_t per_k = once.in_channels * once.bins();
  for (std::size_t k = 0; k < once.out_channels; ++k) {
    double ms = 0.0;
    for (std::size_t i = 0; i < per_k; ++i) ms += std::norm(once.values[k * per_k + i]);
    EXPECT_NEAR(std::sqrt(ms / static_cast<double>(per_k)), 1.0, 1e-10);
  }
  const SpectralSymbol twice = rms_gain_normalize(once);
  for (std::size_t i = 0; i < once.values.size(); ++i) EXPECT_LT(std::abs(once.values[i] - twice.values[i]), 1e-12);
}

TEST(RmsGainNormalize, ZeroSymbolStaysZero) {
  SpectralSymbol s(2, 2, make_grid({4}));
  for (const complex& v : rms_gain_normalize(s).values) EXPECT_EQ(v, complex(0, 0));
}

TEST(ApplySymbol, ZeroInputGivesZero) {
  const SonicBlock b = random_block({2, 2, 3, 2}, 5);
  const auto grid = make_grid({6, 6});
  for (const complex& v : apply_symbol(assemble_symbol(b, grid), Spectrum(2, grid)).data) EXPECT_EQ(v, complex(0, 0));
}

TEST(ApplySymbol, IdentitySymbolReturnsInput) {
  const auto grid = make_grid({5, 6});
  SpectralSymbol id(3, 3, grid);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t n = 0; n < grid->half_size(); ++n) id.at(k, k, n) = 1.0;
  const Spectrum X = dft_forward(random_signal(3, grid, 6));
  EXPECT_EQ(apply_symbol(id, X).data, X.data);
}

TEST(ApplySymbol, DcImaginaryZeroed) {
  const auto grid = make_grid({4, 4});
  SpectralSymbol s(1, 1, grid);
  for (auto& v : s.values) v = complex(1.0, 2.0);
  const Spectrum Y = apply_symbol(s, dft_forward(random_signal(1, grid, 7)));
  EXPECT_EQ(Y.data[0].imag(), 0.0);
}

TEST(ApplySymbol, RandomFourByFourMatchesDirectConvolution) {
  const auto grid = make_grid({4, 4});
  CounterRng rng(8);
  SpectralSymbol s(1, 1, grid);
  for (auto& v : s.values) v = complex(rng.normal(), rng.normal());
  const Signal x = random_signal(1, grid, 9);
  const Signal fast = dft_inverse(apply_symbol(s, dft_forward(x)));
  const Signal direct = oracle::circular_convolve_direct(spatial_kernel(s, 0, 0).kernel, x);
  EXPECT_LT(max_abs_diff(fast.data, direct.data), 1e-9);
}

TEST(ApplySymbol, RejectsChannelAndGridMismatch) {
  const auto grid = make_grid({4, 4});
  SpectralSymbol s(2, 3, grid);
  EXPECT_THROW(apply_symbol(s, Spectrum(2, grid)), std::invalid_argument);
  EXPECT_THROW(apply_symbol(s, Spectrum(3, make_grid({4, 5}))), std::invalid_argument);
}

TEST(BlockForward, ZeroParametersGiveZero) {
  SonicBlock b = random_block({2, 3, 2, 2}, 10);
  std::fill(b.params.B_re.begin(), b.params.B_re.end(), 0.0);
  std::fill(b.params.B_im.begin(), b.params.B_im.end(), 0.0);
  std::fill(b.params.W_s.begin(), b.params.W_s.end(), 0.0);
  for (double v : block_forward(b, random_signal(3, make_grid({6, 6}), 11)).data) EXPECT_EQ(v, 0.0);
}

TEST(BlockForward, DeterministicWithoutDropout) {
  const SonicBlock b = random_block({3, 2, 2, 2}, 12);
  const Signal x = random_signal(2, make_grid({8, 8}), 13);
  EXPECT_EQ(block_forward(b, x).data, block_forward(b, x).data);
  EXPECT_EQ(block_forward(b, x, true, 1).data, block_forward(b, x, false, 99).data);
}

TEST(BlockForward, ModeDropoutIsSeeded) {
  SonicBlock b = random_block({6, 2, 2, 2}, 14);
  b.options.mode_dropout = 0.5;
  const Signal x = random_signal(2, make_grid({8, 8}), 15);
  EXPECT_EQ(block_forward(b, x, true, 3).data, block_forward(b, x, true, 3).data);
  bool differs = false;
  for (std::uint64_t seed = 4; seed < 12 && !differs; ++seed)
    differs = block_forward(b, x, true, seed).data != block_forward(b, x, true, 3).data;
  EXPECT_TRUE(differs);
  for (double s : dropout_scales(b, true, 3)) EXPECT_TRUE(s == 0.0 || s == 2.0);
  for (double s : dropout_scales(b, false, 3)) EXPECT_EQ(s, 1.0);
}

TEST(BlockForward, PreActivationIsLinear) {
  const SonicBlock b = random_block({3, 2, 3, 2}, 16);
  const auto grid = make_grid({8, 8});
  const SpectralSymbol s = assemble_symbol(b, grid);
  const Signal x1 = random_signal(2, grid, 17), x2 = random_signal(2, grid, 18);
  Signal mix(2, grid);
  for (std::size_t i = 0; i < mix.data.size(); ++i) mix.data[i] = 1.5 * x1.data[i] - 0.25 * x2.data[i];
  const Signal l1 = block_preactivation(b, s, x1), l2 = block_preactivation(b, s, x2), lm = block_preactivation(b, s, mix);
  for (std::size_t i = 0; i < lm.data.size(); ++i) EXPECT_NEAR(lm.data[i], 1.5 * l1.data[i] - 0.25 * l2.data[i], 1e-9);
}

TEST(BlockForward, PreActivationIsShiftEquivariant) {
  const SonicBlock b = random_block({3, 2, 2, 2}, 19);
  const auto grid = make_grid({6, 8});
  const SpectralSymbol s = assemble_symbol(b, grid);
  const Signal x = random_signal(2, grid, 20);
  for (auto [dr, dc] : std::vector<std::pair<std::size_t, std::size_t>>{{1, 0}, {0, 3}, {5, 7}}) {
    const Signal a = block_preactivation(b, s, circshift(x, dr, dc));
    const Signal c = circshift(block_preactivation(b, s, x), dr, dc);
    EXPECT_LT(max_abs_diff(a.data, c.data), 1e-9);
  }
}

TEST(Network, SingleBlockIdentityHeadEqualsBlockForward) {
  NetworkSpec spec;
  spec.in_channels = 2;
  spec.width = 3;
  spec.depth = 1;
  spec.modes = 2;
  spec.out_channels = 3;
  SonicNetwork net = SonicNetwork::create(spec, 21);
  std::fill(net.head.begin(), net.head.end(), 0.0);
  for (std::size_t k = 0; k < 3; ++k) net.head[k * 3 + k] = 1.0;
  const Signal x = random_signal(2, make_grid({6, 6}), 22);
  EXPECT_EQ(network_forward(net, x).data, block_forward(net.blocks[0], x).data);
}

TEST(Network, ZeroSecondBlockGivesZeroOutput) {
  NetworkSpec spec;
  spec.in_channels = 2;
  spec.width = 3;
  spec.depth = 2;
  spec.out_channels = 4;
  SonicNetwork net = SonicNetwork::create(spec, 23);
  auto& p = net.blocks[1].params;
  for (auto* v : {&p.B_re, &p.B_im, &p.W_s}) std::fill(v->begin(), v->end(), 0.0);
  for (double v : network_forward(net, random_signal(2, make_grid({5, 5}), 24)).data) EXPECT_EQ(v, 0.0);
}

TEST(Network, DeterministicEndToEnd) {
  NetworkSpec spec;
  const SonicNetwork a = SonicNetwork::create(spec, 25), b = SonicNetwork::create(spec, 25);
  const Signal x = random_signal(3, make_grid({8, 8}), 26);
  EXPECT_EQ(network_forward(a, x).data, network_forward(b, x).data);
}

TEST(Network, RejectsIncompatibleChain) {
  NetworkSpec spec;
  spec.width = 4;
  SonicNetwork net = SonicNetwork::create(spec, 27);
  CounterRng rng(1);
  net.blocks[1] = SonicBlock::initialize({2, 3, 4, 2}, {}, rng);
  EXPECT_THROW(net.validate(), ConfigError);
  spec.depth = 0;
  EXPECT_THROW(SonicNetwork::create(spec, 1), ConfigError);
}

TEST(CountParameters, PrintedFormulaExamples) {
  EXPECT_EQ(count_parameters(4, 3, 5, 2), 89u);
  EXPECT_EQ(count_parameters(1, 1, 1, 2), 11u);
  EXPECT_EQ(count_parameters(2, 2, 2, 3), 31u);
}

TEST(CountParameters, MatchesEnumeratedSpectralScalars) {
  CounterRng rng(28);
  for (int i = 0; i < 10; ++i) {
    const BlockShape shape{1 + rng.below(9), 1 + rng.below(5), 1 + rng.below(5), 1 + rng.below(3)};
    const SonicBlock b = SonicBlock::initialize(shape, {}, rng);
    EXPECT_EQ(b.params.spectral_scalar_count(), count_parameters(shape.modes, shape.in_channels, shape.out_channels, shape.dims));
    EXPECT_EQ(b.params.scalar_count(), b.params.spectral_scalar_count() + shape.out_channels * shape.in_channels);
  }
}

TEST(ResampleToGrid, SameGridIsBitwiseIdentical) {
  const SonicBlock b = random_block({3, 2, 2, 2}, 29);
  const auto grid = make_grid({8, 8});
  EXPECT_EQ(resample_to_grid(b, grid).values, assemble_symbol(b, grid).values);
}

TEST(ResampleToGrid, DoubledDimsShareRawSymbolBitwise) {
  const SonicBlock b = random_block({3, 2, 2, 2}, 30);
  const auto coarse = make_grid({8, 8}), fine = make_grid({16, 16});
  const auto tc = expand_symbol(b, coarse), tf = expand_symbol(b, fine);
  std::vector<double> wc(2), wf(2);
  std::size_t shared = 0;
  for (std::size_t nc = 0; nc < coarse->half_size(); ++nc) {
    coarse->half_omega(nc, wc);
    for (std::size_t nf = 0; nf < fine->half_size(); ++nf) {
      fine->half_omega(nf, wf);
      if (wc != wf) continue;
      ++shared;
      for (std::size_t kc = 0; kc < 4; ++kc)
        EXPECT_EQ(tc.raw[kc * coarse->half_size() + nc], tf.raw[kc * fine->half_size() + nf]);
    }
  }
  EXPECT_EQ(shared, coarse->half_size());
}

TEST(ResampleToGrid, DcIndependentOfGrid) {
  const SonicBlock b = random_block({3, 2, 2, 2}, 31);
  const auto a = expand_symbol(b, make_grid({16, 16}, {1.0, 1.0}));
  const auto c = expand_symbol(b, make_grid({32, 32}, {0.5, 0.5}));
  for (std::size_t kc = 0; kc < 4; ++kc) EXPECT_EQ(a.raw[kc * 16 * 9], c.raw[kc * 32 * 17]);
}

TEST(ResampleToGrid, RejectsDimensionalityMismatch) {
  const SonicBlock b = random_block({2, 1, 1, 2}, 32);
  EXPECT_THROW(resample_to_grid(b, make_grid({8, 8, 8})), std::invalid_argument);
}

TEST(SpatialKernel, UnitSymbolIsImpulse) {
  const auto grid = make_grid({5, 6});
  SpectralSymbol s(1, 1, grid);
  std::fill(s.values.begin(), s.values.end(), complex(1.0, 0.0));
  const auto k = spatial_kernel(s, 0, 0);
  for (std::size_t i = 0; i < grid->size(); ++i) EXPECT_NEAR(k.kernel.data[i], i == 0 ? 1.0 : 0.0, 1e-15);
}

TEST(SpatialKernel, ZeroSymbolIsZero) {
  SpectralSymbol s(1, 1, make_grid({4, 4}));
  for (double v : spatial_kernel(s, 0, 0).kernel.data) EXPECT_EQ(v, 0.0);
}

TEST(SpatialKernel, AssembledSymbolIsRealAndConvolves) {
  const SonicBlock b = random_block({3, 2, 2, 2}, 33);
  const auto grid = make_grid({6, 6});
  const SpectralSymbol s = assemble_symbol(b, grid);
  const Signal x = random_signal(2, grid, 34);
  const Signal fast = dft_inverse(apply_symbol(s, dft_forward(x)));
  Signal kernel(4, grid);
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t c = 0; c < 2; ++c) {
      const auto sk = spatial_kernel(s, k, c);
      EXPECT_LT(sk.imaginary_residual, 1e-8);
      std::copy(sk.kernel.data.begin(), sk.kernel.data.end(), kernel.channel(k * 2 + c).begin());
    }
  EXPECT_LT(max_abs_diff(fast.data, oracle::circular_convolve_direct(kernel, x).data), 1e-9);
}

TEST(Gelu, ValuesAndDerivative) {
  EXPECT_EQ(gelu(0.0), 0.0);
  EXPECT_NEAR(gelu(1.0), 0.8413447460685429, 1e-15);
  for (double x : {-3.0, -0.5, 0.0, 0.7, 2.5}) {
    const double h = 1e-6;
    EXPECT_NEAR(gelu_derivative(x), (gelu(x + h) - gelu(x - h)) / (2 * h), 1e-8);
  }
}

}  // namespace
}  // namespace sonic
