#pragma once

#include "sonic/grid.hpp"
#include "sonic/modes.hpp"
#include "sonic/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace sonic {

struct BlockShape {
  std::size_t modes = 1;         ///< M
  std::size_t in_channels = 1;   ///< C
  std::size_t out_channels = 1;  ///< K
  std::size_t dims = 2;          ///< D

  bool operator==(const BlockShape&) const = default;
};

struct BlockOptions {
  double epsilon = 1e-4;
  bool gain_normalize = true;
  double mode_dropout = 0.0;
  /// Rows of the first half-spectrum axis per evaluation slab; 0 = whole grid.
  std::size_t slab_rows = 0;
};

/// Raw trainable scalars of one block. The same type carries gradients, so a
/// gradient always has exactly the parameter key set.
///
/// Matrices are row-major: u is M x D, B is M x C, C is K x M, W_s is K x C.
struct BlockParameters {
  BlockShape shape;
  std::vector<double> sigma, alpha, beta, t;
  std::vector<double> u;
  double rho = std::numbers::pi;
  std::vector<double> B_re, B_im;
  std::vector<double> C_re, C_im;
  std::vector<double> W_s;

  /// All-zero parameters of the given shape (rho included).
  static BlockParameters zeros(const BlockShape& shape);

  template <class F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <class F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

  /// Scalars of the spectral operator (modes, rho, B, C); W_s excluded.
  std::size_t spectral_scalar_count() const;
  std::size_t scalar_count() const;

 private:
  template <class Self, class F>
  static void visit_impl(Self& self, F& f) {
    using Span = std::conditional_t<std::is_const_v<Self>, std::span<const double>, std::span<double>>;
    f(std::string_view("sigma"), Span(self.sigma));
    f(std::string_view("alpha"), Span(self.alpha));
    f(std::string_view("beta"), Span(self.beta));
    f(std::string_view("t"), Span(self.t));
    f(std::string_view("u"), Span(self.u));
    f(std::string_view("rho"), Span(&self.rho, 1));
    f(std::string_view("B_re"), Span(self.B_re));
    f(std::string_view("B_im"), Span(self.B_im));
    f(std::string_view("C_re"), Span(self.C_re));
    f(std::string_view("C_im"), Span(self.C_im));
    f(std::string_view("W_s"), Span(self.W_s));
  }
};

/// One spectral block: x -> gelu(irfft(H(w) rfft(x)) + W_s x).
struct SonicBlock {
  BlockParameters params;
  BlockOptions options;

  const BlockShape& shape() const noexcept { return params.shape; }
  StabilityConfig stability() const noexcept { return {params.rho, options.epsilon}; }
  ModeRaw raw_mode(std::size_t m) const;
  Mode mode(std::size_t m) const;

  /// Throws ConfigError on inconsistent sizes or options.
  void validate() const;

  /// Mixing B, C ~ complex Gaussian, W_s ~ N(0, 1/C), modes per initial_mode.
  static SonicBlock initialize(const BlockShape& shape, const BlockOptions& options,
                               CounterRng& rng, double rho = std::numbers::pi);
};

/// Per-(k, c) frequency response sampled on a half-spectrum grid.
struct SpectralSymbol {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  GridPtr grid;
  std::vector<complex> values;  ///< K x C x half_size

  SpectralSymbol() = default;
  SpectralSymbol(std::size_t k, std::size_t c, GridPtr g)
      : out_channels(k), in_channels(c), grid(std::move(g)), values(k * c * grid->half_size()) {}

  std::size_t bins() const noexcept { return grid->half_size(); }
  complex& at(std::size_t k, std::size_t c, std::size_t n) {
    return values[(k * in_channels + c) * bins() + n];
  }
  const complex& at(std::size_t k, std::size_t c, std::size_t n) const {
    return values[(k * in_channels + c) * bins() + n];
  }
  std::span<const complex> slice(std::size_t k, std::size_t c) const {
    return {values.data() + (k * in_channels + c) * bins(), bins()};
  }
};

/// Everything assembled for one block on one grid. The gradient code reuses
/// the intermediate terms.
struct SymbolTerms {
  std::vector<Mode> modes;
  std::vector<std::vector<double>> directions;  ///< physical-unit unit vectors
  std::vector<double> mode_scale;               ///< dropout multiplier per mode
  std::vector<complex> transfer;                ///< M x half_size, unscaled
  std::vector<complex> raw;                     ///< K x C x half_size, before gain normalization
  std::vector<double> gains;                    ///< per output channel, 1 when disabled
  std::vector<bool> gain_floored;
  SpectralSymbol symbol;
};

constexpr double kGainFloor = 1e-8;

/// mode_scale empty means no dropout (all ones).
SymbolTerms expand_symbol(const SonicBlock& block, const GridPtr& grid,
                          std::span<const double> mode_scale = {});

/// H_kc(w) = sum_m C_km T_m(w) B_mc, gain-normalized when the block asks for it.
SpectralSymbol assemble_symbol(const SonicBlock& block, const GridPtr& grid);

/// Divides each output channel by g_k = sqrt(mean_{c,w} |H_kc(w)|^2), g_k >= 1e-8.
SpectralSymbol rms_gain_normalize(SpectralSymbol symbol);

/// y_k(w) = sum_c H_kc(w) x_c(w), DC imaginary part zeroed.
Spectrum apply_symbol(const SpectralSymbol& symbol, const Spectrum& X);

/// Per-mode multipliers for mode dropout: 0 or 1/(1-p) when training with p > 0.
std::vector<double> dropout_scales(const SonicBlock& block, bool training, std::uint64_t seed);

/// The block's affine pre-activation irfft(H rfft(x)) + W_s x for a given symbol.
Signal block_preactivation(const SonicBlock& block, const SpectralSymbol& symbol, const Signal& x);

Signal block_forward(const SonicBlock& block, const Signal& x, bool training = false,
                     std::uint64_t seed = 0);

double gelu(double x) noexcept;
double gelu_derivative(double x) noexcept;

struct NetworkSpec {
  std::size_t in_channels = 3;
  std::size_t width = 16;  ///< K
  std::size_t depth = 2;
  std::size_t modes = 8;
  std::size_t out_channels = 1;
  std::size_t dims = 2;
  BlockOptions options;
  double rho = std::numbers::pi;
};

/// Stacked blocks followed by a pointwise head (out_channels x K).
struct SonicNetwork {
  std::vector<SonicBlock> blocks;
  std::size_t out_channels = 0;
  std::vector<double> head;

  std::size_t in_channels() const { return blocks.front().shape().in_channels; }
  std::size_t feature_channels() const { return blocks.back().shape().out_channels; }

  /// Throws ConfigError unless the channel chain and head are consistent.
  void validate() const;

  static SonicNetwork create(const NetworkSpec& spec, std::uint64_t seed);

  template <class F>
  void visit(F&& f) {
    visit_network(blocks, head, f, [](auto& b) -> auto& { return b.params; });
  }
  template <class F>
  void visit(F&& f) const {
    visit_network(blocks, head, f, [](const auto& b) -> const auto& { return b.params; });
  }

  std::size_t scalar_count() const;

  template <class Blocks, class Head, class F, class Get>
  static void visit_network(Blocks& blocks, Head& head, F& f, Get get) {
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const std::string prefix = "blocks." + std::to_string(i) + ".";
      get(blocks[i]).visit([&](std::string_view key, auto span) { f(prefix + std::string(key), span); });
    }
    using Span = std::conditional_t<std::is_const_v<Head>, std::span<const double>, std::span<double>>;
    f(std::string("head"), Span(head));
  }
};

/// Gradient with the same keys and layout as SonicNetwork::visit.
struct NetworkGradient {
  std::vector<BlockParameters> blocks;
  std::vector<double> head;

  static NetworkGradient zeros_like(const SonicNetwork& net);

  template <class F>
  void visit(F&& f) {
    SonicNetwork::visit_network(blocks, head, f, [](auto& b) -> auto& { return b; });
  }
  template <class F>
  void visit(F&& f) const {
    SonicNetwork::visit_network(blocks, head, f, [](const auto& b) -> const auto& { return b; });
  }
};

/// Pointwise channel projection out = W x, W of shape out x in.
Signal project_channels(std::span<const double> weights, std::size_t out_channels, const Signal& x);

Signal network_forward(const SonicNetwork& net, const Signal& x);

/// Trainable scalars of the spectral operator: 2KM + 2MC + (4 + D)M + 1.
std::size_t count_parameters(std::size_t modes, std::size_t in_channels, std::size_t out_channels,
                             std::size_t dims);

/// The block's symbol evaluated on another grid from unchanged parameters.
SpectralSymbol resample_to_grid(const SonicBlock& block, const GridPtr& new_grid);

/// Per-mode responses T_m on the grid, before mixing and normalization.
std::vector<std::vector<complex>> mode_responses(const SonicBlock& block, const FrequencyGrid& grid);

struct SpatialKernel {
  Signal kernel;                ///< single-channel real field
  double imaginary_residual;    ///< max |Im| / max |Re| of the Hermitian-completed inverse
};

SpatialKernel spatial_kernel(const SpectralSymbol& symbol, std::size_t k, std::size_t c);

}  // namespace sonic
