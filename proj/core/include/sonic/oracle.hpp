#pragma once

#include "sonic/grid.hpp"
#include "sonic/modes.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sonic::oracle {

/// Dense row-major complex matrix.
struct ComplexMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<complex> data;

  ComplexMatrix() = default;
  ComplexMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}
  complex& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const complex& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// x' = A x + B u, y = C x.
struct LtiSystem {
  ComplexMatrix A, B, C;
  void validate() const;
};

/// y_k[n] = sum_c sum_tau kernel_{k,c}[tau] x_c[(n - tau) mod N] by direct summation.
/// `kernel` holds K * C channels ordered (k, c); the result has K channels.
Signal circular_convolve_direct(const Signal& kernel, const Signal& x);

/// Direct O(N^2) forward DFT of a real field, returned on the half-spectrum layout.
Spectrum dft_direct(const Signal& x);

/// Direct O(N^2) full complex DFT, exp(sign * 2 pi i k.n / N), no scaling.
std::vector<complex> dft_direct_full(const std::vector<std::size_t>& dims, std::span<const complex> x, int sign);

/// H(s) = C (sI - A)^{-1} B. Throws std::domain_error when sI - A is singular.
ComplexMatrix resolvent_transfer(const LtiSystem& sys, complex s);

/// exp(A) by scaling and squaring with a degree-6 Pade approximant.
ComplexMatrix matrix_exponential(const ComplexMatrix& A);

struct ImpulseResponse {
  double dt = 0.0;
  std::vector<ComplexMatrix> samples;  ///< K(i dt) = C exp(A i dt) B for i = 0..floor(t_max/dt)
};

ImpulseResponse impulse_response_numeric(const LtiSystem& sys, double t_max, double dt);

/// Trapezoidal integral of K(t) exp(-s t) over the sampled range.
ComplexMatrix numeric_laplace(const ImpulseResponse& k, complex s);

/// max over the grid of |T(w) - 1/(i s w_axis - a)| for an axis-aligned mode
/// without transverse damping. Throws std::invalid_argument otherwise.
double s4nd_reduction_check(const Mode& mode, std::size_t axis, const FrequencyGrid& grid);

/// |T(w) - (1/s) H(i w)| for the scalar system A = a/s, B = C = 1, with T the
/// axis-aligned mode of scale s and pole a evaluated at frequency w along its axis.
double absorbed_identity_deviation(double scale, complex pole, double omega);

struct OracleCheck {
  std::string name;
  bool passed = false;
  double value = 0.0;      ///< measured error or ratio
  double tolerance = 0.0;
  std::string detail;
};

/// Criterion-level checks, shared by the verify command, tests and the acceptance runner.
OracleCheck check_convolution_theorem(std::uint64_t seed, std::size_t pairs = 50);
OracleCheck check_direct_dft(std::uint64_t seed);
OracleCheck check_dft_convolution(std::uint64_t seed);
OracleCheck check_resolution_invariance(std::uint64_t seed);
OracleCheck check_s4nd_reduction(std::uint64_t seed);
OracleCheck check_absorbed_identity(std::uint64_t seed, std::size_t pairs = 100);
OracleCheck check_stability_bound(std::uint64_t seed, std::size_t evaluations = 100000);
OracleCheck check_parameter_count(std::uint64_t seed, std::size_t configs = 10);
OracleCheck check_resolvent_examples();
OracleCheck check_impulse_laplace();

/// All of the above.
std::vector<OracleCheck> run_oracle_suite(std::uint64_t seed);

}  // namespace sonic::oracle
