#ifndef FXSOLVE_FXLINALG_HPP
#define FXSOLVE_FXLINALG_HPP

#include <cstdint>

#include "fxsolve/fxnum.hpp"
#include "fxsolve/linalg.hpp"

namespace fxsolve {

// Quantization/multiplication error quantities for one (matrix, vector, L)
// configuration, with the analytic cap on the normalized matvec error.
struct ErrorModel {
  double zeta_v = 0.0;
  double zeta_m = 0.0;
  double eta = 0.0;
  double eta_upper = 0.0;
};

// zeta_v + zeta_m + 3 zeta_v zeta_m
double eta_bound(double zeta_v, double zeta_m);

// Exact integer product of fixed-point mantissas; value_i = acc_i * 2^scale.
// Accumulation never rounds (128-bit); only a later requantize does.
ExactVec fx_matvec_exact(const FixedArray& m, const FixedArray& x);

// Fixed-point matrix-vector product quantized to (out_bits, out_expo).
// Deterministic; saturates out-of-range elements.
FixedArray fx_matvec(const FixedArray& m, const FixedArray& x, int out_bits, int out_expo,
                     RoundMode mode = RoundMode::TowardZero, std::uint64_t* saturated = nullptr);

// Largest eigenvalue of a symmetric PSD matrix by power iteration
// (relative tolerance on the Rayleigh quotient; deterministic start vector).
double spectral_norm(const Matrix& m, double tol = 1e-10, int max_iters = 100000);

// Operator 2-norm of an arbitrary matrix: sqrt(spectral_norm(MᵀM)).
double operator_norm(const Matrix& m, double tol = 1e-10);

// lambda_max / lambda_min of a symmetric positive-definite matrix via full
// eigendecomposition. Throws SingularMatrix when lambda_min <= 1e-12.
double condition_number(const Matrix& m);

// Both extreme eigenvalues of a symmetric matrix (full eigendecomposition).
struct EigenRange {
  double min = 0.0;
  double max = 0.0;
};
EigenRange eigen_range(const Matrix& m);

// Normalized matvec error of quantizing (AᵀA, x) to `bits` with MaxAbs
// exponents, averaged over n_samples vectors drawn around b:
// x ~ Normal(mean=b, per-element std = ||b - x_star||_2 / 2).
double eta_empirical(const Matrix& a, const Vector& b, const Vector& x_star, int bits,
                     int n_samples, std::uint64_t seed);

// Same sampling protocol, also reporting the worst-sample error model.
ErrorModel eta_model(const Matrix& a, const Vector& b, const Vector& x_star, int bits,
                     int n_samples, std::uint64_t seed);

}  // namespace fxsolve

#endif
