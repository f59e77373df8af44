#include "fxsolve/fxlinalg.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "fxsolve/rng.hpp"

namespace fxsolve {

double eta_bound(double zeta_v, double zeta_m) {
  if (zeta_v < 0.0 || zeta_m < 0.0) throw ConfigInvalid("eta_bound inputs must be nonnegative");
  return zeta_v + zeta_m + 3.0 * zeta_v * zeta_m;
}

ExactVec fx_matvec_exact(const FixedArray& m, const FixedArray& x) {
  if (!m.is_matrix()) throw ShapeMismatch("fx_matvec: first operand must be a matrix");
  const int rows = m.rows(), cols = m.cols(), batch = x.is_matrix() ? x.cols() : 1;
  if (x.rows() != cols) throw ShapeMismatch("fx_matvec inner dimension");

  ExactVec out;
  out.log2_scale = m.scale() + x.scale();
  out.rows = rows;
  out.cols = batch;
  out.is_matrix = x.is_matrix();
  out.acc.assign(static_cast<std::size_t>(rows) * batch, 0);

  // int64 accumulation is exact while product-width + log2(cols) fits 62 bits.
  const int prod_bits = (m.bits() - 1) + (x.bits() - 1);
  int log2n = 0;
  while ((1 << log2n) < cols) ++log2n;
  const bool narrow = prod_bits + log2n <= 62;

  for (int i = 0; i < rows; ++i) {
    for (int c = 0; c < batch; ++c) {
      if (narrow) {
        std::int64_t acc = 0;
        for (int j = 0; j < cols; ++j) acc += m.mant(i, j) * x.mant(j * batch + c);
        out.acc[static_cast<std::size_t>(i) * batch + c] = acc;
      } else {
        int128 acc = 0;
        for (int j = 0; j < cols; ++j)
          acc += static_cast<int128>(m.mant(i, j)) * x.mant(j * batch + c);
        out.acc[static_cast<std::size_t>(i) * batch + c] = acc;
      }
    }
  }
  return out;
}

FixedArray fx_matvec(const FixedArray& m, const FixedArray& x, int out_bits, int out_expo,
                     RoundMode mode, std::uint64_t* saturated) {
  return requantize(fx_matvec_exact(m, x), out_bits, out_expo, mode, saturated);
}

double spectral_norm(const Matrix& m, double tol, int max_iters) {
  if (m.rows() != m.cols()) throw ShapeMismatch("spectral_norm needs a square matrix");
  const int n = m.rows();
  if (n == 0) throw ConfigInvalid("spectral_norm of an empty matrix");
  // All-ones start, perturbed so no eigenvector of interest is orthogonal to it.
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = 1.0 + 1e-3 * static_cast<double>(i + 1) / (n + 1);
  double nv = norm2(v);
  for (double& e : v) e /= nv;
  double lambda = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Vector w = matvec(m, v);
    const double nw = norm2(w);
    if (nw == 0.0) return 0.0;  // PSD with v in the null space of everything
    double ray = 0.0;
    for (int i = 0; i < n; ++i) ray += v[i] * w[i];
    for (int i = 0; i < n; ++i) v[i] = w[i] / nw;
    if (it > 0 && std::fabs(ray - lambda) <= tol * std::fabs(ray)) return ray;
    lambda = ray;
  }
  throw NoConvergence("power iteration exceeded max_iters");
}

double operator_norm(const Matrix& m, double tol) {
  const Matrix g = gram(m);
  const double lam = spectral_norm(g, tol);
  return std::sqrt(std::max(0.0, lam));
}

EigenRange eigen_range(const Matrix& m) {
  if (m.rows() != m.cols()) throw ShapeMismatch("eigen_range needs a square matrix");
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> em(
      m.data().data(), m.rows(), m.cols());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(em);
  if (solver.info() != Eigen::Success) throw NoConvergence("eigendecomposition failed");
  const auto& ev = solver.eigenvalues();
  return EigenRange{ev(0), ev(ev.size() - 1)};
}

double condition_number(const Matrix& m) {
  const EigenRange r = eigen_range(m);
  if (r.min <= 1e-12) throw SingularMatrix("lambda_min <= 1e-12 in condition_number");
  return r.max / r.min;
}

// Matrix zeta (declared in fxnum.hpp): operator-norm ratio of the rounding error.
double zeta_of(const Matrix& x, const FixedArray& xq) {
  if (!xq.is_matrix() || xq.rows() != x.rows() || xq.cols() != x.cols())
    throw ShapeMismatch("zeta_of matrix shapes");
  const double nx = operator_norm(x);
  if (nx == 0.0) throw ZeroNorm();
  Matrix diff = x;
  const Matrix dq = dequantize_matrix(xq);
  for (std::size_t i = 0; i < diff.data().size(); ++i) diff.data()[i] -= dq.data()[i];
  return operator_norm(diff) / nx;
}

namespace {

struct EtaSweep {
  double mean_eta = 0.0;
  double worst_eta = 0.0;
  double worst_zeta_v = 0.0;
  double zeta_m = 0.0;
};

EtaSweep eta_sweep(const Matrix& a, const Vector& b, const Vector& x_star, int bits,
                   int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw ConfigInvalid("eta_empirical needs n_samples >= 1");
  const Matrix ata = gram(a);
  const double op = operator_norm(ata);
  const FixedArray ata_q = quantize(ata, bits, policy::MaxAbs{});
  const double stddev = norm2_diff(b, x_star) / 2.0;

  EtaSweep sweep;
  sweep.zeta_m = zeta_of(ata, ata_q);
  double worst_margin = -1.0;
  for (int s = 0; s < n_samples; ++s) {
    Rng rng = Rng::split(seed, static_cast<std::uint64_t>(s));
    Vector x(b.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal(b[i], stddev);
    const FixedArray xq = quantize(x, bits, policy::MaxAbs{});
    const Vector exact = dequantize_exact(fx_matvec_exact(ata_q, xq));
    const Vector ref = matvec(ata, x);
    const double nx = norm2(x);
    if (nx == 0.0) continue;
    const double eta_s = norm2_diff(exact, ref) / (op * nx);
    sweep.mean_eta += eta_s;
    if (eta_s > worst_margin) {
      worst_margin = eta_s;
      sweep.worst_eta = eta_s;
      sweep.worst_zeta_v = zeta_of(x, xq);
    }
  }
  sweep.mean_eta /= static_cast<double>(n_samples);
  return sweep;
}

}  // namespace

double eta_empirical(const Matrix& a, const Vector& b, const Vector& x_star, int bits,
                     int n_samples, std::uint64_t seed) {
  return eta_sweep(a, b, x_star, bits, n_samples, seed).mean_eta;
}

ErrorModel eta_model(const Matrix& a, const Vector& b, const Vector& x_star, int bits,
                     int n_samples, std::uint64_t seed) {
  const EtaSweep sweep = eta_sweep(a, b, x_star, bits, n_samples, seed);
  ErrorModel m;
  m.eta = sweep.mean_eta;
  m.zeta_v = sweep.worst_zeta_v;
  m.zeta_m = sweep.zeta_m;
  m.eta_upper = eta_bound(m.zeta_v, m.zeta_m);
  return m;
}

}  // namespace fxsolve
