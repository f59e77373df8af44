#include "doctest.h"

#include <Eigen/Dense>

#include <cmath>

#include "fxsolve/fxlinalg.hpp"
#include "fxsolve/problems.hpp"
#include "fxsolve/rng.hpp"

using namespace fxsolve;

namespace {

Matrix random_matrix(Rng& rng, int rows, int cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal(0.0, scale);
  return m;
}

Vector random_vector(Rng& rng, int n, double scale = 1.0) {
  Vector x(n);
  for (double& v : x) v = rng.normal(0.0, scale);
  return x;
}

double eigen_spectral_norm(const Matrix& m) {
  Eigen::MatrixXd em(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) em(i, j) = m(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(em);
  return es.eigenvalues().maxCoeff();
}

}  // namespace

TEST_CASE("fx_matvec identity passes mantissas through") {
  // 1.0 is exact at expo 1 (mant 64); at expo 0 it would saturate.
  const FixedArray id = quantize(Matrix::identity(6), 8, policy::Fixed{1});
  CHECK(id.mant(0, 0) == 64);
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const FixedArray x = quantize(random_vector(rng, 6, 0.3), 8, policy::Fixed{0});
    const FixedArray y = fx_matvec(id, x, 8, 0);
    CHECK(y == x);
  }
}

TEST_CASE("fx_matvec of a zero matrix is zero") {
  const FixedArray z = quantize(Matrix(5, 4), 8, policy::MaxAbs{});
  const FixedArray x = quantize(Vector{0.1, -0.2, 0.3, 0.4}, 8, policy::MaxAbs{});
  const FixedArray y = fx_matvec(z, x, 8, 0);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y.mant(i) == 0);
}

TEST_CASE("fx_matvec with wide output equals the integer oracle exactly") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.next_below(12));
    const FixedArray m = quantize(random_matrix(rng, n, n), 8, policy::MaxAbs{});
    const FixedArray x = quantize(random_vector(rng, n), 8, policy::MaxAbs{});
    // Matched exponent: out value = acc * 2^scale exactly when expo makes t = 0.
    const ExactVec exact = fx_matvec_exact(m, x);
    const int expo = exact.log2_scale + 63;
    const FixedArray wide = fx_matvec(m, x, 64, expo);
    for (int i = 0; i < n; ++i) {
      std::int64_t oracle = 0;
      for (int j = 0; j < n; ++j) oracle += m.mant(i, j) * x.mant(j);
      CHECK(wide.mant(i) == oracle);
      CHECK(static_cast<std::int64_t>(exact.acc[i]) == oracle);
    }
  }
}

TEST_CASE("fx_matvec error bound with requantized output") {
  // Random 4x4, L = 8, MaxAbs exponents, output at the true product's exponent.
  Rng rng(7);
  int checked = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const Matrix m = random_matrix(rng, 4, 4);
    const Vector x = random_vector(rng, 4);
    const FixedArray mq = quantize(m, 8, policy::MaxAbs{});
    const FixedArray xq = quantize(x, 8, policy::MaxAbs{});
    const Vector prod = matvec(m, x);
    int out_expo = 0;
    try {
      out_expo = max_exponent(prod);
    } catch (const AllZeroInput&) {
      continue;
    }
    const FixedArray y = fx_matvec(mq, xq, 8, out_expo);
    const double err = norm2_diff(dequantize(y), prod);
    const double zv = zeta_of(x, xq);
    const double zm = zeta_of(m, mq);
    const double bound = eta_bound(zv, zm) * operator_norm(m) * norm2(x);
    CHECK(err <= bound * (1 + 1e-9));
    ++checked;
  }
  CHECK(checked > 9900);
}

TEST_CASE("spectral_norm") {
  CHECK(spectral_norm(Matrix::identity(4)) == doctest::Approx(1.0).epsilon(1e-9));
  Matrix d(2, 2);
  d(0, 0) = 4.0;
  d(1, 1) = 1.0;
  CHECK(spectral_norm(d) == doctest::Approx(4.0).epsilon(1e-9));

  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix s(8, 8);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j <= i; ++j) s(i, j) = s(j, i) = rng.normal();
    const Matrix g = gram(s);  // PSD
    CHECK(spectral_norm(g) == doctest::Approx(eigen_spectral_norm(g)).epsilon(1e-8));
  }
}

TEST_CASE("condition_number") {
  CHECK(condition_number(Matrix::identity(4)) == doctest::Approx(1.0));
  Matrix d(2, 2);
  d(0, 0) = 25.0;
  d(1, 1) = 1.0;
  CHECK(condition_number(d) == doctest::Approx(25.0));
  Matrix sing(2, 2);
  sing(0, 0) = 1.0;
  CHECK_THROWS_AS(condition_number(sing), SingularMatrix);

  const ProblemSpec p = dct_inversion_problem(11.1);
  CHECK(condition_number(gram(*p.a)) == doctest::Approx(11.1).epsilon(0.05 / 11.1));
}

TEST_CASE("eta_bound") {
  CHECK(eta_bound(0.0, 0.0) == 0.0);
  CHECK(eta_bound(0.01, 0.02) == doctest::Approx(0.0306).epsilon(1e-12));
  CHECK_THROWS_AS(eta_bound(-0.1, 0.0), ConfigInvalid);
}

TEST_CASE("measured eta never exceeds eta_bound") {
  Rng rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_below(7));
    const int bits = 4 + static_cast<int>(rng.next_below(9));
    const Matrix m = random_matrix(rng, n, n);
    const Vector x = random_vector(rng, n);
    if (norm2(x) == 0.0) continue;
    const FixedArray mq = quantize(m, bits, policy::MaxAbs{});
    const FixedArray xq = quantize(x, bits, policy::MaxAbs{});
    const Vector fx = dequantize_exact(fx_matvec_exact(mq, xq));
    const double eta = norm2_diff(fx, matvec(m, x)) / (operator_norm(m) * norm2(x));
    CHECK(eta <= eta_bound(zeta_of(x, xq), zeta_of(m, mq)) * (1 + 1e-9));
  }
}

TEST_CASE("eta_empirical at reference precision is negligible") {
  const ProblemSpec p = dct_inversion_problem(11.1);
  const Vector b = matvec_transposed(*p.a, p.y);
  CHECK(eta_empirical(*p.a, b, p.x_star, 52, 50, 99) < 1e-10);
}

TEST_CASE("eta_empirical against per-sample bound and paper scale") {
  const ProblemSpec p = dct_inversion_problem(11.1);
  Vector b = matvec_transposed(*p.a, p.y);
  const double tau = step_size(p.op_norm, 0.2);
  for (double& v : b) v *= tau;
  const ErrorModel m = eta_model(*p.a, b, p.x_star, 8, 200, 2024);
  CHECK(m.eta > 0.0);
  CHECK(m.eta <= m.eta_upper);
  // Paper-scale value: about 0.019 within +-50% for reconstructed matrices.
  CHECK(m.eta > 0.019 * 0.5);
  CHECK(m.eta < 0.019 * 1.5);
}

TEST_CASE("eta_empirical is deterministic in the seed") {
  const ProblemSpec p = dct_inversion_problem(25.0);
  const Vector b = matvec_transposed(*p.a, p.y);
  const double a = eta_empirical(*p.a, b, p.x_star, 8, 64, 555);
  const double c = eta_empirical(*p.a, b, p.x_star, 8, 64, 555);
  CHECK(a == c);
}
