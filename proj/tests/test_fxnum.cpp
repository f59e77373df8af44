#include "doctest.h"

#include <cmath>
#include <cstdlib>

#include "fxsolve/fxlinalg.hpp"
#include "fxsolve/fxnum.hpp"
#include "fxsolve/rng.hpp"

using namespace fxsolve;

TEST_CASE("max_exponent basic values") {
  CHECK(max_exponent({0.5, -0.25}) == -1);  // exact power of two keeps the tight exponent
  CHECK(max_exponent({0.6}) == 0);
  CHECK(max_exponent({3.0, -1.0}) == 2);
  CHECK(max_exponent({1.0}) == 0);
  CHECK(max_exponent({4.0}) == 2);
  CHECK_THROWS_AS(max_exponent({0.0, 0.0}), AllZeroInput);
}

TEST_CASE("max_exponent never overflows the mantissa") {
  // Exhaustive-ish scan: random magnitudes across many octaves, L in {4, 8}.
  Rng rng(123);
  for (int trial = 0; trial < 20000; ++trial) {
    const double v = std::ldexp(rng.uniform(0.5, 2.0), static_cast<int>(rng.next_below(40)) - 20);
    const int e = max_exponent({v});
    for (int bits : {4, 8}) {
      std::uint64_t sat = 0;
      const std::int64_t m = quantize_value(v, bits, e, &sat);
      CHECK(std::llabs(m) <= mant_limit(bits));
      // Saturation may only fire at an exact power-of-two maximum.
      if (sat) CHECK(std::ldexp(1.0, e) == v);
    }
  }
}

TEST_CASE("distribution_exponent") {
  CHECK(distribution_exponent(Vector(8, 1.0)) == 0);  // sigma = 0, |mu| = 1
  CHECK_THROWS_AS(distribution_exponent({0.0, 0.0, 0.0}), DegenerateDistribution);

  // Direct formula evaluation on the drawn sample is the oracle.
  Rng rng(42);
  Vector x(1000);
  for (double& v : x) v = rng.normal();
  double mu = 0.0;
  for (double v : x) mu += v;
  mu /= x.size();
  double var = 0.0;
  for (double v : x) var += (v - mu) * (v - mu);
  var /= x.size();
  const int direct = ceil_log2(std::fabs(mu) + 3.0 * std::sqrt(var));
  CHECK(distribution_exponent(x) == direct);
  CHECK(distribution_exponent(x) == 2);  // |mu| + 3 sigma ~= 3 for a standard normal
}

TEST_CASE("quantize hand values") {
  const FixedArray zero = quantize(Vector{0.0}, 8, policy::MaxAbs{});
  CHECK(zero.mant(0) == 0);
  CHECK(zero.expo() == 0);

  const FixedArray q = quantize(Vector{0.6}, 8, policy::MaxAbs{});
  CHECK(q.expo() == 0);
  CHECK(q.mant(0) == 76);  // trunc(0.6 * 2^7)
  CHECK(dequantize(q)[0] == 0.59375);

  std::uint64_t sat = 0;
  const FixedArray s = quantize(Vector{1.0, -1.0}, 4, policy::Fixed{0}, 0, &sat);
  CHECK(s.mant(0) == 7);
  CHECK(s.mant(1) == -7);
  CHECK(sat == 2);
  CHECK(dequantize(s)[0] == 0.875);
}

TEST_CASE("dequantize hand values") {
  CHECK(dequantize(FixedArray::vector({0}, 5, 8))[0] == 0.0);
  CHECK(dequantize(FixedArray::vector({76}, 0, 8))[0] == 0.59375);
  CHECK(dequantize(FixedArray::vector({-7}, 0, 4))[0] == -0.875);
}

TEST_CASE("quantize is idempotent under a fixed exponent") {
  Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const int bits = 2 + static_cast<int>(rng.next_below(14));
    Vector x(1 + rng.next_below(32));
    for (double& v : x) v = rng.uniform(-4.0, 4.0);
    const FixedArray q = quantize(x, bits, policy::MaxAbs{});
    const FixedArray q2 = quantize(dequantize(q), bits, policy::Fixed{q.expo()});
    CHECK(q == q2);
  }
}

TEST_CASE("mantissa range invariant") {
  Rng rng(11);
  for (int trial = 0; trial < 2000; ++trial) {
    const int bits = 2 + static_cast<int>(rng.next_below(12));
    Vector x(1 + rng.next_below(16));
    for (double& v : x) v = rng.normal(0.0, std::ldexp(1.0, static_cast<int>(rng.next_below(8)) - 4));
    const FixedArray q = quantize(x, bits, policy::MaxAbs{});
    for (std::size_t i = 0; i < q.size(); ++i) CHECK(std::llabs(q.mant(i)) <= mant_limit(bits));
  }
}

TEST_CASE("zeta is zero for exactly representable input") {
  const Vector x{0.75, -0.25, 0.125};  // max not a power of two, so nothing saturates
  const FixedArray q = quantize(x, 8, policy::MaxAbs{});
  CHECK(zeta_of(x, q) == 0.0);
  CHECK_THROWS_AS(zeta_of(Vector{0.0}, quantize(Vector{0.0}, 8, policy::MaxAbs{})), ZeroNorm);
}

TEST_CASE("zeta monotone in bit width under MaxAbs") {
  Rng rng(19);
  for (int trial = 0; trial < 300; ++trial) {
    Vector x(2 + rng.next_below(24));
    for (double& v : x) v = rng.normal();
    double prev = 2.0;
    for (int bits = 3; bits <= 14; ++bits) {
      const double z = zeta_of(x, quantize(x, bits, policy::MaxAbs{}));
      CHECK(z <= prev + 1e-15);
      prev = z;
    }
  }
}

TEST_CASE("vector zeta bound") {
  Rng rng(23);
  for (int trial = 0; trial < 3000; ++trial) {
    const int bits = 4 + static_cast<int>(rng.next_below(9));
    const int n = 1 + static_cast<int>(rng.next_below(64));
    Vector x(n);
    bool nonzero = false;
    for (double& v : x) {
      v = rng.normal(0.0, 1.5);
      nonzero |= v != 0.0;
    }
    if (!nonzero) continue;
    const double z = zeta_of(x, quantize(x, bits, policy::MaxAbs{}));
    CHECK(z <= std::ldexp(std::sqrt(static_cast<double>(n)), 2 - bits) * (1 + 1e-12));
  }
}

TEST_CASE("matrix zeta bound") {
  Rng rng(29);
  for (int trial = 0; trial < 200; ++trial) {
    const int bits = 4 + static_cast<int>(rng.next_below(9));
    const int n = 2 + static_cast<int>(rng.next_below(15));
    Matrix m(n, n);
    for (double& v : m.data()) v = rng.normal();
    const double z = zeta_of(m, quantize(m, bits, policy::MaxAbs{}));
    CHECK(z <= std::ldexp(static_cast<double>(n), 2 - bits) * (1 + 1e-10));
  }
}

TEST_CASE("scheduled policies") {
  const policy::Schedule sched{{{0, 2}, {80, 1}, {160, 0}}};
  CHECK(scheduled_exponent(sched, 0) == 2);
  CHECK(scheduled_exponent(sched, 79) == 2);
  CHECK(scheduled_exponent(sched, 80) == 1);
  CHECK(scheduled_exponent(sched, 500) == 0);

  const policy::Decrement dec{2, 80, -2};
  CHECK(scheduled_exponent(dec, 0) == 2);
  CHECK(scheduled_exponent(dec, 159) == 1);
  CHECK(scheduled_exponent(dec, 320) == -2);
  CHECK(scheduled_exponent(dec, 2000) == -2);  // clamped at the floor

  CHECK_THROWS_AS(validate_policy(policy::Schedule{{{5, 1}, {5, 0}}}), ConfigInvalid);
  CHECK_THROWS_AS(validate_policy(policy::Distribution{0}), ConfigInvalid);
  CHECK_NOTHROW(validate_policy(policy::Fixed{-7}));
}

TEST_CASE("requantize_int rounding modes") {
  // value 13/4 = 3.25 stored at (bits 8, expo 7): one right shift by 2
  CHECK(requantize_int(13, -2, 8, 7, RoundMode::TowardZero) == 3);
  CHECK(requantize_int(13, -2, 8, 7, RoundMode::Floor) == 3);
  CHECK(requantize_int(-13, -2, 8, 7, RoundMode::TowardZero) == -3);
  CHECK(requantize_int(-13, -2, 8, 7, RoundMode::Floor) == -4);
  // saturation
  std::uint64_t sat = 0;
  CHECK(requantize_int(int128{1} << 20, 0, 8, 7, RoundMode::Floor, &sat) == 127);
  CHECK(sat == 1);
  CHECK(requantize_int(-(int128{1} << 20), 0, 8, 7, RoundMode::Floor) == -127);
  // huge right shifts vanish (floor keeps -1 for negatives)
  CHECK(requantize_int(-5, -200, 8, 7 - 200 + 300, RoundMode::Floor) == -1);
  CHECK(requantize_int(-5, -200, 8, 7 - 200 + 300, RoundMode::TowardZero) == 0);
}

TEST_CASE("exact_weighted_sum aligns mixed exponents exactly") {
  // 0.75 at expo 0 (L=4) plus 0.125 at expo -2 (L=4): exact sum 0.875
  const FixedArray a = FixedArray::vector({6}, 0, 4);    // 6/8 = 0.75
  const FixedArray b = FixedArray::vector({4}, -2, 4);   // 4/32 = 0.125
  const ExactVec s = exact_weighted_sum({&a, &b}, {1, 1});
  const Vector v = dequantize_exact(s);
  CHECK(v[0] == 0.875);
  const FixedArray sum = requantize(s, 4, 0, RoundMode::TowardZero);
  CHECK(dequantize(sum)[0] == 0.875);
}

TEST_CASE("max_exponent_exact matches real-valued max_exponent") {
  Rng rng(31);
  for (int trial = 0; trial < 2000; ++trial) {
    const int bits = 3 + static_cast<int>(rng.next_below(10));
    Vector x(1 + rng.next_below(8));
    for (double& v : x) v = rng.normal(0.0, 3.0);
    const FixedArray q = quantize(x, bits, policy::MaxAbs{});
    ExactVec ev;
    ev.acc.assign(q.mant().begin(), q.mant().end());
    ev.log2_scale = q.scale();
    ev.rows = q.rows();
    const Vector dq = dequantize(q);
    int expected = 0;
    try {
      expected = max_exponent(dq);
    } catch (const AllZeroInput&) {
      expected = 0;
    }
    CHECK(max_exponent_exact(ev) == expected);
  }
}

TEST_CASE("FixedArray text record round-trips") {
  const FixedArray q = quantize(Vector{0.6, -0.22, 0.0}, 8, policy::MaxAbs{});
  CHECK(FixedArray::from_record(q.to_record()) == q);
  const FixedArray m = quantize(Matrix(2, 3, 0.25), 6, policy::MaxAbs{});
  CHECK(FixedArray::from_record(m.to_record()) == m);
}
