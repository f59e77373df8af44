#include "doctest.h"

#include <cstdlib>
#include <vector>

#include "fxsolve/fxlinalg.hpp"
#include "fxsolve/rng.hpp"
#include "fxsolve/systolic.hpp"

using namespace fxsolve;

namespace {

FixedArray random_fixed_matrix(Rng& rng, int rows, int cols, int bits, int expo) {
  std::vector<std::int64_t> mant(static_cast<std::size_t>(rows) * cols);
  const std::int64_t lim = mant_limit(bits);
  for (auto& m : mant) m = static_cast<std::int64_t>(rng.next_below(2 * lim + 1)) - lim;
  return FixedArray::matrix(std::move(mant), rows, cols, expo, bits);
}

FixedArray random_fixed_vector(Rng& rng, int n, int bits, int expo) {
  std::vector<std::int64_t> mant(n);
  const std::int64_t lim = mant_limit(bits);
  for (auto& m : mant) m = static_cast<std::int64_t>(rng.next_below(2 * lim + 1)) - lim;
  return FixedArray::vector(std::move(mant), expo, bits);
}

}  // namespace

TEST_CASE("decompose shapes and padding") {
  Rng rng(1);
  const FixedArray w16 = random_fixed_matrix(rng, 16, 16, 8, 0);
  const FixedArray x16 = random_fixed_matrix(rng, 16, 2, 8, 0);
  const BlockedOperands single = decompose(w16, x16);
  CHECK(single.grid_rows == 1);
  CHECK(single.grid_inner == 1);
  CHECK(single.grid_batch == 1);

  const FixedArray w17 = random_fixed_matrix(rng, 17, 17, 8, 0);
  const FixedArray x17 = random_fixed_vector(rng, 17, 8, 0);
  const BlockedOperands two = decompose(w17, x17);
  CHECK(two.grid_rows == 2);
  CHECK(two.grid_inner == 2);
  CHECK(two.grid_batch == 1);
  // Padding regions are exactly zero.
  const std::int16_t* t = two.w_tile(1, 1);
  for (int r = 1; r < 16; ++r)
    for (int c = 0; c < 16; ++c) CHECK(t[r * 16 + c] == 0);

  CHECK_THROWS_AS(decompose(w17, x16), ShapeMismatch);
}

TEST_CASE("decompose reassembles bit-exactly") {
  Rng rng(2);
  const FixedArray w = random_fixed_matrix(rng, 40, 24, 8, 1);
  const FixedArray x = random_fixed_matrix(rng, 24, 3, 8, -1);
  const BlockedOperands ops = decompose(w, x);
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 24; ++j) {
      const std::int16_t v =
          ops.w_tile(i / 16, j / 16)[(i % 16) * kBlockCols + (j % 16)];
      CHECK(v == w.mant(i, j));
    }
  for (int j = 0; j < 24; ++j)
    for (int c = 0; c < 3; ++c) {
      const std::int16_t v =
          ops.x_tile(j / 16, c / 2)[(j % 16) * kBatchCols + (c % 2)];
      CHECK(v == x.mant(j, c));
    }
}

TEST_CASE("block_multiply equals the integer matmul oracle") {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const int rows = 1 + static_cast<int>(rng.next_below(45));
    const int cols = 1 + static_cast<int>(rng.next_below(45));
    const int batch = 1 + static_cast<int>(rng.next_below(3));
    const FixedArray w = random_fixed_matrix(rng, rows, cols, 8, 0);
    const FixedArray x = random_fixed_matrix(rng, cols, batch, 8, 0);
    const BlockedOperands ops = decompose(w, x);
    const AccumulatorGrid grid = block_multiply(ops);
    CHECK(grid.block_issues ==
          static_cast<std::uint64_t>(ops.grid_rows) * ops.grid_inner * ops.grid_batch);
    for (int i = 0; i < rows; ++i)
      for (int c = 0; c < batch; ++c) {
        std::int64_t oracle = 0;
        for (int j = 0; j < cols; ++j) oracle += w.mant(i, j) * x.mant(j, c);
        CHECK(grid.acc[static_cast<std::size_t>(i) * grid.batch_padded + c] == oracle);
      }
  }
}

TEST_CASE("all-zero activations leave accumulators zero but still issue blocks") {
  Rng rng(4);
  const FixedArray w = random_fixed_matrix(rng, 32, 32, 8, 0);
  const FixedArray x = FixedArray::vector(std::vector<std::int64_t>(32, 0), 0, 8);
  const AccumulatorGrid grid = block_multiply(decompose(w, x));
  CHECK(grid.block_issues == 4);  // 2 row blocks x 2 inner blocks x 1 batch block
  for (std::int32_t a : grid.acc) CHECK(a == 0);
}

TEST_CASE("identity weights shift activations by the mantissa of one") {
  // 1.0 at expo 1 has mantissa 64; masking back to the activation exponent
  // must reproduce the activations bit-for-bit.
  const FixedArray id = quantize(Matrix::identity(16), 8, policy::Fixed{1});
  Rng rng(5);
  const FixedArray x = random_fixed_vector(rng, 16, 8, 0);
  const BlockedOperands ops = decompose(id, x);
  const AccumulatorGrid grid = block_multiply(ops);
  for (int i = 0; i < 16; ++i)
    CHECK(grid.acc[static_cast<std::size_t>(i) * grid.batch_padded] == 64 * x.mant(i));
  const FixedArray y = mask_result(grid, ops, 0, 8);
  CHECK(y == x);
}

TEST_CASE("mask_result shift and saturation edges") {
  BlockedOperands ops;
  ops.orig_rows = 1;
  ops.orig_batch = 1;
  ops.expo_w = 0;
  ops.expo_x = 0;
  ops.bits = 8;
  AccumulatorGrid grid;
  grid.rows_padded = 1;
  grid.batch_padded = 1;

  // shift 0: out_expo - expo_w - expo_x + 7 = 0 -> out_expo = -7
  grid.acc = {42};
  CHECK(mask_result(grid, ops, -7, 8).mant(0) == 42);

  // accumulator 2^15 with right shift 8 -> mantissa 128 saturates at 127
  grid.acc = {1 << 15};
  std::uint64_t sat = 0;
  CHECK(mask_result(grid, ops, 1, 8, &sat).mant(0) == 127);
  CHECK(sat == 1);

  // negative shift amounts are left shifts with saturation
  grid.acc = {3};
  CHECK(mask_result(grid, ops, -9, 8).mant(0) == 12);
  grid.acc = {100};
  sat = 0;
  CHECK(mask_result(grid, ops, -9, 8, &sat).mant(0) == 127);
  CHECK(sat == 1);
}

TEST_CASE("pipeline equals fx_matvec with floor rounding, odd shapes included") {
  Rng rng(6);
  for (int trial = 0; trial < 500; ++trial) {
    const int rows = 1 + static_cast<int>(rng.next_below(40));
    const int cols = 1 + static_cast<int>(rng.next_below(40));
    const int expo_w = static_cast<int>(rng.next_below(5)) - 2;
    const int expo_x = static_cast<int>(rng.next_below(5)) - 2;
    const int out_expo = static_cast<int>(rng.next_below(9)) - 4;
    const FixedArray w = random_fixed_matrix(rng, rows, cols, 8, expo_w);
    const FixedArray x = random_fixed_vector(rng, cols, 8, expo_x);
    const FixedArray direct = fx_matvec(w, x, 8, out_expo, RoundMode::Floor);
    SystolicStats stats;
    const FixedArray sys = systolic_matvec(w, x, 8, out_expo, &stats);
    CHECK(sys == direct);
    CHECK(stats.block_issues > 0);
  }
}

TEST_CASE("padding amount does not change results") {
  Rng rng(7);
  const FixedArray w = random_fixed_matrix(rng, 17, 17, 8, 0);
  const FixedArray x = random_fixed_vector(rng, 17, 8, 0);
  const FixedArray y = systolic_matvec(w, x, 8, 2, nullptr);
  // Same operands embedded in a larger zero matrix: rows beyond 17 are zero.
  std::vector<std::int64_t> mant(48 * 48, 0);
  for (int i = 0; i < 17; ++i)
    for (int j = 0; j < 17; ++j) mant[i * 48 + j] = w.mant(i, j);
  const FixedArray wbig = FixedArray::matrix(std::move(mant), 48, 48, 0, 8);
  std::vector<std::int64_t> xm(48, 0);
  for (int j = 0; j < 17; ++j) xm[j] = x.mant(j);
  const FixedArray xbig = FixedArray::vector(std::move(xm), 0, 8);
  const FixedArray ybig = systolic_matvec(wbig, xbig, 8, 2, nullptr);
  for (int i = 0; i < 17; ++i) CHECK(ybig.mant(i) == y.mant(i));
  for (int i = 17; i < 48; ++i) CHECK(ybig.mant(i) == 0);
}

TEST_CASE("defensive accumulator overflow check fires") {
  // 14-bit operands, inner dimension 48: 3 blocks of 16 * 8191^2 exceeds int32.
  const int n = 48;
  std::vector<std::int64_t> wm(static_cast<std::size_t>(n) * n, mant_limit(14));
  std::vector<std::int64_t> xm(n, mant_limit(14));
  const FixedArray w = FixedArray::matrix(std::move(wm), n, n, 0, 14);
  const FixedArray x = FixedArray::vector(std::move(xm), 0, 14);
  CHECK_THROWS_AS(block_multiply(decompose(w, x)), AccumulatorOverflow);
}

TEST_CASE("cycle accounting") {
  Rng rng(8);
  const FixedArray w = random_fixed_matrix(rng, 33, 50, 8, 0);
  const FixedArray x = random_fixed_matrix(rng, 50, 5, 8, 0);
  SystolicStats stats;
  systolic_matvec(w, x, 8, 3, &stats);
  CHECK(stats.block_issues == 3ull * 4 * 3);  // ceil(33/16) * ceil(50/16) * ceil(5/2)
  CHECK(stats.multiplies == 1);
}
