#include "fxsolve/systolic.hpp"

#include <cstdlib>
#include <limits>

namespace fxsolve {

namespace {
int div_up(int a, int b) { return (a + b - 1) / b; }
}  // namespace

BlockedOperands decompose(const FixedArray& w, const FixedArray& x) {
  if (!w.is_matrix()) throw ShapeMismatch("decompose: W must be a matrix");
  const int rows = w.rows(), cols = w.cols();
  const int batch = x.is_matrix() ? x.cols() : 1;
  if (x.rows() != cols) throw ShapeMismatch("decompose: inner dimensions disagree");
  if (w.bits() != x.bits()) throw ConfigInvalid("decompose: operand bit widths differ");
  // A 16-product block row must fit one int32 partial: 16*(2^13)^2 < 2^31.
  if (w.bits() > 14) throw ConfigInvalid("decompose: emulator supports operand widths up to 14 bits");
  const std::int64_t lim = mant_limit(w.bits());

  BlockedOperands ops;
  ops.grid_rows = div_up(rows, kBlockRows);
  ops.grid_inner = div_up(cols, kBlockCols);
  ops.grid_batch = div_up(batch, kBatchCols);
  ops.orig_rows = rows;
  ops.orig_cols = cols;
  ops.orig_batch = batch;
  ops.expo_w = w.expo();
  ops.expo_x = x.expo();
  ops.bits = w.bits();

  ops.w_tiles.assign(static_cast<std::size_t>(ops.grid_rows) * ops.grid_inner * kBlockRows *
                         kBlockCols,
                     0);
  ops.x_tiles.assign(static_cast<std::size_t>(ops.grid_inner) * ops.grid_batch * kBlockCols *
                         kBatchCols,
                     0);

  for (int i = 0; i < rows; ++i) {
    const int bi = i / kBlockRows, ri = i % kBlockRows;
    for (int j = 0; j < cols; ++j) {
      const std::int64_t m = w.mant(i, j);
      if (std::llabs(m) > lim) throw ConfigInvalid("decompose: W mantissa exceeds tile width");
      const int bk = j / kBlockCols, rj = j % kBlockCols;
      ops.w_tiles[((static_cast<std::size_t>(bi) * ops.grid_inner + bk) * kBlockRows + ri) *
                      kBlockCols +
                  rj] = static_cast<std::int16_t>(m);
    }
  }
  for (int j = 0; j < cols; ++j) {
    const int bk = j / kBlockCols, rj = j % kBlockCols;
    for (int c = 0; c < batch; ++c) {
      const std::int64_t m = x.mant(static_cast<std::size_t>(j) * batch + c);
      if (std::llabs(m) > lim) throw ConfigInvalid("decompose: X mantissa exceeds tile width");
      const int bj = c / kBatchCols, rc = c % kBatchCols;
      ops.x_tiles[((static_cast<std::size_t>(bk) * ops.grid_batch + bj) * kBlockCols + rj) *
                      kBatchCols +
                  rc] = static_cast<std::int16_t>(m);
    }
  }
  return ops;
}

AccumulatorGrid block_multiply(const BlockedOperands& ops) {
  AccumulatorGrid grid;
  grid.rows_padded = ops.grid_rows * kBlockRows;
  grid.batch_padded = ops.grid_batch * kBatchCols;
  grid.acc.assign(static_cast<std::size_t>(grid.rows_padded) * grid.batch_padded, 0);

  constexpr std::int64_t kMax = std::numeric_limits<std::int32_t>::max();
  constexpr std::int64_t kMin = std::numeric_limits<std::int32_t>::min();

  for (int bi = 0; bi < ops.grid_rows; ++bi) {
    for (int bj = 0; bj < ops.grid_batch; ++bj) {
      for (int bk = 0; bk < ops.grid_inner; ++bk) {
        const std::int16_t* wt = ops.w_tile(bi, bk);
        const std::int16_t* xt = ops.x_tile(bk, bj);
        ++grid.block_issues;
        // One block issue: 16x16 by 16x2 = 512 MACs.
        for (int r = 0; r < kBlockRows; ++r) {
          for (int c = 0; c < kBatchCols; ++c) {
            std::int32_t partial = 0;
            for (int k = 0; k < kBlockCols; ++k)
              partial += static_cast<std::int32_t>(wt[r * kBlockCols + k]) * xt[k * kBatchCols + c];
            std::int32_t& acc =
                grid.acc[static_cast<std::size_t>(bi * kBlockRows + r) * grid.batch_padded +
                         bj * kBatchCols + c];
            const std::int64_t wide = static_cast<std::int64_t>(acc) + partial;
            if (wide > kMax || wide < kMin) throw AccumulatorOverflow();
            acc = static_cast<std::int32_t>(wide);
          }
        }
      }
    }
  }
  return grid;
}

FixedArray mask_result(const AccumulatorGrid& grid, const BlockedOperands& ops, int out_expo,
                       int out_bits, std::uint64_t* saturated) {
  const int scale = (ops.expo_w - (ops.bits - 1)) + (ops.expo_x - (ops.bits - 1));
  std::vector<std::int64_t> mant(static_cast<std::size_t>(ops.orig_rows) * ops.orig_batch);
  for (int i = 0; i < ops.orig_rows; ++i)
    for (int c = 0; c < ops.orig_batch; ++c)
      mant[static_cast<std::size_t>(i) * ops.orig_batch + c] =
          requantize_int(grid.acc[static_cast<std::size_t>(i) * grid.batch_padded + c], scale,
                         out_bits, out_expo, RoundMode::Floor, saturated);
  if (ops.orig_batch == 1) return FixedArray::vector(std::move(mant), out_expo, out_bits);
  return FixedArray::matrix(std::move(mant), ops.orig_rows, ops.orig_batch, out_expo, out_bits);
}

ExactVec systolic_matvec_exact(const FixedArray& w, const FixedArray& x, SystolicStats* stats) {
  const BlockedOperands ops = decompose(w, x);
  const AccumulatorGrid grid = block_multiply(ops);
  if (stats) {
    stats->block_issues += grid.block_issues;
    ++stats->multiplies;
  }
  ExactVec out;
  out.log2_scale = (ops.expo_w - (ops.bits - 1)) + (ops.expo_x - (ops.bits - 1));
  out.rows = ops.orig_rows;
  out.cols = ops.orig_batch;
  out.is_matrix = x.is_matrix();
  out.acc.resize(static_cast<std::size_t>(ops.orig_rows) * ops.orig_batch);
  for (int i = 0; i < ops.orig_rows; ++i)
    for (int c = 0; c < ops.orig_batch; ++c)
      out.acc[static_cast<std::size_t>(i) * ops.orig_batch + c] =
          grid.acc[static_cast<std::size_t>(i) * grid.batch_padded + c];
  return out;
}

FixedArray systolic_matvec(const FixedArray& w, const FixedArray& x, int out_bits, int out_expo,
                           SystolicStats* stats) {
  const BlockedOperands ops = decompose(w, x);
  const AccumulatorGrid grid = block_multiply(ops);
  std::uint64_t sat = 0;
  FixedArray out = mask_result(grid, ops, out_expo, out_bits, &sat);
  if (stats) {
    stats->block_issues += grid.block_issues;
    stats->saturated += sat;
    ++stats->multiplies;
  }
  return out;
}

}  // namespace fxsolve
