#ifndef FXSOLVE_SYSTOLIC_HPP
#define FXSOLVE_SYSTOLIC_HPP

#include <cstdint>
#include <vector>

#include "fxsolve/fxnum.hpp"

namespace fxsolve {

// Software emulator of a block-systolic multiplier datapath: 16x16 weight
// tiles times 16x2 activation tiles, signed 32-bit accumulation, host-side
// masking of the accumulators back to narrow mantissas. The canonical
// hardware configuration is 8-bit operands; the emulator accepts operand
// widths up to 14 bits so higher-precision solves can run through the same
// datapath (accumulators stay 32-bit and are overflow-checked).

inline constexpr int kBlockRows = 16;
inline constexpr int kBlockCols = 16;
inline constexpr int kBatchCols = 2;

struct BlockedOperands {
  // Tiles stored row-major over the block grid; each tile row-major.
  std::vector<std::int16_t> w_tiles;  // grid_rows*grid_inner tiles of 16x16
  std::vector<std::int16_t> x_tiles;  // grid_inner*grid_batch tiles of 16x2
  int grid_rows = 0;                  // ceil(rows/16)
  int grid_inner = 0;                 // ceil(cols/16)
  int grid_batch = 0;                 // ceil(batch/2)
  int orig_rows = 0, orig_cols = 0, orig_batch = 0;
  int expo_w = 0, expo_x = 0;
  int bits = 8;

  const std::int16_t* w_tile(int bi, int bk) const {
    return &w_tiles[(static_cast<std::size_t>(bi) * grid_inner + bk) * kBlockRows * kBlockCols];
  }
  const std::int16_t* x_tile(int bk, int bj) const {
    return &x_tiles[(static_cast<std::size_t>(bk) * grid_batch + bj) * kBlockCols * kBatchCols];
  }
};

struct AccumulatorGrid {
  std::vector<std::int32_t> acc;  // rows_padded x batch_padded, row-major
  int rows_padded = 0;
  int batch_padded = 0;
  std::uint64_t block_issues = 0;  // one issue = one 16x16 by 16x2 block MAC
};

struct SystolicStats {
  std::uint64_t block_issues = 0;
  std::uint64_t saturated = 0;
  std::uint64_t multiplies = 0;  // whole matvecs run through the datapath
};

// Tile the operands with zero padding. W must be a matrix; X may be a vector
// (treated as a one-column batch) or a matrix batch. Both operands must share
// the emulator bit width (<= 15 mantissa bits wide).
BlockedOperands decompose(const FixedArray& w, const FixedArray& x);

// Run the block schedule: for each W block row, cycle through the X blocks,
// summing 16x2 partials into signed 32-bit accumulators. Throws
// AccumulatorOverflow if a partial sum leaves int32 (impossible for in-spec
// shapes; checked anyway).
AccumulatorGrid block_multiply(const BlockedOperands& ops);

// Mask the 32-bit accumulators back to an L-bit FixedArray at out_expo:
// arithmetic shift right by (out_expo - expo_w - expo_x + (L-1)) — a negative
// amount shifts left — then saturate. Trims padding back to the original shape.
FixedArray mask_result(const AccumulatorGrid& acc, const BlockedOperands& ops, int out_expo,
                       int out_bits = 8, std::uint64_t* saturated = nullptr);

// decompose + block_multiply, exposing the exact accumulator values in the
// shared ExactVec form (value = acc * 2^(scale_w + scale_x)).
ExactVec systolic_matvec_exact(const FixedArray& w, const FixedArray& x, SystolicStats* stats);

// Full pipeline, equivalent bit-for-bit to fx_matvec with RoundMode::Floor.
FixedArray systolic_matvec(const FixedArray& w, const FixedArray& x, int out_bits, int out_expo,
                           SystolicStats* stats = nullptr);

}  // namespace fxsolve

#endif
