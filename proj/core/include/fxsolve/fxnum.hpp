#ifndef FXSOLVE_FXNUM_HPP
#define FXSOLVE_FXNUM_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fxsolve/errors.hpp"
#include "fxsolve/linalg.hpp"

namespace fxsolve {

// Shared-exponent signed-mantissa representation of a vector or matrix.
// Element i holds the value mant[i] * 2^(expo - (bits-1)); the exponent is
// global to the array. Immutable after construction.
class FixedArray {
 public:
  FixedArray() = default;

  static FixedArray vector(std::vector<std::int64_t> mant, int expo, int bits);
  static FixedArray matrix(std::vector<std::int64_t> mant, int rows, int cols, int expo, int bits);

  int bits() const { return bits_; }
  int expo() const { return expo_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool is_matrix() const { return is_matrix_; }
  std::size_t size() const { return mant_.size(); }
  const std::vector<std::int64_t>& mant() const { return mant_; }
  std::int64_t mant(std::size_t i) const { return mant_[i]; }
  std::int64_t mant(int i, int j) const { return mant_[static_cast<std::size_t>(i) * cols_ + j]; }

  // Exponent of one mantissa step: value = mant * 2^(scale()).
  int scale() const { return expo_ - (bits_ - 1); }

  bool operator==(const FixedArray& other) const = default;

  // One-line text record: kind,bits,expo,rows,cols,mant0,mant1,...
  std::string to_record() const;
  static FixedArray from_record(const std::string& line);

 private:
  std::vector<std::int64_t> mant_;
  int expo_ = 0;
  int bits_ = 2;
  int rows_ = 0;
  int cols_ = 1;
  bool is_matrix_ = false;
};

// Largest representable mantissa magnitude at a given width.
std::int64_t mant_limit(int bits);

// How the shared exponent of an array is selected.
namespace policy {
struct MaxAbs {
  bool operator==(const MaxAbs&) const = default;
};
struct Distribution {  // refresh from element statistics every `period` steps
  int period = 1;
  bool operator==(const Distribution&) const = default;
};
struct Fixed {
  int value = 0;
  bool operator==(const Fixed&) const = default;
};
struct Schedule {  // (step, exponent), steps strictly increasing
  std::vector<std::pair<int, int>> steps;
  bool operator==(const Schedule&) const = default;
};
struct Decrement {  // start, minus one every `interval` steps, clamped at `floor`
  int start = 2;
  int interval = 80;
  int floor = -2;
  bool operator==(const Decrement&) const = default;
};
}  // namespace policy

using ExponentPolicy = std::variant<policy::MaxAbs, policy::Distribution, policy::Fixed,
                                    policy::Schedule, policy::Decrement>;

// Validates invariants (schedule steps strictly increasing, period >= 1,
// decrement interval >= 1 and floor <= start). Throws ConfigInvalid.
void validate_policy(const ExponentPolicy& p);

// True for policies whose exponent at a step is fixed by the step index alone.
bool policy_is_scheduled(const ExponentPolicy& p);

// Exponent of a step-indexed policy (Fixed / Schedule / Decrement).
int scheduled_exponent(const ExponentPolicy& p, int step);

// ceil(log2 m) with the convention that an exact power of two 2^p maps to p.
int ceil_log2(double m);

// Shared exponent from the maximum element magnitude. Throws AllZeroInput
// when every element is zero (callers fall back to expo = 0).
int max_exponent(const Vector& x);

// Shared exponent from element statistics: ceil_log2(|mean| + 3*stddev),
// population standard deviation. Throws DegenerateDistribution when the
// argument of the log is zero.
int distribution_exponent(const Vector& x);

// Round-toward-zero quantization of one value at (bits, expo), saturating at
// the mantissa limit. `saturated` is incremented on clamping.
std::int64_t quantize_value(double v, int bits, int expo, std::uint64_t* saturated = nullptr);

// Quantize a real vector/matrix. Scheduled policies are evaluated at `step`.
FixedArray quantize(const Vector& x, int bits, const ExponentPolicy& p, int step = 0,
                    std::uint64_t* saturated = nullptr);
FixedArray quantize(const Matrix& x, int bits, const ExponentPolicy& p, int step = 0,
                    std::uint64_t* saturated = nullptr);

Vector dequantize(const FixedArray& x);
Matrix dequantize_matrix(const FixedArray& x);

// Normalized rounding error of a quantized array (Eq. of the error model):
// ||x - x~||_2 / ||x||_2 for vectors; operator-norm ratio for matrices.
double zeta_of(const Vector& x, const FixedArray& xq);
double zeta_of(const Matrix& x, const FixedArray& xq);

// ----- exact integer intermediates ------------------------------------------------
//
// All fixed-point products and sums in this library are carried exactly in
// 128-bit integers and rounded once, on the final store. ExactVec is that
// intermediate: element i has value acc[i] * 2^log2_scale.

using int128 = __int128;

struct ExactVec {
  std::vector<int128> acc;
  int log2_scale = 0;
  int rows = 0;
  int cols = 1;
  bool is_matrix = false;
};

enum class RoundMode {
  TowardZero,  // truncate the magnitude (quantizer semantics)
  Floor        // arithmetic shift toward -inf (hardware masking semantics)
};

// Mantissa at (bits, expo) representing acc * 2^(log2_scale); saturates.
std::int64_t requantize_int(int128 acc, int log2_scale, int bits, int expo, RoundMode mode,
                            std::uint64_t* saturated = nullptr);

FixedArray requantize(const ExactVec& v, int bits, int expo, RoundMode mode,
                      std::uint64_t* saturated = nullptr);

// Exact MaxAbs exponent of an ExactVec (integer bit-length arithmetic; the
// power-of-two convention matches ceil_log2). Zero vectors give 0.
int max_exponent_exact(const ExactVec& v);

// Distribution exponent of an ExactVec (evaluated in double precision).
// Degenerate statistics fall back to 0.
int distribution_exponent_exact(const ExactVec& v);

Vector dequantize_exact(const ExactVec& v);

// Exact sum of fixed-point arrays with per-term integer weights
// (e.g. x - p + b as weights {+1,-1,+1}); result is exact.
ExactVec exact_weighted_sum(const std::vector<const FixedArray*>& terms,
                            const std::vector<int>& weights);

}  // namespace fxsolve

#endif
