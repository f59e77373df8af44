#ifndef FXSOLVE_ERRORS_HPP
#define FXSOLVE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace fxsolve {

// Base class for everything this library throws.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AllZeroInput : Error {
  AllZeroInput() : Error("max_exponent: input is all zero, caller must fall back (expo = 0)") {}
};
struct DegenerateDistribution : Error {
  DegenerateDistribution() : Error("distribution_exponent: |mean| + 3*std is zero") {}
};
struct ZeroNorm : Error {
  ZeroNorm() : Error("zeta_of: reference array has zero norm") {}
};
struct ShapeMismatch : Error {
  explicit ShapeMismatch(const std::string& what) : Error("shape mismatch: " + what) {}
};
struct NoConvergence : Error {
  explicit NoConvergence(const std::string& what) : Error("no convergence: " + what) {}
};
struct SingularMatrix : Error {
  explicit SingularMatrix(const std::string& what) : Error("singular matrix: " + what) {}
};
struct ConfigInvalid : Error {
  explicit ConfigInvalid(const std::string& what) : Error("invalid config: " + what) {}
};
struct InsufficientData : Error {
  explicit InsufficientData(const std::string& what) : Error("insufficient data: " + what) {}
};
struct ThetaNotContractive : Error {
  ThetaNotContractive() : Error("theorem2_bound: theta >= 1, residual iteration cannot refine") {}
};
struct InnerDiverged : Error {
  int outer_loop;
  explicit InnerDiverged(int l)
      : Error("residual iteration: inner Richardson solve diverged at outer loop " +
              std::to_string(l)),
        outer_loop(l) {}
};
struct AccumulatorOverflow : Error {
  AccumulatorOverflow() : Error("systolic emulator: 32-bit accumulator overflow") {}
};
struct SingularKernel : Error {
  SingularKernel() : Error("convolution kernel spectrum has (near-)zero eigenvalue; deconvolution ill-posed") {}
};
struct DegenerateGeometry : Error {
  explicit DegenerateGeometry(const std::string& what) : Error("degenerate geometry: " + what) {}
};
struct UnsupportedFormat : Error {
  explicit UnsupportedFormat(const std::string& what) : Error("unsupported format: " + what) {}
};
struct OutOfRange : Error {
  explicit OutOfRange(const std::string& what) : Error("out of range: " + what) {}
};

}  // namespace fxsolve

#endif
