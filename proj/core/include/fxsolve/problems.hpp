#ifndef FXSOLVE_PROBLEMS_HPP
#define FXSOLVE_PROBLEMS_HPP

#include <complex>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fxsolve/residual.hpp"
#include "fxsolve/richardson.hpp"

namespace fxsolve {

// 2-D circular-convolution forward model in its spectral form: the operator
// is diagonalized by the DFT, so eigenvalues of AtA are |K~|^2 and both the
// forward map and the AtA generator come from the kernel spectrum.
struct CirculantModel {
  int rows = 0, cols = 0;                      // image shape
  std::vector<std::complex<double>> spectrum;  // K~: DFT of the wrapped kernel
  Matrix normal_generator;                     // IDFT(|K~|^2): generator image of AtA
};

struct ProblemSpec {
  std::optional<Matrix> a;            // dense A
  std::optional<CirculantModel> circ; // or an implicit convolution operator
  Vector y;
  Vector x_star;
  double op_norm = 0.0;  // ||AtA||_2
  double kappa = 1.0;    // cond(AtA)
  std::vector<std::pair<std::string, std::string>> meta;

  int unknowns() const;
  bool is_circulant() const { return circ.has_value(); }
};

class DenseOperator final : public RealOperator {
 public:
  explicit DenseOperator(Matrix a) : a_(std::move(a)) {}
  int rows() const override { return a_.rows(); }
  int cols() const override { return a_.cols(); }
  Vector apply(const Vector& x) const override { return matvec(a_, x); }
  Vector apply_adjoint(const Vector& y) const override { return matvec_transposed(a_, y); }

 private:
  Matrix a_;
};

class CirculantOperator final : public RealOperator {
 public:
  explicit CirculantOperator(CirculantModel model) : m_(std::move(model)) {}
  int rows() const override { return m_.rows * m_.cols; }
  int cols() const override { return m_.rows * m_.cols; }
  Vector apply(const Vector& x) const override;
  Vector apply_adjoint(const Vector& y) const override;

 private:
  CirculantModel m_;
};

std::unique_ptr<RealOperator> make_operator(const ProblemSpec& p);

// Quantize the iteration operator G = tau * AtA for a problem; tau defaults
// to step_size(op_norm, chi). Validates the step-size window.
FixedSystem make_fixed_system(const ProblemSpec& p, const SolverConfig& config);

// FixedSystem plus b = quantize(tau * At y) at the policy's step-0 exponent.
IterationMatrix make_iteration_matrix(const ProblemSpec& p, const SolverConfig& config);

// Normalized matvec error of the problem's quantized AtA at `bits`, MaxAbs
// exponents, sampled around b = tau * At y (mean over n_samples).
double problem_eta(const ProblemSpec& p, double tau, int bits, int n_samples, std::uint64_t seed);

// ---- problem constructors --------------------------------------------------

// Symmetric 4x4 system built on the orthonormal DCT-II basis with linearly
// spaced eigenvalues on [1/sqrt(kappa_target), 1], so cond(AtA) equals
// kappa_target exactly and ||AtA|| = 1.
ProblemSpec dct_inversion_problem(double kappa_target, std::uint64_t seed = 1);

struct GaussianKernel {
  double sigma = 0.0;
  int rows = 0, cols = 0;  // odd support, centered
  double k0 = 0.0;         // normalization: sum of squares = 1
  Matrix values;
};

GaussianKernel gaussian_kernel(double sigma, int rows = 5, int cols = 5);

struct ConvolutionSpectrum {
  std::vector<double> eigenvalues;  // |K~|^2 over the (rows x cols) grid
  double kappa = 1.0;
  double op_norm = 0.0;
};

// Eigenvalues of AtA for circular convolution with the kernel at this image
// shape. Throws SingularKernel when the smallest |K~|^2 drops below 1e-15.
ConvolutionSpectrum convolution_spectrum(const GaussianKernel& kernel, int image_rows,
                                         int image_cols);

// Blur the image with the kernel (spectral form, reference precision),
// quantize the measurement to measurement_bits, and package the implicit
// circulant system.
ProblemSpec deconvolution_problem(const Matrix& image, double sigma, int measurement_bits,
                                  int kernel_rows = 5, int kernel_cols = 5);

// Dense materialization of a circulant system's A (small images only).
Matrix materialize_dense(const ProblemSpec& p, int max_unknowns = 4096);

// Parallel-beam tomography of an image on the unit-pixel grid: n_projections
// view angles spread over angle_span degrees, n_beams rays per view spanning
// the grid diagonal, path lengths by Siddon ray tracing. Rays that miss the
// grid produce zero rows and are dropped (count recorded in meta).
ProblemSpec tomography_problem(const Matrix& image, int n_projections = 60, int n_beams = 31,
                               double angle_span = 180.0);

// Grayscale image from a binary PGM (P5) or a CSV grid, mapped to [0, 1) and
// quantized to `bits` with exponent 0.
Matrix load_image(const std::string& path, int bits);

void save_image_pgm(const std::string& path, const Matrix& image);
void save_image_csv(const std::string& path, const Matrix& image);

}  // namespace fxsolve

#endif
