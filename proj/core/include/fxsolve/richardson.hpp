#ifndef FXSOLVE_RICHARDSON_HPP
#define FXSOLVE_RICHARDSON_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fxsolve/fxlinalg.hpp"
#include "fxsolve/fxnum.hpp"
#include "fxsolve/systolic.hpp"

namespace fxsolve {

double step_size(double op_norm, double chi);

struct ConvergenceCriteria {
  bool ok = false;
  double eta_max = 0.0;  // +inf when kappa <= tau*op_norm (no constraint from eta)
};

// Convergence gate: 0 < tau*||AtA|| < 2 and eta below the kappa-dependent cap.
ConvergenceCriteria convergence_criteria(double tau, double op_norm, double kappa, double eta);

// Asymptotic normalized error cap: eta * (kappa / (tau*||AtA||) - 1).
double theta_bound(double eta, double tau, double op_norm, double kappa);

// Per-step error envelope with ||B|| = 1 - tau*||AtA||/kappa:
// asymptote + (1 - asymptote) * ||B||^k.
double theta_trajectory_bound(int k, double eta, double b_norm);

enum class Backend { Direct, Systolic };

// Fixed-point representation of the iteration operator G = tau * AtA:
// either a dense quantized matrix or, for convolutional systems, the
// quantized circulant generator applied as an integer circular correlation
// (elementwise identical to quantizing the dense circulant matrix).
class FixedNormalOp {
 public:
  static FixedNormalOp dense(FixedArray g);
  // Generator image of a 2-D circulant operator, quantized at (bits, MaxAbs).
  static FixedNormalOp circulant(const Matrix& generator, int bits);

  int dim() const { return dim_; }
  int bits() const { return bits_; }
  int expo() const { return expo_; }
  bool is_dense() const { return dense_.has_value(); }
  const FixedArray& dense_matrix() const;

  // Exact integer product with a fixed-point vector; never rounds.
  ExactVec apply_exact(const FixedArray& x, Backend backend, SystolicStats* stats) const;

 private:
  std::optional<FixedArray> dense_;
  // circulant taps: (row offset, col offset, mantissa)
  struct Tap {
    int dr, dc;
    std::int64_t mant;
  };
  std::vector<Tap> taps_;
  int img_rows_ = 0, img_cols_ = 0;
  int dim_ = 0;
  int bits_ = 8;
  int expo_ = 0;
};

struct FixedSystem {
  FixedNormalOp g;       // quantized tau * AtA
  double tau = 0.0;
  double op_norm = 0.0;  // ||AtA||_2 at reference precision
  double kappa = 1.0;    // cond(AtA)
};

struct IterationMatrix {
  FixedSystem sys;
  FixedArray b_fixed;  // quantized tau * At y
  Vector b_real;
};

struct SolverConfig {
  int bits = 8;
  double chi = 0.2;
  std::optional<double> tau;      // derived via step_size(op_norm, chi) when absent
  std::optional<double> epsilon;  // default 2^(2-bits) * sqrt(N)
  int max_iters = 200;
  ExponentPolicy exponent_policy = policy::MaxAbs{};
  Backend backend = Backend::Direct;
  // Requantization of products and state updates. Floor matches the hardware
  // masking path, so direct and systolic backends produce identical traces.
  RoundMode rounding = RoundMode::Floor;
  std::optional<double> eta;  // measured matvec error; enables the criteria flag
  int step_offset = 0;        // global step index of this solve's first step
  bool record_iterates = false;
  double divergence_factor = 1e3;
};

enum class SolveStatus { Converged, Stagnated, MaxIters, Diverged };

std::string to_string(SolveStatus s);

struct TraceStep {
  int k = 0;
  double theta = 0.0;       // NaN when no reference solution was supplied
  int expo = 0;             // product exponent used at this step
  double stop_metric = 0.0; // ||dx_k - dx_{k-1}||_2; NaN at k = 0
};

struct ConvergenceTrace {
  std::vector<TraceStep> steps;
  SolveStatus status = SolveStatus::MaxIters;
  std::vector<Vector> iterates;  // filled when record_iterates is set

  // CSV columns: k,theta,expo,stop_metric
  void write_csv(std::ostream& os) const;
};

struct SolveResult {
  FixedArray x;
  ConvergenceTrace trace;
  SystolicStats stats;
  std::uint64_t saturated = 0;
  std::optional<ConvergenceCriteria> criteria;  // set when config.eta was given
};

// Fixed-point Richardson iteration x_{k+1} = x_k - G x_k + b from x_0 = 0,
// run entirely in fixed point at config.bits. theta is logged against x_star
// when given (diagnostic only). theta_baseline, when set, is added to the
// iterate before comparing with x_star (used by the residual outer loop).
SolveResult richardson_solve(const IterationMatrix& problem, const SolverConfig& config,
                             const std::optional<Vector>& x_star = std::nullopt,
                             const Vector* theta_baseline = nullptr);

struct RateFit {
  double gamma = 0.0;
  double ci95 = 0.0;
  int points = 0;
};

// Least-squares fit of log(theta_k - asymptote) against k over samples above
// 1.05x the asymptote; needs at least 10 such samples. ci95 is the 95%
// half-width from the standard error of the slope.
RateFit fit_convergence_rate(const ConvergenceTrace& trace, double asymptote);

// Mean theta over the last tenth of the trace.
double estimate_asymptote(const ConvergenceTrace& trace);

}  // namespace fxsolve

#endif
