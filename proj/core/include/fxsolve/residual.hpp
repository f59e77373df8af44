#ifndef FXSOLVE_RESIDUAL_HPP
#define FXSOLVE_RESIDUAL_HPP

#include <iosfwd>
#include <optional>
#include <vector>

#include "fxsolve/richardson.hpp"

namespace fxsolve {

// Reference-precision view of the forward model, used by the outer loop for
// residue updates r = y - A x and right-hand sides b = tau * At r.
class RealOperator {
 public:
  virtual ~RealOperator() = default;
  virtual int rows() const = 0;
  virtual int cols() const = 0;
  virtual Vector apply(const Vector& x) const = 0;          // A x
  virtual Vector apply_adjoint(const Vector& y) const = 0;  // At y
};

struct ResidualConfig {
  SolverConfig inner;   // shared across inner loops; exponent_policy is the schedule
  int outer_loops = 5;  // M
};

struct ResidualResult {
  Vector x;  // accumulated reference-precision solution x^(M)
  std::vector<ConvergenceTrace> inner_traces;
  std::vector<double> residual_norms;  // ||r^(l)||_2 after each outer loop
  std::vector<int> loop_start_steps;   // global step index of each inner loop
  SolveStatus status = SolveStatus::Converged;
  SystolicStats stats;
  std::uint64_t saturated = 0;

  // CSV columns: k,outer_l,theta,expo,stop_metric,residual_norm
  // (residual_norm appears on the last row of each inner loop).
  void write_csv(std::ostream& os) const;
};

// Outer residue loop: x^(0) = 0, r^(0) = y; for l = 1..M quantize
// b^(l) = tau * At r^(l-1) at the scheduled exponent, run an inner fixed-point
// Richardson solve for the correction from 0, accumulate in reference
// precision, recompute the residue in reference precision. Inner loops share
// global step numbering so exponent schedules span the whole run.
// Throws InnerDiverged when an inner solve diverges.
ResidualResult residual_solve(const RealOperator& a, const Vector& y, const FixedSystem& sys,
                              const ResidualConfig& config,
                              const std::optional<Vector>& x_star = std::nullopt);

// theta^M, the error cap after M residue updates; theta must be contractive.
double theorem2_bound(double theta, int m);

// Periodic distribution-based exponent refresh: at steps that are multiples
// of `period` the exponent is recomputed from the element statistics of x,
// otherwise the current exponent is kept.
int adaptive_exponent_update(const FixedArray& x, int period, int k);

}  // namespace fxsolve

#endif
