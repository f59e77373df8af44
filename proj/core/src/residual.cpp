#include "fxsolve/residual.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace fxsolve {

double theorem2_bound(double theta, int m) {
  if (m < 1) throw ConfigInvalid("theorem2_bound needs M >= 1");
  if (!(theta >= 0.0 && theta < 1.0)) throw ThetaNotContractive();
  return std::pow(theta, m);
}

int adaptive_exponent_update(const FixedArray& x, int period, int k) {
  if (period < 1) throw ConfigInvalid("adaptive_exponent_update needs period >= 1");
  if (k % period != 0) return x.expo();
  try {
    return distribution_exponent(dequantize(x));
  } catch (const DegenerateDistribution&) {
    return 0;
  }
}

ResidualResult residual_solve(const RealOperator& a, const Vector& y, const FixedSystem& sys,
                              const ResidualConfig& config,
                              const std::optional<Vector>& x_star) {
  if (static_cast<int>(y.size()) != a.rows()) throw ShapeMismatch("residual_solve y vs A rows");
  if (config.outer_loops < 1) throw ConfigInvalid("residual_solve needs outer_loops >= 1");
  validate_policy(config.inner.exponent_policy);

  const int n = a.cols();
  ResidualResult res;
  res.x.assign(n, 0.0);
  Vector residue = y;

  int global_step = config.inner.step_offset;
  for (int l = 1; l <= config.outer_loops; ++l) {
    // b^(l) = tau * At r^(l-1), quantized at the schedule's current exponent.
    Vector b_real = a.apply_adjoint(residue);
    for (double& v : b_real) v *= sys.tau;

    IterationMatrix im;
    im.sys = sys;
    im.b_real = b_real;
    im.b_fixed = quantize(b_real, config.inner.bits, config.inner.exponent_policy, global_step,
                          &res.saturated);

    SolverConfig inner = config.inner;
    inner.step_offset = global_step;
    SolveResult sr = richardson_solve(im, inner, x_star, &res.x);

    res.stats.block_issues += sr.stats.block_issues;
    res.stats.saturated += sr.stats.saturated;
    res.stats.multiplies += sr.stats.multiplies;
    res.saturated += sr.saturated;
    res.loop_start_steps.push_back(global_step);
    global_step += static_cast<int>(sr.trace.steps.size()) - 1;

    if (sr.trace.status == SolveStatus::Diverged) {
      res.inner_traces.push_back(std::move(sr.trace));
      res.status = SolveStatus::Diverged;
      throw InnerDiverged(l);
    }

    const Vector dx = dequantize(sr.x);
    for (int i = 0; i < n; ++i) res.x[i] += dx[i];
    residue = a.apply(res.x);
    for (std::size_t i = 0; i < residue.size(); ++i) residue[i] = y[i] - residue[i];
    res.residual_norms.push_back(norm2(residue));
    res.inner_traces.push_back(std::move(sr.trace));
  }
  res.status = res.inner_traces.back().status;
  return res;
}

void ResidualResult::write_csv(std::ostream& os) const {
  os << "k,outer_l,theta,expo,stop_metric,residual_norm\n";
  char buf[192];
  for (std::size_t l = 0; l < inner_traces.size(); ++l) {
    const ConvergenceTrace& t = inner_traces[l];
    const int base = loop_start_steps[l];
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
      const TraceStep& s = t.steps[i];
      if (i + 1 == t.steps.size() && l < residual_norms.size()) {
        std::snprintf(buf, sizeof buf, "%d,%zu,%.17g,%d,%.17g,%.17g\n", base + s.k, l + 1, s.theta,
                      s.expo, s.stop_metric, residual_norms[l]);
      } else {
        std::snprintf(buf, sizeof buf, "%d,%zu,%.17g,%d,%.17g,\n", base + s.k, l + 1, s.theta,
                      s.expo, s.stop_metric);
      }
      os << buf;
    }
  }
}

}  // namespace fxsolve
