#include "fxsolve/richardson.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <limits>
#include <ostream>

namespace fxsolve {

double step_size(double op_norm, double chi) {
  if (!(op_norm > 0.0)) throw ConfigInvalid("step_size needs op_norm > 0");
  if (!(chi > 0.0 && chi < 1.0)) throw ConfigInvalid("step_size needs chi in (0, 1)");
  return (2.0 - chi) / op_norm;
}

ConvergenceCriteria convergence_criteria(double tau, double op_norm, double kappa, double eta) {
  ConvergenceCriteria c;
  const double t = tau * op_norm;
  const bool step_ok = t > 0.0 && t < 2.0;
  if (kappa <= t) {
    // Denominator of the eta cap is nonpositive: no constraint from eta.
    c.eta_max = std::numeric_limits<double>::infinity();
    c.ok = step_ok;
    return c;
  }
  c.eta_max = t / (kappa - t);
  c.ok = step_ok && eta < c.eta_max;
  return c;
}

double theta_bound(double eta, double tau, double op_norm, double kappa) {
  return eta * (kappa / (tau * op_norm) - 1.0);
}

double theta_trajectory_bound(int k, double eta, double b_norm) {
  if (!(b_norm > 0.0 && b_norm < 1.0))
    throw ConfigInvalid("theta_trajectory_bound needs 0 < ||B|| < 1");
  const double asym = eta * b_norm / (1.0 - b_norm);
  if (!(asym < 1.0)) throw ConfigInvalid("theta_trajectory_bound needs eta||B||/(1-||B||) < 1");
  return asym + (1.0 - asym) * std::pow(b_norm, k);
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::Stagnated: return "stagnated";
    case SolveStatus::MaxIters: return "max_iters";
    case SolveStatus::Diverged: return "diverged";
  }
  return "unknown";
}

FixedNormalOp FixedNormalOp::dense(FixedArray g) {
  if (!g.is_matrix() || g.rows() != g.cols())
    throw ShapeMismatch("FixedNormalOp::dense needs a square matrix");
  FixedNormalOp op;
  op.dim_ = g.rows();
  op.bits_ = g.bits();
  op.expo_ = g.expo();
  op.dense_ = std::move(g);
  return op;
}

FixedNormalOp FixedNormalOp::circulant(const Matrix& generator, int bits) {
  FixedNormalOp op;
  op.img_rows_ = generator.rows();
  op.img_cols_ = generator.cols();
  op.dim_ = generator.rows() * generator.cols();
  op.bits_ = bits;
  const FixedArray q = quantize(generator, bits, policy::MaxAbs{});
  op.expo_ = q.expo();
  for (int r = 0; r < generator.rows(); ++r)
    for (int c = 0; c < generator.cols(); ++c)
      if (q.mant(r, c) != 0) op.taps_.push_back(Tap{r, c, q.mant(r, c)});
  return op;
}

const FixedArray& FixedNormalOp::dense_matrix() const {
  if (!dense_) throw ConfigInvalid("operator has no dense matrix");
  return *dense_;
}

ExactVec FixedNormalOp::apply_exact(const FixedArray& x, Backend backend,
                                    SystolicStats* stats) const {
  if (static_cast<int>(x.size()) != dim_) throw ShapeMismatch("FixedNormalOp apply dimension");
  if (dense_) {
    if (backend == Backend::Systolic) return systolic_matvec_exact(*dense_, x, stats);
    return fx_matvec_exact(*dense_, x);
  }
  if (backend == Backend::Systolic)
    throw ConfigInvalid("systolic backend needs a dense operator");
  // Integer circular correlation with the quantized generator; elementwise
  // identical to the dense quantized circulant matrix product.
  ExactVec out;
  out.log2_scale = (expo_ - (bits_ - 1)) + x.scale();
  out.rows = dim_;
  out.cols = 1;
  out.is_matrix = false;
  out.acc.assign(static_cast<std::size_t>(dim_), 0);
  const int R = img_rows_, C = img_cols_;
  const int prod_bits = 2 * (bits_ - 1);
  int log2taps = 0;
  while ((std::size_t{1} << log2taps) < taps_.size() + 1) ++log2taps;
  const bool narrow = prod_bits + log2taps <= 62;
  for (int r = 0; r < R; ++r) {
    for (int c = 0; c < C; ++c) {
      if (narrow) {
        std::int64_t acc = 0;
        for (const Tap& t : taps_) {
          const int sr = ((r - t.dr) % R + R) % R;
          const int sc = ((c - t.dc) % C + C) % C;
          acc += t.mant * x.mant(static_cast<std::size_t>(sr) * C + sc);
        }
        out.acc[static_cast<std::size_t>(r) * C + c] = acc;
      } else {
        int128 acc = 0;
        for (const Tap& t : taps_) {
          const int sr = ((r - t.dr) % R + R) % R;
          const int sc = ((c - t.dc) % C + C) % C;
          acc += static_cast<int128>(t.mant) * x.mant(static_cast<std::size_t>(sr) * C + sc);
        }
        out.acc[static_cast<std::size_t>(r) * C + c] = acc;
      }
    }
  }
  return out;
}

namespace {

double theta_of(const Vector& x, const Vector& x_star, const Vector* baseline, double x_star_norm) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = baseline ? x[i] + (*baseline)[i] : x[i];
    const double d = x_star[i] - xi;
    s += d * d;
  }
  return std::sqrt(s) / x_star_norm;
}

}  // namespace

SolveResult richardson_solve(const IterationMatrix& problem, const SolverConfig& config,
                             const std::optional<Vector>& x_star, const Vector* theta_baseline) {
  const FixedSystem& sys = problem.sys;
  const int n = sys.g.dim();
  const int bits = config.bits;
  if (bits != problem.b_fixed.bits() || bits != sys.g.bits())
    throw ConfigInvalid("solver bits disagree with quantized operands");
  if (static_cast<int>(problem.b_fixed.size()) != n)
    throw ShapeMismatch("b dimension vs operator");
  if (!(sys.tau > 0.0) || !(sys.tau * sys.op_norm < 2.0))
    throw ConfigInvalid("step size violates 0 < tau < 2/||AtA||");
  if (config.backend == Backend::Systolic && config.rounding != RoundMode::Floor)
    throw ConfigInvalid("systolic backend masks with floor rounding");
  validate_policy(config.exponent_policy);

  const double eps =
      config.epsilon.value_or(std::ldexp(std::sqrt(static_cast<double>(n)), 2 - bits));
  const double b_norm = norm2(dequantize(problem.b_fixed));
  const double diverge_cap = config.divergence_factor * b_norm / (sys.tau * sys.op_norm);

  const bool scheduled = policy_is_scheduled(config.exponent_policy);
  const auto* dist = std::get_if<policy::Distribution>(&config.exponent_policy);

  SolveResult res;
  if (config.eta)
    res.criteria = convergence_criteria(sys.tau, sys.op_norm, sys.kappa, *config.eta);

  const double x_star_norm = x_star ? norm2(*x_star) : 0.0;
  if (x_star && x_star_norm == 0.0) throw ConfigInvalid("x_star has zero norm");

  // x_0 = 0; a zero array is exact at any exponent.
  const int e0 = scheduled ? scheduled_exponent(config.exponent_policy, config.step_offset) : 0;
  FixedArray x = FixedArray::vector(std::vector<std::int64_t>(n, 0), e0, bits);
  Vector x_real(n, 0.0);

  res.trace.steps.push_back(TraceStep{
      0,
      x_star ? theta_of(x_real, *x_star, theta_baseline, x_star_norm)
             : std::numeric_limits<double>::quiet_NaN(),
      e0, std::numeric_limits<double>::quiet_NaN()});
  if (config.record_iterates) res.trace.iterates.push_back(x_real);

  int e_cur = e0;  // cached exponent for the Distribution policy
  res.trace.status = SolveStatus::MaxIters;

  for (int k = 0; k < config.max_iters; ++k) {
    const int gstep = config.step_offset + k;
    const ExactVec prod = sys.g.apply_exact(x, config.backend, &res.stats);

    int e_prod;
    if (scheduled) {
      e_prod = scheduled_exponent(config.exponent_policy, gstep);
    } else if (dist) {
      if (gstep % dist->period == 0 || k == 0) e_cur = distribution_exponent_exact(prod);
      e_prod = e_cur;
    } else {
      e_prod = max_exponent_exact(prod);
    }
    const FixedArray p = requantize(prod, bits, e_prod, config.rounding, &res.saturated);

    const ExactVec sum = exact_weighted_sum({&x, &p, &problem.b_fixed}, {1, -1, 1});
    int e_state;
    if (scheduled) {
      e_state = e_prod;
    } else if (dist) {
      e_state = e_cur;
    } else {
      e_state = max_exponent_exact(sum);
    }
    const FixedArray x_next = requantize(sum, bits, e_state, config.rounding, &res.saturated);

    const Vector x_next_real = dequantize(x_next);
    const double stop_metric = norm2_diff(x_next_real, x_real);
    const bool identical = x_next == x;

    x = x_next;
    x_real = x_next_real;

    res.trace.steps.push_back(TraceStep{
        k + 1,
        x_star ? theta_of(x_real, *x_star, theta_baseline, x_star_norm)
               : std::numeric_limits<double>::quiet_NaN(),
        e_prod, stop_metric});
    if (config.record_iterates) res.trace.iterates.push_back(x_real);

    if (norm2(x_real) > diverge_cap) {
      res.trace.status = SolveStatus::Diverged;
      break;
    }
    if (identical) {
      res.trace.status = SolveStatus::Stagnated;
      break;
    }
    if (stop_metric < eps) {
      res.trace.status = SolveStatus::Converged;
      break;
    }
  }
  res.x = x;
  return res;
}

void ConvergenceTrace::write_csv(std::ostream& os) const {
  os << "k,theta,expo,stop_metric\n";
  char buf[128];
  for (const TraceStep& s : steps) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%d,%.17g\n", s.k, s.theta, s.expo, s.stop_metric);
    os << buf;
  }
}

double estimate_asymptote(const ConvergenceTrace& trace) {
  if (trace.steps.empty()) throw InsufficientData("empty trace");
  const std::size_t n = trace.steps.size();
  const std::size_t tail = std::max<std::size_t>(1, n / 10);
  double s = 0.0;
  for (std::size_t i = n - tail; i < n; ++i) s += trace.steps[i].theta;
  return s / static_cast<double>(tail);
}

RateFit fit_convergence_rate(const ConvergenceTrace& trace, double asymptote) {
  // Pre-asymptotic segment: the prefix before theta first dips within 5% of
  // the asymptote. Points past that are stagnation ripple, not decay. The
  // leading fifth of the window is dropped as multi-mode transient, keeping
  // at least ten samples.
  std::vector<double> ks, ys;
  for (const TraceStep& s : trace.steps) {
    if (!std::isfinite(s.theta)) continue;
    if (s.theta <= 1.05 * asymptote) break;
    ks.push_back(static_cast<double>(s.k));
    ys.push_back(std::log(s.theta - asymptote));
  }
  int n = static_cast<int>(ks.size());
  if (n < 10) throw InsufficientData("need >= 10 samples above 1.05x the asymptote, have " +
                                     std::to_string(n));
  const int burn = std::min(n / 5, n - 10);
  if (burn > 0) {
    ks.erase(ks.begin(), ks.begin() + burn);
    ys.erase(ys.begin(), ys.begin() + burn);
    n -= burn;
  }
  double mk = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    mk += ks[i];
    my += ys[i];
  }
  mk /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxx += (ks[i] - mk) * (ks[i] - mk);
    sxy += (ks[i] - mk) * (ys[i] - my);
  }
  if (sxx == 0.0) throw InsufficientData("degenerate fit abscissa");
  const double slope = sxy / sxx;
  double ss_res = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = ys[i] - (my + slope * (ks[i] - mk));
    ss_res += r * r;
  }
  const double se = std::sqrt(ss_res / (n - 2) / sxx);
  const boost::math::students_t dist(n - 2);
  const double tq = boost::math::quantile(dist, 0.975);
  return RateFit{-slope, tq * se, n};
}

}  // namespace fxsolve
