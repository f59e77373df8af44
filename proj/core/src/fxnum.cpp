#include "fxsolve/fxnum.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>

namespace fxsolve {

namespace {

void check_bits(int bits) {
  if (bits < 2 || bits > 64) throw ConfigInvalid("bit width must be in [2, 64]");
}

int bit_length(unsigned __int128 v) {
  int n = 0;
  while (v) {
    v >>= 1;
    ++n;
  }
  return n;
}

unsigned __int128 abs128(int128 v) {
  return v < 0 ? -static_cast<unsigned __int128>(v) : static_cast<unsigned __int128>(v);
}

}  // namespace

FixedArray FixedArray::vector(std::vector<std::int64_t> mant, int expo, int bits) {
  check_bits(bits);
  FixedArray a;
  a.rows_ = static_cast<int>(mant.size());
  a.cols_ = 1;
  a.is_matrix_ = false;
  a.mant_ = std::move(mant);
  a.expo_ = expo;
  a.bits_ = bits;
  const std::int64_t lim = mant_limit(bits);
  for (std::int64_t m : a.mant_)
    if (m > lim || m < -lim) throw ConfigInvalid("mantissa exceeds bit width");
  return a;
}

FixedArray FixedArray::matrix(std::vector<std::int64_t> mant, int rows, int cols, int expo,
                              int bits) {
  check_bits(bits);
  if (rows * static_cast<std::size_t>(cols) != mant.size())
    throw ShapeMismatch("mantissa count vs rows*cols");
  FixedArray a;
  a.rows_ = rows;
  a.cols_ = cols;
  a.is_matrix_ = true;
  a.mant_ = std::move(mant);
  a.expo_ = expo;
  a.bits_ = bits;
  const std::int64_t lim = mant_limit(bits);
  for (std::int64_t m : a.mant_)
    if (m > lim || m < -lim) throw ConfigInvalid("mantissa exceeds bit width");
  return a;
}

std::string FixedArray::to_record() const {
  std::ostringstream os;
  os << (is_matrix_ ? "matrix" : "vector") << ',' << bits_ << ',' << expo_ << ',' << rows_ << ','
     << cols_;
  for (std::int64_t m : mant_) os << ',' << m;
  return os.str();
}

FixedArray FixedArray::from_record(const std::string& line) {
  std::istringstream is(line);
  std::string kind;
  std::getline(is, kind, ',');
  auto next_int = [&is]() {
    std::string tok;
    if (!std::getline(is, tok, ',')) throw UnsupportedFormat("truncated FixedArray record");
    return std::stoll(tok);
  };
  const int bits = static_cast<int>(next_int());
  const int expo = static_cast<int>(next_int());
  const int rows = static_cast<int>(next_int());
  const int cols = static_cast<int>(next_int());
  std::vector<std::int64_t> mant;
  mant.reserve(static_cast<std::size_t>(rows) * cols);
  for (std::size_t i = 0; i < static_cast<std::size_t>(rows) * cols; ++i) mant.push_back(next_int());
  if (kind == "matrix") return FixedArray::matrix(std::move(mant), rows, cols, expo, bits);
  if (kind == "vector") return FixedArray::vector(std::move(mant), expo, bits);
  throw UnsupportedFormat("unknown FixedArray record kind '" + kind + "'");
}

std::int64_t mant_limit(int bits) {
  check_bits(bits);
  if (bits == 64) return std::numeric_limits<std::int64_t>::max();
  return (std::int64_t{1} << (bits - 1)) - 1;
}

void validate_policy(const ExponentPolicy& p) {
  if (const auto* d = std::get_if<policy::Distribution>(&p)) {
    if (d->period < 1) throw ConfigInvalid("distribution policy period must be >= 1");
  } else if (const auto* s = std::get_if<policy::Schedule>(&p)) {
    if (s->steps.empty()) throw ConfigInvalid("schedule policy has no entries");
    for (std::size_t i = 1; i < s->steps.size(); ++i)
      if (s->steps[i].first <= s->steps[i - 1].first)
        throw ConfigInvalid("schedule steps must be strictly increasing");
  } else if (const auto* d = std::get_if<policy::Decrement>(&p)) {
    if (d->interval < 1) throw ConfigInvalid("decrement interval must be >= 1");
    if (d->floor > d->start) throw ConfigInvalid("decrement floor exceeds start");
  }
}

bool policy_is_scheduled(const ExponentPolicy& p) {
  return std::holds_alternative<policy::Fixed>(p) || std::holds_alternative<policy::Schedule>(p) ||
         std::holds_alternative<policy::Decrement>(p);
}

int scheduled_exponent(const ExponentPolicy& p, int step) {
  if (const auto* f = std::get_if<policy::Fixed>(&p)) return f->value;
  if (const auto* s = std::get_if<policy::Schedule>(&p)) {
    int e = s->steps.front().second;
    for (const auto& [k, v] : s->steps)
      if (k <= step) e = v;
    return e;
  }
  if (const auto* d = std::get_if<policy::Decrement>(&p))
    return std::max(d->floor, d->start - step / d->interval);
  throw ConfigInvalid("policy has no step-indexed exponent");
}

int ceil_log2(double m) {
  if (!(m > 0.0) || !std::isfinite(m)) throw ConfigInvalid("ceil_log2 needs a positive finite value");
  int e = 0;
  const double f = std::frexp(m, &e);  // m = f * 2^e, f in [0.5, 1)
  return f == 0.5 ? e - 1 : e;
}

int max_exponent(const Vector& x) {
  if (x.empty()) throw ConfigInvalid("max_exponent of an empty array");
  const double m = max_abs(x);
  if (m == 0.0) throw AllZeroInput();
  return ceil_log2(m);
}

int distribution_exponent(const Vector& x) {
  if (x.empty()) throw ConfigInvalid("distribution_exponent of an empty array");
  double mu = 0.0;
  for (double v : x) mu += v;
  mu /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mu) * (v - mu);
  var /= static_cast<double>(x.size());
  const double spread = std::fabs(mu) + 3.0 * std::sqrt(var);
  if (spread == 0.0) throw DegenerateDistribution();
  return ceil_log2(spread);
}

std::int64_t quantize_value(double v, int bits, int expo, std::uint64_t* saturated) {
  const std::int64_t lim = mant_limit(bits);
  const double scaled = std::trunc(std::ldexp(std::fabs(v), bits - 1 - expo));
  std::int64_t mag;
  if (scaled > static_cast<double>(lim)) {
    mag = lim;
    if (saturated) ++*saturated;
  } else {
    mag = static_cast<std::int64_t>(scaled);
  }
  return v < 0.0 ? -mag : mag;
}

namespace {

int policy_exponent_for_real(const Vector& x, const ExponentPolicy& p, int step) {
  if (std::holds_alternative<policy::MaxAbs>(p)) {
    try {
      return max_exponent(x);
    } catch (const AllZeroInput&) {
      return 0;
    }
  }
  if (std::holds_alternative<policy::Distribution>(p)) {
    try {
      return distribution_exponent(x);
    } catch (const DegenerateDistribution&) {
      return 0;
    }
  }
  return scheduled_exponent(p, step);
}

std::vector<std::int64_t> quantize_all(const Vector& x, int bits, int expo,
                                       std::uint64_t* saturated) {
  std::vector<std::int64_t> mant(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) mant[i] = quantize_value(x[i], bits, expo, saturated);
  return mant;
}

}  // namespace

FixedArray quantize(const Vector& x, int bits, const ExponentPolicy& p, int step,
                    std::uint64_t* saturated) {
  check_bits(bits);
  validate_policy(p);
  const int expo = policy_exponent_for_real(x, p, step);
  return FixedArray::vector(quantize_all(x, bits, expo, saturated), expo, bits);
}

FixedArray quantize(const Matrix& x, int bits, const ExponentPolicy& p, int step,
                    std::uint64_t* saturated) {
  check_bits(bits);
  validate_policy(p);
  const int expo = policy_exponent_for_real(x.data(), p, step);
  return FixedArray::matrix(quantize_all(x.data(), bits, expo, saturated), x.rows(), x.cols(),
                            expo, bits);
}

Vector dequantize(const FixedArray& x) {
  Vector out(x.size());
  const int s = x.scale();
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = std::ldexp(static_cast<double>(x.mant(i)), s);
  return out;
}

Matrix dequantize_matrix(const FixedArray& x) {
  if (!x.is_matrix()) throw ShapeMismatch("dequantize_matrix on a vector");
  Matrix m(x.rows(), x.cols());
  const int s = x.scale();
  for (std::size_t i = 0; i < x.size(); ++i)
    m.data()[i] = std::ldexp(static_cast<double>(x.mant(i)), s);
  return m;
}

double zeta_of(const Vector& x, const FixedArray& xq) {
  if (x.size() != xq.size()) throw ShapeMismatch("zeta_of operand sizes");
  const double nx = norm2(x);
  if (nx == 0.0) throw ZeroNorm();
  return norm2_diff(x, dequantize(xq)) / nx;
}

// Matrix zeta needs operator norms; implemented in fxlinalg.cpp.

std::int64_t requantize_int(int128 acc, int log2_scale, int bits, int expo, RoundMode mode,
                            std::uint64_t* saturated) {
  const std::int64_t lim = mant_limit(bits);
  // mant = round(acc * 2^t), t = log2_scale + (bits-1) - expo
  const int t = log2_scale + (bits - 1) - expo;
  int128 m;
  if (acc == 0) {
    m = 0;
  } else if (t >= 0) {
    if (bit_length(abs128(acc)) + t > 126) {
      if (saturated) ++*saturated;
      return acc > 0 ? lim : -lim;
    }
    m = acc << t;
  } else {
    const int s = -t;
    if (s >= 127) {
      // Quotient magnitude below one: floor keeps -1 for negatives.
      m = (mode == RoundMode::Floor && acc < 0) ? -1 : 0;
    } else {
      const int128 d = int128{1} << s;
      int128 q = acc / d;  // trunc toward zero
      if (mode == RoundMode::Floor && acc % d != 0 && acc < 0) q -= 1;
      m = q;
    }
  }
  if (m > lim) {
    if (saturated) ++*saturated;
    return lim;
  }
  if (m < -lim) {
    if (saturated) ++*saturated;
    return -lim;
  }
  return static_cast<std::int64_t>(m);
}

FixedArray requantize(const ExactVec& v, int bits, int expo, RoundMode mode,
                      std::uint64_t* saturated) {
  std::vector<std::int64_t> mant(v.acc.size());
  for (std::size_t i = 0; i < v.acc.size(); ++i)
    mant[i] = requantize_int(v.acc[i], v.log2_scale, bits, expo, mode, saturated);
  if (v.is_matrix) return FixedArray::matrix(std::move(mant), v.rows, v.cols, expo, bits);
  return FixedArray::vector(std::move(mant), expo, bits);
}

int max_exponent_exact(const ExactVec& v) {
  unsigned __int128 m = 0;
  for (int128 a : v.acc) m = std::max(m, abs128(a));
  if (m == 0) return 0;
  const int bl = bit_length(m);
  const bool pow2 = (m & (m - 1)) == 0;
  return (pow2 ? bl - 1 : bl) + v.log2_scale;
}

int distribution_exponent_exact(const ExactVec& v) {
  if (v.acc.empty()) return 0;
  double mu = 0.0;
  for (int128 a : v.acc) mu += std::ldexp(static_cast<double>(a), v.log2_scale);
  mu /= static_cast<double>(v.acc.size());
  double var = 0.0;
  for (int128 a : v.acc) {
    const double d = std::ldexp(static_cast<double>(a), v.log2_scale) - mu;
    var += d * d;
  }
  var /= static_cast<double>(v.acc.size());
  const double spread = std::fabs(mu) + 3.0 * std::sqrt(var);
  if (spread == 0.0) return 0;
  return ceil_log2(spread);
}

Vector dequantize_exact(const ExactVec& v) {
  Vector out(v.acc.size());
  for (std::size_t i = 0; i < v.acc.size(); ++i)
    out[i] = std::ldexp(static_cast<double>(v.acc[i]), v.log2_scale);
  return out;
}

ExactVec exact_weighted_sum(const std::vector<const FixedArray*>& terms,
                            const std::vector<int>& weights) {
  if (terms.empty() || terms.size() != weights.size())
    throw ConfigInvalid("exact_weighted_sum needs matching terms and weights");
  const std::size_t n = terms[0]->size();
  int scale = terms[0]->scale();
  for (const FixedArray* t : terms) {
    if (t->size() != n) throw ShapeMismatch("exact_weighted_sum term sizes");
    scale = std::min(scale, t->scale());
  }
  ExactVec out;
  out.acc.assign(n, 0);
  out.log2_scale = scale;
  out.rows = terms[0]->rows();
  out.cols = terms[0]->cols();
  out.is_matrix = terms[0]->is_matrix();
  for (std::size_t t = 0; t < terms.size(); ++t) {
    const int sh = terms[t]->scale() - scale;
    if (sh > 120) throw ConfigInvalid("exponent spread too large for exact summation");
    for (std::size_t i = 0; i < n; ++i)
      out.acc[i] += (static_cast<int128>(terms[t]->mant(i)) * weights[t]) << sh;
  }
  return out;
}

}  // namespace fxsolve
