#include "fxsolve/problems.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "dft.hpp"
#include "fxsolve/rng.hpp"

namespace fxsolve {

using detail::dft_2d;
using cd = std::complex<double>;

int ProblemSpec::unknowns() const {
  if (a) return a->cols();
  if (circ) return circ->rows * circ->cols;
  return 0;
}

namespace {

std::vector<cd> to_complex(const Vector& x) {
  std::vector<cd> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = cd(x[i], 0.0);
  return out;
}

Vector real_part(const std::vector<cd>& x) {
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i].real();
  return out;
}

Vector spectral_multiply(const CirculantModel& m, const Vector& x, bool conjugate) {
  std::vector<cd> f = to_complex(x);
  dft_2d(f, m.rows, m.cols, false);
  for (std::size_t i = 0; i < f.size(); ++i)
    f[i] *= conjugate ? std::conj(m.spectrum[i]) : m.spectrum[i];
  dft_2d(f, m.rows, m.cols, true);
  return real_part(f);
}

}  // namespace

Vector CirculantOperator::apply(const Vector& x) const { return spectral_multiply(m_, x, false); }
Vector CirculantOperator::apply_adjoint(const Vector& y) const {
  return spectral_multiply(m_, y, true);
}

std::unique_ptr<RealOperator> make_operator(const ProblemSpec& p) {
  if (p.a) return std::make_unique<DenseOperator>(*p.a);
  if (p.circ) return std::make_unique<CirculantOperator>(*p.circ);
  throw ConfigInvalid("problem has no forward model");
}

FixedSystem make_fixed_system(const ProblemSpec& p, const SolverConfig& config) {
  FixedSystem sys;
  sys.op_norm = p.op_norm;
  sys.kappa = p.kappa;
  sys.tau = config.tau.value_or(step_size(p.op_norm, config.chi));
  if (!(sys.tau > 0.0 && sys.tau * sys.op_norm < 2.0))
    throw ConfigInvalid("tau violates 0 < tau < 2/||AtA||");
  if (p.a) {
    Matrix g = gram(*p.a);
    for (double& v : g.data()) v *= sys.tau;
    sys.g = FixedNormalOp::dense(quantize(g, config.bits, policy::MaxAbs{}));
  } else if (p.circ) {
    Matrix g = p.circ->normal_generator;
    for (double& v : g.data()) v *= sys.tau;
    sys.g = FixedNormalOp::circulant(g, config.bits);
  } else {
    throw ConfigInvalid("problem has no forward model");
  }
  return sys;
}

IterationMatrix make_iteration_matrix(const ProblemSpec& p, const SolverConfig& config) {
  IterationMatrix im;
  im.sys = make_fixed_system(p, config);
  const auto op = make_operator(p);
  im.b_real = op->apply_adjoint(p.y);
  for (double& v : im.b_real) v *= im.sys.tau;
  im.b_fixed = quantize(im.b_real, config.bits, config.exponent_policy, config.step_offset);
  return im;
}

double problem_eta(const ProblemSpec& p, double tau, int bits, int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw ConfigInvalid("problem_eta needs n_samples >= 1");
  const auto op = make_operator(p);
  Vector b = op->apply_adjoint(p.y);
  for (double& v : b) v *= tau;
  const double stddev = norm2_diff(b, p.x_star) / 2.0;

  // Quantized, unscaled AtA at MaxAbs.
  FixedNormalOp fixed_normal = [&] {
    if (p.a) return FixedNormalOp::dense(quantize(gram(*p.a), bits, policy::MaxAbs{}));
    return FixedNormalOp::circulant(p.circ->normal_generator, bits);
  }();
  const auto ref_normal = [&](const Vector& x) { return op->apply_adjoint(op->apply(x)); };

  double mean = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    Rng rng = Rng::split(seed, static_cast<std::uint64_t>(s));
    Vector x(b.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal(b[i], stddev);
    const FixedArray xq = quantize(x, bits, policy::MaxAbs{});
    const Vector fx = dequantize_exact(fixed_normal.apply_exact(xq, Backend::Direct, nullptr));
    const Vector ref = ref_normal(x);
    const double nx = norm2(x);
    if (nx == 0.0) continue;
    mean += norm2_diff(fx, ref) / (p.op_norm * nx);
  }
  return mean / static_cast<double>(n_samples);
}

// ---- DCT-based inversion ----------------------------------------------------

ProblemSpec dct_inversion_problem(double kappa_target, std::uint64_t seed) {
  if (!(kappa_target >= 1.0)) throw ConfigInvalid("dct_inversion_problem needs kappa >= 1");
  constexpr int n = 4;
  Matrix c(n, n);
  for (int k = 0; k < n; ++k) {
    const double sk = k == 0 ? std::sqrt(0.5) : 1.0;
    for (int j = 0; j < n; ++j)
      c(k, j) = sk * std::sqrt(2.0 / n) * std::cos(M_PI * (2 * j + 1) * k / (2.0 * n));
  }
  const double lo = 1.0 / std::sqrt(kappa_target);
  Vector lambda(n);
  for (int i = 0; i < n; ++i) lambda[i] = lo + (1.0 - lo) * i / (n - 1);

  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += c(k, i) * lambda[k] * c(k, j);
      a(i, j) = s;
    }

  ProblemSpec p;
  p.a = a;
  p.op_norm = 1.0;  // eigenvalues of AtA are lambda^2, max = 1
  p.kappa = kappa_target;
  Rng rng(seed * 0x9e3779b97f4a7c15ull + 0x1234567);
  p.x_star.resize(n);
  for (int i = 0; i < n; ++i) p.x_star[i] = rng.uniform(-1.0, 1.0);
  p.y = matvec(a, p.x_star);
  std::ostringstream ev;
  for (int i = 0; i < n; ++i) ev << (i ? " " : "") << lambda[i];
  p.meta = {{"problem", "dct_inversion"},
            {"kappa_target", std::to_string(kappa_target)},
            {"eigenvalues_of_A", ev.str()},
            {"seed", std::to_string(seed)}};
  return p;
}

// ---- Gaussian deconvolution -------------------------------------------------

GaussianKernel gaussian_kernel(double sigma, int rows, int cols) {
  if (!(sigma > 0.0)) throw ConfigInvalid("gaussian_kernel needs sigma > 0");
  if (rows % 2 == 0 || cols % 2 == 0 || rows < 1 || cols < 1)
    throw ConfigInvalid("gaussian_kernel support must be odd-by-odd");
  GaussianKernel k;
  k.sigma = sigma;
  k.rows = rows;
  k.cols = cols;
  k.values = Matrix(rows, cols);
  const int cr = (rows - 1) / 2, cc = (cols - 1) / 2;
  double sumsq = 0.0;
  for (int p = 0; p < rows; ++p)
    for (int q = 0; q < cols; ++q) {
      const double d2 = (p - cr) * static_cast<double>(p - cr) +
                        (q - cc) * static_cast<double>(q - cc);
      const double v = std::exp(-d2 / (sigma * sigma));
      k.values(p, q) = v;
      sumsq += v * v;
    }
  k.k0 = 1.0 / std::sqrt(sumsq);
  for (double& v : k.values.data()) v *= k.k0;
  return k;
}

namespace {

// Kernel wrapped onto the image grid with its center at (0, 0).
Matrix wrap_kernel(const GaussianKernel& k, int rows, int cols) {
  if (rows < k.rows || cols < k.cols)
    throw ConfigInvalid("image smaller than the kernel support");
  Matrix h(rows, cols);
  const int cr = (k.rows - 1) / 2, cc = (k.cols - 1) / 2;
  for (int p = 0; p < k.rows; ++p)
    for (int q = 0; q < k.cols; ++q) {
      const int r = ((p - cr) % rows + rows) % rows;
      const int c = ((q - cc) % cols + cols) % cols;
      h(r, c) += k.values(p, q);
    }
  return h;
}

CirculantModel build_circulant(const GaussianKernel& k, int rows, int cols) {
  CirculantModel m;
  m.rows = rows;
  m.cols = cols;
  const Matrix h = wrap_kernel(k, rows, cols);
  std::vector<cd> f = to_complex(h.data());
  dft_2d(f, rows, cols, false);
  m.spectrum = std::move(f);
  std::vector<cd> g(m.spectrum.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = cd(std::norm(m.spectrum[i]), 0.0);
  dft_2d(g, rows, cols, true);
  m.normal_generator = Matrix(rows, cols);
  for (std::size_t i = 0; i < g.size(); ++i) m.normal_generator.data()[i] = g[i].real();
  return m;
}

}  // namespace

ConvolutionSpectrum convolution_spectrum(const GaussianKernel& kernel, int image_rows,
                                         int image_cols) {
  const CirculantModel m = build_circulant(kernel, image_rows, image_cols);
  ConvolutionSpectrum s;
  s.eigenvalues.resize(m.spectrum.size());
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t i = 0; i < m.spectrum.size(); ++i) {
    const double e = std::norm(m.spectrum[i]);
    s.eigenvalues[i] = e;
    lo = std::min(lo, e);
    hi = std::max(hi, e);
  }
  if (lo < 1e-15) throw SingularKernel();
  s.kappa = hi / lo;
  s.op_norm = hi;
  return s;
}

ProblemSpec deconvolution_problem(const Matrix& image, double sigma, int measurement_bits,
                                  int kernel_rows, int kernel_cols) {
  for (double v : image.data())
    if (!(v > -1.0 && v < 1.0)) throw OutOfRange("image values must lie in (-1, 1)");
  const GaussianKernel k = gaussian_kernel(sigma, kernel_rows, kernel_cols);
  const ConvolutionSpectrum spec = convolution_spectrum(k, image.rows(), image.cols());
  CirculantModel model = build_circulant(k, image.rows(), image.cols());

  ProblemSpec p;
  p.x_star = image.data();
  const Vector blurred = spectral_multiply(model, p.x_star, false);
  const FixedArray yq = quantize(blurred, measurement_bits, policy::MaxAbs{});
  p.y = dequantize(yq);
  p.circ = std::move(model);
  p.op_norm = spec.op_norm;
  p.kappa = spec.kappa;
  p.meta = {{"problem", "deconvolution"},
            {"sigma", std::to_string(sigma)},
            {"kernel_support", std::to_string(kernel_rows) + "x" + std::to_string(kernel_cols)},
            {"measurement_bits", std::to_string(measurement_bits)},
            {"image_shape", std::to_string(image.rows()) + "x" + std::to_string(image.cols())},
            {"kappa", std::to_string(spec.kappa)}};
  return p;
}

Matrix materialize_dense(const ProblemSpec& p, int max_unknowns) {
  if (p.a) return *p.a;
  if (!p.circ) throw ConfigInvalid("problem has no forward model");
  const CirculantModel& m = *p.circ;
  const int n = m.rows * m.cols;
  if (n > max_unknowns) throw ConfigInvalid("dense materialization limited to small images");
  std::vector<cd> f = m.spectrum;
  dft_2d(f, m.rows, m.cols, true);  // generator image of A itself
  Matrix h(m.rows, m.cols);
  for (std::size_t i = 0; i < f.size(); ++i) h.data()[i] = f[i].real();
  Matrix a(n, n);
  for (int pr = 0; pr < m.rows; ++pr)
    for (int pc = 0; pc < m.cols; ++pc)
      for (int qr = 0; qr < m.rows; ++qr)
        for (int qc = 0; qc < m.cols; ++qc) {
          const int dr = ((pr - qr) % m.rows + m.rows) % m.rows;
          const int dc = ((pc - qc) % m.cols + m.cols) % m.cols;
          a(pr * m.cols + pc, qr * m.cols + qc) = h(dr, dc);
        }
  return a;
}

// ---- tomography ---------------------------------------------------------------

namespace {

struct RaySegments {
  std::vector<std::pair<int, double>> weights;  // (pixel index, path length)
  double chord = 0.0;
};

// Siddon-style exact path lengths of a ray through the [0,nx]x[0,ny] unit grid.
RaySegments trace_ray(double ox, double oy, double dx, double dy, int nx, int ny) {
  RaySegments out;
  constexpr double kTiny = 1e-12;
  double smin = -std::numeric_limits<double>::infinity();
  double smax = std::numeric_limits<double>::infinity();
  // Clip to the grid slab by slab.
  if (std::fabs(dx) < kTiny) {
    if (ox < 0.0 || ox > nx) return out;
  } else {
    double s0 = (0.0 - ox) / dx, s1 = (nx - ox) / dx;
    if (s0 > s1) std::swap(s0, s1);
    smin = std::max(smin, s0);
    smax = std::min(smax, s1);
  }
  if (std::fabs(dy) < kTiny) {
    if (oy < 0.0 || oy > ny) return out;
  } else {
    double s0 = (0.0 - oy) / dy, s1 = (ny - oy) / dy;
    if (s0 > s1) std::swap(s0, s1);
    smin = std::max(smin, s0);
    smax = std::min(smax, s1);
  }
  if (!(smax - smin > kTiny)) return out;

  std::vector<double> cross{smin, smax};
  if (std::fabs(dx) >= kTiny)
    for (int i = 0; i <= nx; ++i) {
      const double s = (i - ox) / dx;
      if (s > smin + kTiny && s < smax - kTiny) cross.push_back(s);
    }
  if (std::fabs(dy) >= kTiny)
    for (int i = 0; i <= ny; ++i) {
      const double s = (i - oy) / dy;
      if (s > smin + kTiny && s < smax - kTiny) cross.push_back(s);
    }
  std::sort(cross.begin(), cross.end());

  for (std::size_t i = 0; i + 1 < cross.size(); ++i) {
    const double len = cross[i + 1] - cross[i];
    if (len <= kTiny) continue;
    const double sm = 0.5 * (cross[i] + cross[i + 1]);
    int px = static_cast<int>(std::floor(ox + sm * dx));
    int py = static_cast<int>(std::floor(oy + sm * dy));
    px = std::clamp(px, 0, nx - 1);
    py = std::clamp(py, 0, ny - 1);
    out.weights.emplace_back(py * nx + px, len);
    out.chord += len;
  }
  return out;
}

}  // namespace

ProblemSpec tomography_problem(const Matrix& image, int n_projections, int n_beams,
                               double angle_span) {
  if (n_projections < 1 || n_beams < 1)
    throw ConfigInvalid("tomography needs at least one projection and beam");
  for (double v : image.data())
    if (!(v > -1.0 && v < 1.0)) throw OutOfRange("image values must lie in (-1, 1)");
  const int ny = image.rows(), nx = image.cols();
  const double cx = nx / 2.0, cy = ny / 2.0;
  const double diag = std::sqrt(static_cast<double>(nx) * nx + static_cast<double>(ny) * ny);
  const double spacing = diag / n_beams;

  std::vector<std::vector<std::pair<int, double>>> rows;
  int dropped = 0;
  for (int i = 0; i < n_projections; ++i) {
    const double phi = angle_span * M_PI / 180.0 * i / n_projections;
    const double dx = std::cos(phi), dy = std::sin(phi);
    const double nxv = -dy, nyv = dx;  // beam offset direction
    for (int j = 0; j < n_beams; ++j) {
      const double t = (j - (n_beams - 1) / 2.0) * spacing;
      const RaySegments seg = trace_ray(cx + t * nxv, cy + t * nyv, dx, dy, nx, ny);
      if (seg.weights.empty()) {
        ++dropped;
        continue;
      }
      rows.push_back(seg.weights);
    }
  }
  if (rows.empty()) throw DegenerateGeometry("every beam missed the grid");

  Matrix a(static_cast<int>(rows.size()), nx * ny);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (const auto& [pix, w] : rows[r]) a(static_cast<int>(r), pix) += w;

  ProblemSpec p;
  p.a = std::move(a);
  p.x_star = image.data();
  p.y = matvec(*p.a, p.x_star);
  const EigenRange er = eigen_range(gram(*p.a));
  if (er.min <= 1e-12) throw SingularMatrix("tomography normal matrix is singular");
  p.op_norm = er.max;
  p.kappa = er.max / er.min;
  p.meta = {{"problem", "tomography"},
            {"projections", std::to_string(n_projections)},
            {"beams", std::to_string(n_beams)},
            {"angle_span_deg", std::to_string(angle_span)},
            {"dropped_rays", std::to_string(dropped)},
            {"kappa", std::to_string(p.kappa)},
            {"op_norm", std::to_string(p.op_norm)}};
  return p;
}

// ---- image I/O ----------------------------------------------------------------

namespace {

Matrix quantize_image(Matrix raw, int bits) {
  const FixedArray q = quantize(raw, bits, policy::Fixed{0});
  return dequantize_matrix(q);
}

int read_pgm_token(std::istream& is) {
  // Skips whitespace and '#' comment lines.
  for (;;) {
    int c = is.peek();
    if (c == '#') {
      std::string line;
      std::getline(is, line);
    } else if (std::isspace(c)) {
      is.get();
    } else {
      break;
    }
  }
  int v;
  if (!(is >> v)) throw UnsupportedFormat("bad PGM header");
  return v;
}

}  // namespace

Matrix load_image(const std::string& path, int bits) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UnsupportedFormat("cannot open image file '" + path + "'");
  char magic[2] = {0, 0};
  f.read(magic, 2);
  if (magic[0] == 'P' && magic[1] == '5') {
    const int cols = read_pgm_token(f);
    const int rows = read_pgm_token(f);
    const int maxval = read_pgm_token(f);
    if (maxval <= 0 || maxval > 255) throw UnsupportedFormat("PGM maxval must be in [1, 255]");
    f.get();  // single whitespace after the header
    std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols);
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) throw UnsupportedFormat("truncated PGM payload");
    Matrix img(rows, cols);
    for (std::size_t i = 0; i < buf.size(); ++i)
      img.data()[i] = static_cast<double>(buf[i]) / (maxval + 1);
    return quantize_image(std::move(img), bits);
  }
  // CSV grid of real values in (-1, 1).
  f.clear();
  f.seekg(0);
  std::vector<std::vector<double>> grid;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ',')) row.push_back(std::stod(tok));
    if (!grid.empty() && row.size() != grid.front().size())
      throw UnsupportedFormat("ragged CSV image");
    grid.push_back(std::move(row));
  }
  if (grid.empty()) throw UnsupportedFormat("empty image file");
  Matrix img(static_cast<int>(grid.size()), static_cast<int>(grid.front().size()));
  for (int r = 0; r < img.rows(); ++r)
    for (int c = 0; c < img.cols(); ++c) {
      const double v = grid[r][c];
      if (!(v > -1.0 && v < 1.0)) throw OutOfRange("CSV image values must lie in (-1, 1)");
      img(r, c) = v;
    }
  return quantize_image(std::move(img), bits);
}

void save_image_pgm(const std::string& path, const Matrix& image) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UnsupportedFormat("cannot write '" + path + "'");
  f << "P5\n" << image.cols() << ' ' << image.rows() << "\n255\n";
  for (double v : image.data()) {
    const long raw = std::lround(v * 256.0);
    f.put(static_cast<char>(std::clamp(raw, 0l, 255l)));
  }
}

void save_image_csv(const std::string& path, const Matrix& image) {
  std::ofstream f(path);
  if (!f) throw UnsupportedFormat("cannot write '" + path + "'");
  char buf[64];
  for (int r = 0; r < image.rows(); ++r) {
    for (int c = 0; c < image.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", image(r, c));
      f << (c ? "," : "") << buf;
    }
    f << '\n';
  }
}

}  // namespace fxsolve
