#include "dft.hpp"

#include <cmath>

namespace fxsolve::detail {

namespace {

using cd = std::complex<double>;

std::vector<cd> twiddles(int n, bool inverse) {
  std::vector<cd> w(n);
  const double sign = inverse ? 1.0 : -1.0;
  for (int k = 0; k < n; ++k) {
    const double ang = sign * 2.0 * M_PI * k / n;
    w[k] = cd(std::cos(ang), std::sin(ang));
  }
  return w;
}

void dft_1d(const cd* in, cd* out, int n, int stride, const std::vector<cd>& w) {
  for (int k = 0; k < n; ++k) {
    cd acc(0.0, 0.0);
    for (int j = 0; j < n; ++j) acc += in[j * stride] * w[(static_cast<long long>(j) * k) % n];
    out[k] = acc;
  }
}

}  // namespace

void dft_2d(std::vector<cd>& data, int rows, int cols, bool inverse) {
  const std::vector<cd> wr = twiddles(cols, inverse);
  std::vector<cd> line(std::max(rows, cols));
  for (int r = 0; r < rows; ++r) {
    dft_1d(&data[static_cast<std::size_t>(r) * cols], line.data(), cols, 1, wr);
    for (int c = 0; c < cols; ++c) data[static_cast<std::size_t>(r) * cols + c] = line[c];
  }
  const std::vector<cd> wc = twiddles(rows, inverse);
  for (int c = 0; c < cols; ++c) {
    dft_1d(&data[c], line.data(), rows, cols, wc);
    for (int r = 0; r < rows; ++r) data[static_cast<std::size_t>(r) * cols + c] = line[r];
  }
  if (inverse) {
    const double scale = 1.0 / (static_cast<double>(rows) * cols);
    for (cd& v : data) v *= scale;
  }
}

}  // namespace fxsolve::detail
