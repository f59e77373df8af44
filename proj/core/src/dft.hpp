#ifndef FXSOLVE_DETAIL_DFT_HPP
#define FXSOLVE_DETAIL_DFT_HPP

#include <complex>
#include <vector>

namespace fxsolve::detail {

// Direct O(n^2) discrete Fourier transform per axis; row-major 2-D data.
// Forward is unnormalized, inverse carries the full 1/(rows*cols) factor.
// Desk-scale images only; deterministic.
void dft_2d(std::vector<std::complex<double>>& data, int rows, int cols, bool inverse);

}  // namespace fxsolve::detail

#endif
