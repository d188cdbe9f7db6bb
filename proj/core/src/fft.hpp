#pragma once

#include <complex>
#include <span>

namespace v2tex::detail {

using Complex = std::complex<double>;

// Unnormalized 2-D DFT over a row-major height x width complex field, in
// place. The inverse transform is also unnormalized (caller divides by h*w).
void fft2d(std::span<Complex> field, int height, int width, bool inverse);

}  // namespace v2tex::detail
