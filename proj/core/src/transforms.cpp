#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "fft.hpp"
#include "v2tex/dataset_io.hpp"
#include "v2tex/error.hpp"

namespace v2tex {

using detail::Complex;

Image rotate_quarter(const Image& image, int k) {
  k = ((k % 4) + 4) % 4;
  if (k == 0) return image;
  const int h = image.height();
  const int w = image.width();
  if (k == 2) {
    Image out(h, w);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) out(r, c) = image(h - 1 - r, w - 1 - c);
    return out;
  }
  Image out(w, h);
  for (int r = 0; r < w; ++r) {
    for (int c = 0; c < h; ++c) {
      out(r, c) = k == 1 ? image(c, w - 1 - r) : image(h - 1 - c, r);
    }
  }
  return out;
}

namespace detail {

std::vector<Complex> phase_scrambled_field(const Image& image, std::uint64_t seed) {
  const int h = image.height();
  const int w = image.width();
  std::vector<Complex> spectrum(image.size());
  auto pixels = image.pixels();
  std::transform(pixels.begin(), pixels.end(), spectrum.begin(),
                 [](double v) { return Complex(v, 0.0); });
  fft2d(spectrum, h, w, /*inverse=*/false);

  // 53-bit uniform draws so the phase sequence does not depend on the
  // standard library's distribution implementation.
  std::mt19937_64 rng(seed);
  auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

  for (int ky = 0; ky < h; ++ky) {
    for (int kx = 0; kx < w; ++kx) {
      const int my = (h - ky) % h;
      const int mx = (w - kx) % w;
      const std::size_t self = static_cast<std::size_t>(ky) * w + kx;
      const std::size_t mirror = static_cast<std::size_t>(my) * w + mx;
      if (self == 0) continue;  // DC keeps its value exactly
      if (self == mirror) {
        // Self-conjugate (Nyquist) bins must stay real: phase 0 or pi.
        const double magnitude = std::abs(spectrum[self]);
        spectrum[self] = Complex(uniform() < 0.5 ? magnitude : -magnitude, 0.0);
        continue;
      }
      if (mirror < self) continue;  // already set from its partner
      const double magnitude = std::abs(spectrum[self]);
      const double phase = 2.0 * std::numbers::pi * uniform() - std::numbers::pi;
      spectrum[self] = std::polar(magnitude, phase);
      spectrum[mirror] = std::conj(spectrum[self]);
    }
  }

  fft2d(spectrum, h, w, /*inverse=*/true);
  const double norm = 1.0 / static_cast<double>(image.size());
  for (auto& v : spectrum) v *= norm;
  return spectrum;
}

}  // namespace detail

Image phase_scramble(const Image& image, std::uint64_t seed) {
  if (image.empty()) throw ValidationError("phase_scramble: empty image");
  auto field = detail::phase_scrambled_field(image, seed);
  std::vector<double> out(field.size());
  std::transform(field.begin(), field.end(), out.begin(), [](Complex v) { return v.real(); });
  return Image(image.height(), image.width(), std::move(out));
}

double raised_cosine_window(double radius_px, double diameter_px) {
  const double outer = 0.5 * diameter_px;
  const double flat = (1.0 - kApertureTransitionFraction) * outer;
  if (radius_px <= flat) return 1.0;
  if (radius_px >= outer) return 0.0;
  const double t = (radius_px - flat) / (outer - flat);
  return 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

Image raised_cosine_aperture(const Image& image, double diameter_fraction) {
  if (!(diameter_fraction > 0.0 && diameter_fraction <= 1.0)) {
    throw ValidationError("aperture diameter fraction must lie in (0,1]");
  }
  const double diameter = diameter_fraction * std::min(image.height(), image.width());
  const double cy = 0.5 * (image.height() - 1);
  const double cx = 0.5 * (image.width() - 1);
  Image out = image;
  for (int r = 0; r < image.height(); ++r) {
    for (int c = 0; c < image.width(); ++c) {
      out(r, c) *= raised_cosine_window(std::hypot(r - cy, c - cx), diameter);
    }
  }
  return out;
}

Image resize_bilinear(const Image& image, int height, int width) {
  if (height < 1 || width < 1) throw ValidationError("resize target must be positive");
  if (height == image.height() && width == image.width()) return image;
  const double sy = static_cast<double>(image.height()) / height;
  const double sx = static_cast<double>(image.width()) / width;
  Image out(height, width);
  for (int r = 0; r < height; ++r) {
    const double y = std::clamp((r + 0.5) * sy - 0.5, 0.0, image.height() - 1.0);
    const int y0 = static_cast<int>(y);
    const int y1 = std::min(y0 + 1, image.height() - 1);
    const double fy = y - y0;
    for (int c = 0; c < width; ++c) {
      const double x = std::clamp((c + 0.5) * sx - 0.5, 0.0, image.width() - 1.0);
      const int x0 = static_cast<int>(x);
      const int x1 = std::min(x0 + 1, image.width() - 1);
      const double fx = x - x0;
      out(r, c) = (1 - fy) * ((1 - fx) * image(y0, x0) + fx * image(y0, x1)) +
                  fy * ((1 - fx) * image(y1, x0) + fx * image(y1, x1));
    }
  }
  return out;
}

Image center_crop(const Image& image, int height, int width) {
  if (height < 1 || width < 1 || height > image.height() || width > image.width()) {
    throw ValidationError("center_crop: crop must fit inside the image");
  }
  const int top = (image.height() - height) / 2;
  const int left = (image.width() - width) / 2;
  Image out(height, width);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) out(r, c) = image(top + r, left + c);
  return out;
}

Image fit_square(const Image& image, int size) {
  const int side = std::min(image.height(), image.width());
  return resize_bilinear(center_crop(image, side, side), size, size);
}

}  // namespace v2tex
