#include "v2tex/v1_frontend.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fft.hpp"
#include "v2tex/error.hpp"

namespace v2tex {

namespace {

constexpr double kPi = std::numbers::pi;

double signed_frequency(int k, int n) {
  const int folded = k <= n / 2 ? k : k - n;
  return 2.0 * kPi * folded / n;
}

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace

void SteerableConfig::validate() const {
  if (num_scales < 1) throw ValidationError("num_scales must be >= 1");
  if (num_orientations < 2) throw ValidationError("num_orientations must be >= 2");
  if (!is_power_of_two(common_grid_factor)) {
    throw ValidationError("common_grid_factor must be a power of two");
  }
}

double FilterBank::peak_frequency(int scale) { return 0.5 * kPi / std::ldexp(1.0, scale); }

double FilterBank::radial_profile(double radius, int scale) {
  if (radius <= 0.0) return 0.0;
  const double octaves = std::log2(radius / peak_frequency(scale));
  if (std::abs(octaves) >= 1.0) return 0.0;
  return std::cos(0.5 * kPi * octaves);
}

double FilterBank::orientation_angle(int orientation) const {
  return kPi * orientation / config_.num_orientations;
}

double FilterBank::angular(double phi, int orientation) const {
  return std::pow(std::cos(phi - orientation_angle(orientation)), config_.num_orientations - 1);
}

double FilterBank::radius_at(int ky, int kx) const {
  return std::hypot(signed_frequency(ky, height_), signed_frequency(kx, width_));
}

double FilterBank::angle_at(int ky, int kx) const {
  return std::atan2(signed_frequency(ky, height_), signed_frequency(kx, width_));
}

FilterBank::FilterBank(const SteerableConfig& config, int height, int width)
    : config_(config), height_(height), width_(width) {
  config_.validate();
  const int min_size = 1 << config_.num_scales;
  if (height < min_size || width < min_size) {
    throw ValidationError("image " + std::to_string(height) + "x" + std::to_string(width) +
                          " too small for " + std::to_string(config_.num_scales) +
                          " scales (need >= " + std::to_string(min_size) + ")");
  }
  const std::size_t bins = static_cast<std::size_t>(height) * width;
  analytic_.resize(static_cast<std::size_t>(config_.bands()));
  for (int s = 0; s < config_.num_scales; ++s) {
    for (int o = 0; o < config_.num_orientations; ++o) {
      auto& gain = analytic_[static_cast<std::size_t>(config_.even_channel(s, o))];
      gain.assign(bins, 0.0);
      for (int ky = 0; ky < height; ++ky) {
        for (int kx = 0; kx < width; ++kx) {
          const double radial = radial_profile(radius_at(ky, kx), s);
          if (radial == 0.0) continue;
          const double a = angular(angle_at(ky, kx), o);
          // even + i*odd = B|a| + B|a|sign(a) = 2B|a| on the positive lobe.
          if (a > 0.0) gain[static_cast<std::size_t>(ky) * width + kx] = 2.0 * radial * a;
        }
      }
    }
  }
}

std::span<const double> FilterBank::analytic(int scale, int orientation) const {
  return analytic_.at(static_cast<std::size_t>(config_.even_channel(scale, orientation)));
}

std::vector<std::complex<double>> FilterBank::even_response(int scale, int orientation) const {
  std::vector<std::complex<double>> out(static_cast<std::size_t>(height_) * width_);
  for (int ky = 0; ky < height_; ++ky) {
    for (int kx = 0; kx < width_; ++kx) {
      const double v =
          radial_profile(radius_at(ky, kx), scale) * std::abs(angular(angle_at(ky, kx), orientation));
      out[static_cast<std::size_t>(ky) * width_ + kx] = {v, 0.0};
    }
  }
  return out;
}

std::vector<std::complex<double>> FilterBank::odd_response(int scale, int orientation) const {
  std::vector<std::complex<double>> out(static_cast<std::size_t>(height_) * width_);
  for (int ky = 0; ky < height_; ++ky) {
    for (int kx = 0; kx < width_; ++kx) {
      const double a = angular(angle_at(ky, kx), orientation);
      const double sign = a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0);
      const double v = radial_profile(radius_at(ky, kx), scale) * std::abs(a) * sign;
      out[static_cast<std::size_t>(ky) * width_ + kx] = {0.0, -v};
    }
  }
  return out;
}

std::vector<double> BandResponses::complex_magnitude(int band) const {
  const auto& e = even.at(static_cast<std::size_t>(band));
  const auto& o = odd.at(static_cast<std::size_t>(band));
  std::vector<double> out(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) out[i] = std::sqrt(e[i] * e[i] + o[i] * o[i]);
  return out;
}

BandResponses v1_bands(const Image& image, const FilterBank& bank) {
  if (image.height() != bank.height() || image.width() != bank.width()) {
    throw ValidationError("image size does not match filter bank grid");
  }
  const int h = image.height();
  const int w = image.width();
  const std::size_t n = image.size();

  std::vector<detail::Complex> spectrum(n);
  auto px = image.pixels();
  for (std::size_t i = 0; i < n; ++i) spectrum[i] = {px[i], 0.0};
  detail::fft2d(spectrum, h, w, false);

  const auto& cfg = bank.config();
  BandResponses out;
  out.height = h;
  out.width = w;
  out.even.resize(static_cast<std::size_t>(cfg.bands()));
  out.odd.resize(static_cast<std::size_t>(cfg.bands()));

  std::vector<detail::Complex> work(n);
  const double norm = 1.0 / static_cast<double>(n);
  for (int s = 0; s < cfg.num_scales; ++s) {
    for (int o = 0; o < cfg.num_orientations; ++o) {
      const auto gain = bank.analytic(s, o);
      for (std::size_t i = 0; i < n; ++i) work[i] = spectrum[i] * gain[i];
      detail::fft2d(work, h, w, true);
      const auto band = static_cast<std::size_t>(cfg.even_channel(s, o));
      auto& e = out.even[band];
      auto& od = out.odd[band];
      e.resize(n);
      od.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        e[i] = work[i].real() * norm;
        od[i] = work[i].imag() * norm;
      }
    }
  }
  return out;
}

std::vector<double> downsample_bilinear(std::span<const double> plane, int height, int width,
                                        int factor) {
  const int oh = height / factor;
  const int ow = width / factor;
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  auto at = [&](int y, int x) { return plane[static_cast<std::size_t>(y) * width + x]; };
  for (int r = 0; r < oh; ++r) {
    const double y = std::clamp((r + 0.5) * factor - 0.5, 0.0, height - 1.0);
    const int y0 = static_cast<int>(y);
    const int y1 = std::min(y0 + 1, height - 1);
    const double fy = y - y0;
    for (int c = 0; c < ow; ++c) {
      const double x = std::clamp((c + 0.5) * factor - 0.5, 0.0, width - 1.0);
      const int x0 = static_cast<int>(x);
      const int x1 = std::min(x0 + 1, width - 1);
      const double fx = x - x0;
      out[static_cast<std::size_t>(r) * ow + c] =
          (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) +
          fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
    }
  }
  return out;
}

V1Response v1_forward(const Image& image, const FilterBank& bank) {
  const auto& cfg = bank.config();
  const int f = cfg.common_grid_factor;
  if (image.height() % f != 0 || image.width() % f != 0) {
    throw ValidationError("image dimensions " + std::to_string(image.height()) + "x" +
                          std::to_string(image.width()) + " not divisible by grid factor " +
                          std::to_string(f));
  }
  const BandResponses bands = v1_bands(image, bank);
  const int h = image.height();
  const int w = image.width();
  V1Response out(cfg.channel_count(), h / f, w / f);

  std::vector<double> plane(image.size());
  auto emit = [&](int channel) {
    auto small = downsample_bilinear(plane, h, w, f);
    std::copy(small.begin(), small.end(), out.channel(channel).begin());
  };
  for (int s = 0; s < cfg.num_scales; ++s) {
    for (int o = 0; o < cfg.num_orientations; ++o) {
      const auto band = static_cast<std::size_t>(cfg.even_channel(s, o));
      const auto& e = bands.even[band];
      const auto& od = bands.odd[band];
      for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = std::max(0.0, e[i]);
      emit(cfg.even_channel(s, o));
      for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = std::max(0.0, od[i]);
      emit(cfg.odd_channel(s, o));
      for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = std::sqrt(e[i] * e[i] + od[i] * od[i]);
      emit(cfg.complex_channel(s, o));
    }
  }
  return out;
}

V1Response v1_forward(const Image& image, const SteerableConfig& config) {
  return v1_forward(image, FilterBank(config, image.height(), image.width()));
}

}  // namespace v2tex
