#pragma once

#include <complex>
#include <span>
#include <vector>

#include "v2tex/image.hpp"

namespace v2tex {

struct SteerableConfig {
  int num_scales = 5;
  int num_orientations = 4;
  int common_grid_factor = 4;  // output grid is input / factor

  void validate() const;

  int bands() const { return num_scales * num_orientations; }
  int channel_count() const { return 3 * bands(); }

  // Channel layout: even block, odd block, complex block; each block is
  // scale-major, orientation-minor. Scale 0 is the finest.
  int even_channel(int scale, int orientation) const {
    return scale * num_orientations + orientation;
  }
  int odd_channel(int scale, int orientation) const {
    return bands() + even_channel(scale, orientation);
  }
  int complex_channel(int scale, int orientation) const {
    return 2 * bands() + even_channel(scale, orientation);
  }
};

/// Polar-separable quadrature filters on a fixed FFT grid.
///
/// Band (s, o) has peak radial frequency pi/2 / 2^s and orientation
/// theta_o = o*pi/O. The radial profile is cos(pi/2 * log2(r / r_s)) on
/// |log2(r / r_s)| < 1 (squared profiles of neighbouring scales sum to one,
/// so the power bandwidth is one octave). The even filter has frequency
/// response B(r)|cos(phi - theta)|^(O-1) and the odd filter
/// -i B(r) cos^(O-1)(phi - theta): equal magnitudes, 90 degree phase offset.
class FilterBank {
 public:
  FilterBank(const SteerableConfig& config, int height, int width);

  const SteerableConfig& config() const { return config_; }
  int height() const { return height_; }
  int width() const { return width_; }
  int filter_count() const { return 2 * config_.bands(); }

  /// Frequency response of even + i*odd (the analytic filter), row-major
  /// over FFT bins.
  std::span<const double> analytic(int scale, int orientation) const;

  std::vector<std::complex<double>> even_response(int scale, int orientation) const;
  std::vector<std::complex<double>> odd_response(int scale, int orientation) const;

  static double radial_profile(double radius, int scale);
  static double peak_frequency(int scale);
  double orientation_angle(int orientation) const;

 private:
  double angular(double phi, int orientation) const;  // cos^(O-1)(phi - theta)
  double radius_at(int ky, int kx) const;
  double angle_at(int ky, int kx) const;

  SteerableConfig config_;
  int height_;
  int width_;
  std::vector<std::vector<double>> analytic_;  // one per band
};

/// Unrectified full-resolution band responses.
struct BandResponses {
  int height = 0;
  int width = 0;
  std::vector<std::vector<double>> even;  // indexed by scale * O + orientation
  std::vector<std::vector<double>> odd;

  std::vector<double> complex_magnitude(int band) const;
};

BandResponses v1_bands(const Image& image, const FilterBank& bank);

/// Simple cells max(0, even), max(0, odd) and complex cells
/// sqrt(even^2 + odd^2), bilinearly resampled to the common grid.
V1Response v1_forward(const Image& image, const FilterBank& bank);
V1Response v1_forward(const Image& image, const SteerableConfig& config);

/// Bilinear downsampling of a full-resolution plane by an integer factor,
/// pixel-centre aligned (sample i sits at input coordinate (i+0.5)f - 0.5).
std::vector<double> downsample_bilinear(std::span<const double> plane, int height, int width,
                                        int factor);

}  // namespace v2tex
