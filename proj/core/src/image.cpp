#include "v2tex/image.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "v2tex/error.hpp"

namespace v2tex {

namespace {

void check_dims(int height, int width) {
  if (height < 1 || width < 1) {
    throw ValidationError("image dimensions must be positive, got " + std::to_string(height) +
                          "x" + std::to_string(width));
  }
}

}  // namespace

Image::Image(int height, int width, double fill) : height_(height), width_(width) {
  check_dims(height, width);
  pixels_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
}

Image::Image(int height, int width, std::vector<double> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
  check_dims(height, width);
  if (pixels_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw ValidationError("pixel count does not match image dimensions");
  }
}

double Image::mean() const {
  if (pixels_.empty()) return 0.0;
  return std::accumulate(pixels_.begin(), pixels_.end(), 0.0) /
         static_cast<double>(pixels_.size());
}

bool Image::all_finite() const {
  for (double v : pixels_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

FeatureMaps::FeatureMaps(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
  if (channels < 1 || height < 1 || width < 1) {
    throw ValidationError("feature map dimensions must be positive");
  }
  data_.assign(static_cast<std::size_t>(channels) * plane_size(), fill);
}

}  // namespace v2tex
