#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "v2tex/image.hpp"
#include "v2tex/parallel.hpp"

namespace v2tex {

inline constexpr double kNormEpsilon = 1e-5;
inline constexpr double kNormMomentum = 0.1;

/// Learned V2 filters plus output-normalization state.
///
/// theta is laid out [filter][input channel][row][col]; each filter row has
/// in_channels * kernel * kernel weights.
struct V2Params {
  int d = 60;
  int in_channels = 60;
  int kernel = 7;
  int pool_window = 4;
  std::vector<double> theta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = kNormMomentum;

  std::size_t row_length() const {
    return static_cast<std::size_t>(in_channels) * kernel * kernel;
  }
  std::size_t weight_count() const { return static_cast<std::size_t>(d) * row_length(); }

  /// Throws ValidationError when shapes and buffers disagree or values are
  /// non-finite / variances negative.
  void validate() const;

  friend bool operator==(const V2Params&, const V2Params&) = default;
};

/// Weights i.i.d. uniform on [-b, b], b = sqrt(1 / (in_channels * k * k));
/// running mean 0, running variance 1.
V2Params init_params(std::uint64_t seed, int d, int in_channels = 60, int kernel = 7,
                     int pool_window = 4);

enum class Mode { train, eval };

/// Output grid of the valid convolution followed by non-overlapping pooling.
struct V2Geometry {
  int conv_height;
  int conv_width;
  int pooled_height;
  int pooled_width;
};

V2Geometry v2_geometry(const V1Response& v1, const V2Params& params);

/// Valid convolution, half-wave rectification and L2 pooling (no output
/// normalization).
V2Response v2_prenorm(const V1Response& v1, const V2Params& params);

/// Per-channel mean and biased variance over every position of every map.
struct ChannelMoments {
  std::vector<double> mean;
  std::vector<double> var;
  std::size_t count = 0;  // positions contributing per channel
};

ChannelMoments channel_moments(std::span<const V2Response> maps);

/// (x - mean) / sqrt(var + kNormEpsilon), per channel, in place.
void apply_normalization(V2Response& maps, std::span<const double> mean,
                         std::span<const double> var);

/// Exponential moving update of the running statistics; the running
/// variance tracks the unbiased batch variance.
void update_running_stats(V2Params& params, const ChannelMoments& batch);

/// Full forward pass. Train mode normalizes with batch statistics and
/// updates the running statistics; eval mode uses the running statistics.
std::vector<V2Response> v2_forward(std::span<const V1Response> batch, V2Params& params, Mode mode,
                                   const ExecPolicy& exec = {});

/// Eval-mode forward pass on one image (no state change).
V2Response v2_forward_eval(const V1Response& v1, const V2Params& params);

/// ||Theta Theta^T - I||_F with Theta flattened to d rows.
double orth_penalty(const V2Params& params);

/// Gradient of orth_penalty with respect to theta: 2 (G Theta) / ||G||_F
/// with G = Theta Theta^T - I; zero where the penalty vanishes.
std::vector<double> orth_penalty_gradient(const V2Params& params);

}  // namespace v2tex
