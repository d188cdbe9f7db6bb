#pragma once

#include <span>
#include <vector>

#include "v2tex/image.hpp"
#include "v2tex/parallel.hpp"
#include "v2tex/v2_stage.hpp"

namespace v2tex {

/// Positional mean and (population) variance of one image's responses.
struct ImageStats {
  std::vector<double> mu;
  std::vector<double> c;
};

/// Moments of the equal-weight Gaussian mixture over a set of images.
struct GlobalStats {
  std::vector<double> mu_g;
  std::vector<double> c_g;
};

struct LossConfig {
  double lambda = 1.0;
  double epsilon = 1e-8;
  // When false the variance term contributes neither value nor gradient
  // (penalty-only runs).
  bool include_variance = true;

  void validate() const;
};

ImageStats image_stats(const V2Response& response);

/// mu_g = mean of mu_n; c_g = mean of (c_n + (mu_n - mu_g)^2).
GlobalStats global_stats(std::span<const ImageStats> stats);

/// ||sqrt(c_g + eps) - sqrt(c_n + eps)|| / ||sqrt(c_g + eps)||. Throws
/// ValidationError when the denominator is zero.
double distance(const GlobalStats& global, const ImageStats& image, double epsilon);

/// sum d e^{-d} / sum e^{-d}.
double softmin(std::span<const double> distances);

struct LossBreakdown {
  double j = 0.0;      // l_var - lambda * l_orth (maximized)
  double l_var = 0.0;  // softmin of d
  double l_orth = 0.0;
  std::vector<double> d;
  ChannelMoments batch_moments;  // output-normalization statistics used
};

/// Evaluates the objective on a batch with train-mode output normalization.
/// Does not touch the running statistics in `params`.
LossBreakdown total_loss(const V2Params& params, std::span<const V1Response> batch,
                         const LossConfig& config, const ExecPolicy& exec = {});

struct LossGradient {
  LossBreakdown loss;
  std::vector<double> grad;  // dJ/dtheta, theta's layout
};

/// Analytic reverse-mode gradient of J through conv, rectification, L2
/// pooling, batch normalization, statistics, distance and softmin.
LossGradient loss_gradient(const V2Params& params, std::span<const V1Response> batch,
                           const LossConfig& config, const ExecPolicy& exec = {});

}  // namespace v2tex
