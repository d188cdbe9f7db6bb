#pragma once

// Reference implementations written independently of the library code paths
// (no FFTW, no im2col, no shared helpers) for use as test oracles.

#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include "v2tex/image.hpp"
#include "v2tex/objective.hpp"
#include "v2tex/v2_stage.hpp"

namespace oracle {

using Complex = std::complex<double>;

/// Separable textbook DFT, X(ky,kx) = sum x(r,c) e^{-2 pi i (ky r / H + kx c / W)}.
std::vector<Complex> dft2(const v2tex::Image& image);

/// Inverse of dft2 (includes the 1/(H W) factor).
std::vector<Complex> idft2(const std::vector<Complex>& spectrum, int height, int width);

/// Rotation by k quarter turns counterclockwise, written as a scatter.
v2tex::Image rotate_ccw(const v2tex::Image& image, int k);

/// Direct-loop valid convolution, rectification and L2 pooling.
v2tex::V2Response v2_prenorm(const v2tex::V1Response& v1, const v2tex::V2Params& params);

/// Orthogonality penalty by explicit Gram-matrix loops.
double orth_penalty(const v2tex::V2Params& params);

struct Loss {
  double j = 0.0;
  double l_var = 0.0;
  double l_orth = 0.0;
  std::vector<double> d;
};

/// Full objective with train-mode batch normalization, recomputed from
/// scratch with two-pass loops.
Loss loss(const v2tex::V2Params& params, const std::vector<v2tex::V1Response>& batch,
          double lambda, double epsilon, bool include_variance = true);

/// Central finite-difference derivative of oracle::loss().j along every
/// weight.
std::vector<double> numeric_gradient(const v2tex::V2Params& params,
                                     const std::vector<v2tex::V1Response>& batch, double lambda,
                                     double epsilon, double step);

/// Pearson correlation by the textbook formula.
double pearson(const std::vector<double>& a, const std::vector<double>& b);

/// Spearman correlation with tie-averaged ranks computed by counting.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

/// Random feature maps with values uniform on [lo, hi).
v2tex::FeatureMaps random_maps(int channels, int height, int width, std::mt19937_64& rng,
                               double lo = 0.0, double hi = 1.0);

v2tex::Image random_image(int height, int width, std::mt19937_64& rng);

/// Random symmetric positive definite matrix A A^T / dim + floor I.
std::vector<std::vector<double>> random_spd(int dim, std::mt19937_64& rng, double floor);

/// Multivariate normal draws with the given mean and covariance.
class Gaussian {
 public:
  Gaussian(std::vector<double> mean, const std::vector<std::vector<double>>& cov);
  std::vector<double> sample(std::mt19937_64& rng) const;
  double log_density(const std::vector<double>& x) const;  // up to the shared 2 pi term
  int dim() const { return static_cast<int>(mean_.size()); }

 private:
  std::vector<double> mean_;
  std::vector<std::vector<double>> chol_;  // lower triangular
  double log_det_ = 0.0;
};

}  // namespace oracle
