#include "v2tex/v2_stage.hpp"

#include <cmath>
#include <string>

#include "v2tex/random.hpp"
#include "v2_kernels.hpp"
#include "v2tex/error.hpp"

namespace v2tex {

void V2Params::validate() const {
  if (d < 1 || in_channels < 1 || kernel < 1 || pool_window < 1) {
    throw ValidationError("V2 parameters: d, in_channels, kernel and pool_window must be >= 1");
  }
  if (theta.size() != weight_count()) throw ValidationError("V2 parameters: theta size mismatch");
  if (running_mean.size() != static_cast<std::size_t>(d) ||
      running_var.size() != static_cast<std::size_t>(d)) {
    throw ValidationError("V2 parameters: running statistics size mismatch");
  }
  for (double w : theta) {
    if (!std::isfinite(w)) throw ValidationError("V2 parameters: non-finite weight");
  }
  for (std::size_t i = 0; i < running_var.size(); ++i) {
    if (!std::isfinite(running_mean[i]) || !(running_var[i] >= 0.0)) {
      throw ValidationError("V2 parameters: invalid running statistics");
    }
  }
}

V2Params init_params(std::uint64_t seed, int d, int in_channels, int kernel, int pool_window) {
  if (d < 1) throw ValidationError("init_params: d must be >= 1");
  V2Params p;
  p.d = d;
  p.in_channels = in_channels;
  p.kernel = kernel;
  p.pool_window = pool_window;
  p.theta.resize(p.weight_count());
  const double bound = std::sqrt(1.0 / static_cast<double>(p.row_length()));
  detail::Rng rng(seed);
  for (double& w : p.theta) w = rng.uniform(-bound, bound);
  p.running_mean.assign(static_cast<std::size_t>(d), 0.0);
  p.running_var.assign(static_cast<std::size_t>(d), 1.0);
  p.validate();
  return p;
}

V2Geometry v2_geometry(const V1Response& v1, const V2Params& params) {
  if (v1.channels() != params.in_channels) {
    throw ValidationError("V2 input has " + std::to_string(v1.channels()) +
                          " channels, expected " + std::to_string(params.in_channels));
  }
  if (v1.height() < params.kernel || v1.width() < params.kernel) {
    throw ValidationError("V2 input " + std::to_string(v1.height()) + "x" +
                          std::to_string(v1.width()) + " smaller than kernel " +
                          std::to_string(params.kernel));
  }
  V2Geometry g{};
  g.conv_height = v1.height() - params.kernel + 1;
  g.conv_width = v1.width() - params.kernel + 1;
  g.pooled_height = g.conv_height / params.pool_window;
  g.pooled_width = g.conv_width / params.pool_window;
  if (g.pooled_height < 1 || g.pooled_width < 1) {
    throw ValidationError("V2 convolution output smaller than the pooling window");
  }
  return g;
}

namespace detail {

Eigen::MatrixXd& patch_scratch() {
  thread_local Eigen::MatrixXd scratch;
  return scratch;
}

Eigen::MatrixXd im2col_transposed(const V1Response& v1, int kernel, int conv_height,
                                  int conv_width) {
  Eigen::MatrixXd patches;
  im2col_transposed(v1, kernel, conv_height, conv_width, patches);
  return patches;
}

void im2col_transposed(const V1Response& v1, int kernel, int conv_height, int conv_width,
                       Eigen::MatrixXd& patches) {
  const Eigen::Index positions = static_cast<Eigen::Index>(conv_height) * conv_width;
  patches.resize(positions, static_cast<Eigen::Index>(v1.channels()) * kernel * kernel);
  Eigen::Index col = 0;
  for (int c = 0; c < v1.channels(); ++c) {
    const auto plane = v1.channel(c);
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx, ++col) {
        double* dst = patches.col(col).data();
        for (int oy = 0; oy < conv_height; ++oy) {
          const double* src = plane.data() + static_cast<std::size_t>(oy + ky) * v1.width() + kx;
          std::copy(src, src + conv_width, dst + static_cast<std::size_t>(oy) * conv_width);
        }
      }
    }
  }
}

ConvActivations conv_relu_pool(const V1Response& v1, const V2Params& params) {
  const V2Geometry g = v2_geometry(v1, params);
  Eigen::MatrixXd& patches = patch_scratch();
  im2col_transposed(v1, params.kernel, g.conv_height, g.conv_width, patches);
  ConvActivations act;
  act.rectified.noalias() = theta_map(params) * patches.transpose();
  act.rectified = act.rectified.cwiseMax(0.0);

  const int w = params.pool_window;
  act.pooled = V2Response(params.d, g.pooled_height, g.pooled_width);
  for (int d = 0; d < params.d; ++d) {
    for (int py = 0; py < g.pooled_height; ++py) {
      for (int px = 0; px < g.pooled_width; ++px) {
        double sum = 0.0;
        for (int dy = 0; dy < w; ++dy) {
          const Eigen::Index row = static_cast<Eigen::Index>(py * w + dy) * g.conv_width + px * w;
          for (int dx = 0; dx < w; ++dx) {
            const double y = act.rectified(d, row + dx);
            sum += y * y;
          }
        }
        act.pooled(d, py, px) = std::sqrt(sum);
      }
    }
  }
  return act;
}

}  // namespace detail

V2Response v2_prenorm(const V1Response& v1, const V2Params& params) {
  return detail::conv_relu_pool(v1, params).pooled;
}

ChannelMoments channel_moments(std::span<const V2Response> maps) {
  if (maps.empty()) throw ValidationError("channel_moments: empty batch");
  const int channels = maps.front().channels();
  ChannelMoments m;
  m.mean.assign(static_cast<std::size_t>(channels), 0.0);
  m.var.assign(static_cast<std::size_t>(channels), 0.0);
  for (const auto& r : maps) {
    if (r.channels() != channels) throw ValidationError("channel_moments: channel count mismatch");
    m.count += r.plane_size();
  }
  const double inv = 1.0 / static_cast<double>(m.count);
  for (int c = 0; c < channels; ++c) {
    double sum = 0.0;
    for (const auto& r : maps)
      for (double v : r.channel(c)) sum += v;
    const double mean = sum * inv;
    double sq = 0.0;
    for (const auto& r : maps)
      for (double v : r.channel(c)) sq += (v - mean) * (v - mean);
    m.mean[static_cast<std::size_t>(c)] = mean;
    m.var[static_cast<std::size_t>(c)] = sq * inv;
  }
  return m;
}

void apply_normalization(V2Response& maps, std::span<const double> mean,
                         std::span<const double> var) {
  for (int c = 0; c < maps.channels(); ++c) {
    const auto i = static_cast<std::size_t>(c);
    const double inv = 1.0 / std::sqrt(var[i] + kNormEpsilon);
    for (double& v : maps.channel(c)) v = (v - mean[i]) * inv;
  }
}

void update_running_stats(V2Params& params, const ChannelMoments& batch) {
  const double m = params.momentum;
  const double unbias = batch.count > 1 ? static_cast<double>(batch.count) / (batch.count - 1) : 1.0;
  for (std::size_t i = 0; i < params.running_mean.size(); ++i) {
    params.running_mean[i] = (1.0 - m) * params.running_mean[i] + m * batch.mean[i];
    params.running_var[i] = (1.0 - m) * params.running_var[i] + m * batch.var[i] * unbias;
  }
}

std::vector<V2Response> v2_forward(std::span<const V1Response> batch, V2Params& params, Mode mode,
                                   const ExecPolicy& exec) {
  if (batch.empty()) throw ValidationError("v2_forward: empty batch");
  std::vector<V2Response> out(batch.size());
  parallel_for(batch.size(), exec.threads,
               [&](std::size_t i) { out[i] = v2_prenorm(batch[i], params); });
  if (mode == Mode::train) {
    const ChannelMoments moments = channel_moments(out);
    for (auto& r : out) apply_normalization(r, moments.mean, moments.var);
    update_running_stats(params, moments);
  } else {
    for (auto& r : out) apply_normalization(r, params.running_mean, params.running_var);
  }
  return out;
}

V2Response v2_forward_eval(const V1Response& v1, const V2Params& params) {
  V2Response r = v2_prenorm(v1, params);
  apply_normalization(r, params.running_mean, params.running_var);
  return r;
}

double orth_penalty(const V2Params& params) {
  const auto theta = detail::theta_map(params);
  Eigen::MatrixXd gram = theta * theta.transpose();
  gram -= Eigen::MatrixXd::Identity(params.d, params.d);
  return gram.norm();
}

std::vector<double> orth_penalty_gradient(const V2Params& params) {
  const auto theta = detail::theta_map(params);
  Eigen::MatrixXd gram = theta * theta.transpose();
  gram -= Eigen::MatrixXd::Identity(params.d, params.d);
  const double norm = gram.norm();
  std::vector<double> grad(params.weight_count(), 0.0);
  if (norm == 0.0) return grad;
  Eigen::Map<detail::RowMatrix> g(grad.data(), params.d,
                                  static_cast<Eigen::Index>(params.row_length()));
  g.noalias() = (2.0 / norm) * gram * theta;
  return grad;
}

}  // namespace v2tex
