#include "v2tex/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "v2_kernels.hpp"
#include "v2tex/error.hpp"

namespace v2tex {

namespace {

// Floor on the pooled norm in the quotient y / ||y||.
constexpr double kPoolNormFloor = 1e-12;

// Softmin weights e^{-d_n} / sum, shifted by min(d) for stability.
std::vector<double> softmin_weights(std::span<const double> d) {
  const double lo = *std::min_element(d.begin(), d.end());
  std::vector<double> w(d.size());
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) total += (w[i] = std::exp(-(d[i] - lo)));
  for (double& v : w) v /= total;
  return w;
}

struct BatchForward {
  std::vector<detail::ConvActivations> acts;  // pre-normalization
  std::vector<V2Response> normalized;
  std::vector<ImageStats> stats;
  GlobalStats global;
  ChannelMoments moments;
  LossBreakdown loss;
};

BatchForward forward_batch(const V2Params& params, std::span<const V1Response> batch,
                           const LossConfig& config, const ExecPolicy& exec, bool keep_rectified) {
  config.validate();
  if (batch.size() < 2) throw ValidationError("objective needs a batch of at least 2 images");
  params.validate();

  BatchForward f;
  f.acts.resize(batch.size());
  parallel_for(batch.size(), exec.threads, [&](std::size_t n) {
    f.acts[n] = detail::conv_relu_pool(batch[n], params);
    if (!keep_rectified) f.acts[n].rectified.resize(0, 0);
  });

  f.normalized.reserve(batch.size());
  for (const auto& a : f.acts) f.normalized.push_back(a.pooled);
  f.moments = channel_moments(f.normalized);
  for (auto& r : f.normalized) apply_normalization(r, f.moments.mean, f.moments.var);

  f.stats.reserve(batch.size());
  for (const auto& r : f.normalized) f.stats.push_back(image_stats(r));
  f.global = global_stats(f.stats);

  LossBreakdown& loss = f.loss;
  loss.d.reserve(batch.size());
  for (const auto& s : f.stats) loss.d.push_back(distance(f.global, s, config.epsilon));
  loss.l_var = config.include_variance ? softmin(loss.d) : 0.0;
  loss.l_orth = orth_penalty(params);
  loss.j = loss.l_var - config.lambda * loss.l_orth;
  loss.batch_moments = f.moments;
  return f;
}

}  // namespace

void LossConfig::validate() const {
  if (!(lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be > 0");
}

ImageStats image_stats(const V2Response& response) {
  const std::size_t positions = response.plane_size();
  if (positions < 2) throw ValidationError("image_stats needs at least 2 spatial positions");
  ImageStats s;
  s.mu.resize(static_cast<std::size_t>(response.channels()));
  s.c.resize(static_cast<std::size_t>(response.channels()));
  const double inv = 1.0 / static_cast<double>(positions);
  for (int ch = 0; ch < response.channels(); ++ch) {
    const auto plane = response.channel(ch);
    const double mean = std::accumulate(plane.begin(), plane.end(), 0.0) * inv;
    double var = 0.0;
    for (double v : plane) var += (v - mean) * (v - mean);
    s.mu[static_cast<std::size_t>(ch)] = mean;
    s.c[static_cast<std::size_t>(ch)] = var * inv;
  }
  return s;
}

GlobalStats global_stats(std::span<const ImageStats> stats) {
  if (stats.empty()) throw ValidationError("global_stats: empty list");
  const std::size_t dim = stats.front().mu.size();
  for (const auto& s : stats) {
    if (s.mu.size() != dim || s.c.size() != dim) {
      throw ValidationError("global_stats: dimension mismatch");
    }
  }
  const double inv = 1.0 / static_cast<double>(stats.size());
  GlobalStats g;
  g.mu_g.assign(dim, 0.0);
  g.c_g.assign(dim, 0.0);
  for (const auto& s : stats)
    for (std::size_t i = 0; i < dim; ++i) g.mu_g[i] += s.mu[i];
  for (double& v : g.mu_g) v *= inv;
  for (const auto& s : stats) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double dm = s.mu[i] - g.mu_g[i];
      g.c_g[i] += s.c[i] + dm * dm;
    }
  }
  for (double& v : g.c_g) v *= inv;
  return g;
}

double distance(const GlobalStats& global, const ImageStats& image, double epsilon) {
  if (global.c_g.size() != image.c.size()) throw ValidationError("distance: dimension mismatch");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < image.c.size(); ++i) {
    const double a = std::sqrt(global.c_g[i] + epsilon);
    const double b = std::sqrt(image.c[i] + epsilon);
    num += (a - b) * (a - b);
    den += a * a;
  }
  if (!(den > 0.0)) throw ValidationError("distance: global variance is identically zero");
  return std::sqrt(num) / std::sqrt(den);
}

double softmin(std::span<const double> distances) {
  if (distances.empty()) throw ValidationError("softmin: empty list");
  for (double d : distances) {
    if (!std::isfinite(d)) throw ValidationError("softmin: non-finite distance");
  }
  const auto w = softmin_weights(distances);
  // Offsetting by the minimum keeps constant lists exact.
  const double lo = *std::min_element(distances.begin(), distances.end());
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * (distances[i] - lo);
  return lo + s;
}

LossBreakdown total_loss(const V2Params& params, std::span<const V1Response> batch,
                         const LossConfig& config, const ExecPolicy& exec) {
  return forward_batch(params, batch, config, exec, /*keep_rectified=*/false).loss;
}

LossGradient loss_gradient(const V2Params& params, std::span<const V1Response> batch,
                           const LossConfig& config, const ExecPolicy& exec) {
  BatchForward f = forward_batch(params, batch, config, exec, config.include_variance);
  const std::size_t n_images = batch.size();
  const auto dim = static_cast<std::size_t>(params.d);

  LossGradient out;
  out.grad = orth_penalty_gradient(params);
  for (double& g : out.grad) g *= -config.lambda;

  if (config.include_variance) {
    const auto& d = f.loss.d;
    const double s = f.loss.l_var;
    const auto w = softmin_weights(d);
    const double eps = config.epsilon;

    // dJ/dd_n for the softmin.
    std::vector<double> g_d(n_images);
    for (std::size_t n = 0; n < n_images; ++n) g_d[n] = w[n] * (1.0 - d[n] + s);

    std::vector<double> a(dim);
    double den2 = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      a[i] = std::sqrt(f.global.c_g[i] + eps);
      den2 += a[i] * a[i];
    }
    const double den = std::sqrt(den2);

    // Gradients w.r.t. b_n = sqrt(c_n + eps) and a = sqrt(c_g + eps).
    std::vector<std::vector<double>> g_b(n_images, std::vector<double>(dim, 0.0));
    std::vector<double> g_a(dim, 0.0);
    for (std::size_t n = 0; n < n_images; ++n) {
      const auto& c = f.stats[n].c;
      const double num = d[n] * den;
      for (std::size_t i = 0; i < dim; ++i) {
        const double b = std::sqrt(c[i] + eps);
        const double diff = a[i] - b;
        const double pull = num > 0.0 ? diff / (num * den) : 0.0;
        g_b[n][i] = -g_d[n] * pull;
        g_a[i] += g_d[n] * (pull - num * a[i] / (den2 * den));
      }
    }
    std::vector<double> g_cg(dim);
    for (std::size_t i = 0; i < dim; ++i) g_cg[i] = g_a[i] / (2.0 * a[i]);

    // Gradient w.r.t. the normalized responses u_n(p).
    const double inv_n = 1.0 / static_cast<double>(n_images);
    std::vector<V2Response> g_u(n_images);
    std::vector<double> sum_gu(dim, 0.0);
    std::vector<double> sum_gu_u(dim, 0.0);
    for (std::size_t n = 0; n < n_images; ++n) {
      const V2Response& u = f.normalized[n];
      const double positions = static_cast<double>(u.plane_size());
      g_u[n] = V2Response(u.channels(), u.height(), u.width());
      for (std::size_t i = 0; i < dim; ++i) {
        const int ch = static_cast<int>(i);
        const double mu = f.stats[n].mu[i];
        const double b = std::sqrt(f.stats[n].c[i] + eps);
        const double g_c = g_b[n][i] / (2.0 * b) + g_cg[i] * inv_n;
        const double g_mu = g_cg[i] * 2.0 * inv_n * (mu - f.global.mu_g[i]);
        auto src = u.channel(ch);
        auto dst = g_u[n].channel(ch);
        for (std::size_t p = 0; p < src.size(); ++p) {
          dst[p] = (g_c * 2.0 * (src[p] - mu) + g_mu) / positions;
          sum_gu[i] += dst[p];
          sum_gu_u[i] += dst[p] * src[p];
        }
      }
    }

    // Back through batch normalization (statistics over all images and
    // positions), L2 pooling, rectification and the convolution.
    const double count = static_cast<double>(f.moments.count);
    std::vector<double> inv_std(dim), mean_gu(dim), mean_gu_u(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      inv_std[i] = 1.0 / std::sqrt(f.moments.var[i] + kNormEpsilon);
      mean_gu[i] = sum_gu[i] / count;
      mean_gu_u[i] = sum_gu_u[i] / count;
    }

    const std::size_t chunks =
        std::min(n_images, exec.deterministic ? std::size_t{8}
                                              : static_cast<std::size_t>(std::max(1, exec.threads)));
    std::vector<detail::RowMatrix> partial(
        chunks, detail::RowMatrix::Zero(params.d, static_cast<Eigen::Index>(params.row_length())));

    parallel_for(chunks, exec.threads, [&](std::size_t chunk) {
      const std::size_t begin = chunk * n_images / chunks;
      const std::size_t end = (chunk + 1) * n_images / chunks;
      for (std::size_t n = begin; n < end; ++n) {
        const V2Geometry geo = v2_geometry(batch[n], params);
        const auto& act = f.acts[n];
        const V2Response& u = f.normalized[n];
        const int pw = params.pool_window;
        Eigen::MatrixXd g_y = Eigen::MatrixXd::Zero(act.rectified.rows(), act.rectified.cols());
        for (int ch = 0; ch < params.d; ++ch) {
          const auto i = static_cast<std::size_t>(ch);
          for (int py = 0; py < geo.pooled_height; ++py) {
            for (int px = 0; px < geo.pooled_width; ++px) {
              const double uu = u(ch, py, px);
              const double g_z =
                  inv_std[i] * (g_u[n](ch, py, px) - mean_gu[i] - uu * mean_gu_u[i]);
              const double k = g_z / std::max(act.pooled(ch, py, px), kPoolNormFloor);
              for (int dy = 0; dy < pw; ++dy) {
                const Eigen::Index row =
                    static_cast<Eigen::Index>(py * pw + dy) * geo.conv_width + px * pw;
                for (int dx = 0; dx < pw; ++dx) {
                  g_y(ch, row + dx) = k * act.rectified(ch, row + dx);
                }
              }
            }
          }
        }
        Eigen::MatrixXd& patches = detail::patch_scratch();
        detail::im2col_transposed(batch[n], params.kernel, geo.conv_height, geo.conv_width, patches);
        partial[chunk].noalias() += g_y * patches;
      }
    });

    Eigen::Map<detail::RowMatrix> grad(out.grad.data(), params.d,
                                       static_cast<Eigen::Index>(params.row_length()));
    for (const auto& p : partial) grad += p;
  }

  out.loss = std::move(f.loss);
  return out;
}

}  // namespace v2tex
