#include "v2tex/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>

#include "v2tex/random.hpp"
#include "v2tex/csv.hpp"
#include "v2tex/error.hpp"

namespace v2tex {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be > 0");
  if (batch_size < 2) throw ValidationError("batch_size must be >= 2");
  if (epochs < 0) throw ValidationError("epochs must be >= 0");
  if (checkpoint_every < 0) throw ValidationError("checkpoint_every must be >= 0");
  if (exec.threads < 1) throw ValidationError("threads must be >= 1");
  loss().validate();
}

void TrainingLog::write_csv(const std::filesystem::path& path) const {
  std::vector<csv::Row> rows{{"step", "J", "L_var", "L_orth", "d_min", "d_mean"}};
  for (const auto& s : steps) {
    rows.push_back({std::to_string(s.step), csv::format_double(s.j), csv::format_double(s.l_var),
                    csv::format_double(s.l_orth), csv::format_double(s.d_min),
                    csv::format_double(s.d_mean)});
  }
  csv::write_file(path, rows);
}

std::vector<V1Response> compute_v1(std::span<const Image> images, const SteerableConfig& config,
                                   const ExecPolicy& exec) {
  std::map<std::pair<int, int>, std::shared_ptr<const FilterBank>> banks;
  for (const auto& img : images) {
    auto key = std::make_pair(img.height(), img.width());
    if (!banks.contains(key)) {
      banks.emplace(key, std::make_shared<const FilterBank>(config, img.height(), img.width()));
    }
  }
  std::vector<V1Response> out(images.size());
  parallel_for(images.size(), exec.threads, [&](std::size_t i) {
    const auto& bank = *banks.at({images[i].height(), images[i].width()});
    out[i] = v1_forward(images[i], bank);
  });
  return out;
}

TrainResult train_on_responses(std::span<const V1Response> data, V2Params params,
                               const TrainConfig& config, std::uint64_t start_step,
                               const TrainCallbacks& callbacks) {
  config.validate();
  params.validate();
  if (data.size() < 2) throw ValidationError("training needs at least 2 images");

  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  const std::size_t full_batches = data.size() / batch;
  const std::size_t tail = data.size() % batch;
  const std::size_t steps_per_epoch = full_batches + (tail >= 2 ? 1 : 0);
  const std::uint64_t first_epoch = steps_per_epoch ? start_step / steps_per_epoch : 0;
  const LossConfig loss_config = config.loss();

  TrainResult result;
  result.final_step = start_step;
  std::uint64_t step = start_step;
  std::vector<std::size_t> order(data.size());

  for (int e = 0; e < config.epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    detail::Rng rng(detail::derive_seed(config.seed, first_epoch + static_cast<std::uint64_t>(e)));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }

    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(order.size(), begin + batch);
      if (end - begin < 2) {
        ++result.log.dropped_batches;
        continue;
      }
      const auto t0 = std::chrono::steady_clock::now();
      std::vector<V1Response> members;
      members.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) members.push_back(data[order[i]]);

      LossGradient lg = loss_gradient(params, members, loss_config, config.exec);
      for (std::size_t i = 0; i < params.theta.size(); ++i) {
        params.theta[i] += config.learning_rate * lg.grad[i];
      }
      update_running_stats(params, lg.loss.batch_moments);
      ++step;

      TrainStep rec;
      rec.step = step;
      rec.j = lg.loss.j;
      rec.l_var = lg.loss.l_var;
      rec.l_orth = lg.loss.l_orth;
      rec.d_min = *std::min_element(lg.loss.d.begin(), lg.loss.d.end());
      rec.d_mean = std::accumulate(lg.loss.d.begin(), lg.loss.d.end(), 0.0) /
                   static_cast<double>(lg.loss.d.size());
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      result.log.steps.push_back(rec);
      if (callbacks.on_step) callbacks.on_step(rec);
      if (callbacks.checkpoint && config.checkpoint_every > 0 &&
          step % static_cast<std::uint64_t>(config.checkpoint_every) == 0) {
        callbacks.checkpoint(params, step);
      }
    }
  }
  result.params = std::move(params);
  result.final_step = step;
  return result;
}

TrainResult train(const DatasetManifest& manifest, const TrainConfig& config,
                  const SteerableConfig& v1_config, std::optional<V2Params> init,
                  std::uint64_t start_step, const TrainCallbacks& callbacks) {
  config.validate();
  v1_config.validate();
  std::vector<Image> images = load_split(manifest, Split::train);
  if (images.empty()) throw ValidationError("manifest has no train entries");
  if (config.augment_rotations) {
    const std::size_t n = images.size();
    for (std::size_t i = 0; i < n; ++i)
      for (int k = 1; k < 4; ++k) images.push_back(rotate_quarter(images[i], k));
  }
  const auto v1 = compute_v1(images, v1_config, config.exec);
  images.clear();
  V2Params params = init ? std::move(*init)
                         : init_params(config.seed, 60, v1_config.channel_count());
  return train_on_responses(v1, std::move(params), config, start_step, callbacks);
}

}  // namespace v2tex
