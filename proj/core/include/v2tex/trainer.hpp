#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "v2tex/dataset_io.hpp"
#include "v2tex/objective.hpp"
#include "v2tex/parallel.hpp"
#include "v2tex/v1_frontend.hpp"
#include "v2tex/v2_stage.hpp"

namespace v2tex {

struct TrainConfig {
  double learning_rate = 0.001;
  int batch_size = 275;
  int epochs = 1;
  std::uint64_t seed = 0;
  double lambda = 1.0;
  double epsilon = 1e-8;
  int checkpoint_every = 0;  // steps; 0 disables periodic checkpoints
  bool include_variance = true;
  bool augment_rotations = false;  // add 90/180/270 degree copies of every image
  ExecPolicy exec;

  void validate() const;
  LossConfig loss() const { return {lambda, epsilon, include_variance}; }
};

struct TrainStep {
  std::uint64_t step = 0;
  double j = 0.0;
  double l_var = 0.0;
  double l_orth = 0.0;
  double d_min = 0.0;
  double d_mean = 0.0;
  double seconds = 0.0;
};

struct TrainingLog {
  std::vector<TrainStep> steps;
  std::size_t dropped_batches = 0;

  /// `step,J,L_var,L_orth,d_min,d_mean`, one row per executed step.
  void write_csv(const std::filesystem::path& path) const;
};

struct TrainResult {
  V2Params params;
  TrainingLog log;
  std::uint64_t final_step = 0;
};

struct TrainCallbacks {
  std::function<void(const V2Params&, std::uint64_t step)> checkpoint;
  std::function<void(const TrainStep&)> on_step;
};

/// V1 responses for a list of images; filter banks are shared per image size.
std::vector<V1Response> compute_v1(std::span<const Image> images, const SteerableConfig& config,
                                   const ExecPolicy& exec = {});

/// Plain stochastic gradient ascent on J over precomputed V1 responses.
/// Shuffles every epoch (seeded by config.seed and the global epoch index),
/// drops tail batches with fewer than 2 images, and updates the running
/// normalization statistics after each step. Step numbering continues from
/// `start_step`.
TrainResult train_on_responses(std::span<const V1Response> data, V2Params params,
                               const TrainConfig& config, std::uint64_t start_step = 0,
                               const TrainCallbacks& callbacks = {});

/// Loads the manifest's train split, optionally augments it with rotations,
/// runs the V1 stage and trains. Without `init`, parameters are initialized
/// from config.seed with d = 60.
TrainResult train(const DatasetManifest& manifest, const TrainConfig& config,
                  const SteerableConfig& v1_config, std::optional<V2Params> init = std::nullopt,
                  std::uint64_t start_step = 0, const TrainCallbacks& callbacks = {});

}  // namespace v2tex
