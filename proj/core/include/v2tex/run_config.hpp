#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "v2tex/classifier.hpp"
#include "v2tex/dataset_io.hpp"
#include "v2tex/trainer.hpp"
#include "v2tex/v1_frontend.hpp"

namespace v2tex {

/// Model shape of the learned stage.
struct ModelShape {
  int d = 60;
  int kernel = 7;
  int pool_window = 4;

  void validate() const;
};

/// Every tunable default of the pipeline in one place.
///
/// Text form: one `key = value` per line, `#` starts a comment. Keys:
///   scales orientations grid_factor d kernel pool_window
///   learning_rate batch_size epochs lambda epsilon checkpoint_every
///   augment_rotations gamma uniform_prior seed
///   families samples_per_family image_size train_fraction val_fraction
struct RunConfig {
  SteerableConfig v1;
  ModelShape model;
  TrainConfig train;
  QdaOptions qda;
  SynthOptions synth;
  std::uint64_t seed = 0;

  /// Copies `seed` into the per-module seeds and validates every section.
  void finalize();
  void validate() const;

  std::string to_text() const;
};

/// Parses the text form on top of the defaults. Throws ValidationError on an
/// unknown or repeated key, a malformed line or value, or a failed
/// precondition.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace v2tex
