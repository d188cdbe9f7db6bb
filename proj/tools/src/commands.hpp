#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "v2tex/classifier.hpp"
#include "v2tex/dataset_io.hpp"
#include "v2tex/parallel.hpp"
#include "v2tex/run_config.hpp"

namespace v2tex::cli {

namespace fs = std::filesystem;

// Each command validates everything it can before writing, builds its
// outputs in a sibling staging directory and renames it into place, so a
// failure never leaves a partial output directory behind.

struct SynthResult {
  DatasetManifest manifest;
  fs::path manifest_path;
};

SynthResult cmd_synth(const RunConfig& config, const fs::path& out_dir);

struct TrainArgs {
  fs::path manifest;
  fs::path weights;
  std::optional<fs::path> log;  // defaults to <weights>.log.csv
  bool resume = false;
};

struct TrainSummary {
  std::uint64_t start_step = 0;
  std::uint64_t final_step = 0;
  std::size_t steps = 0;
  fs::path log;
};

TrainSummary cmd_train(const RunConfig& config, const TrainArgs& args, const ExecPolicy& exec);

struct EvalArgs {
  std::optional<fs::path> weights;  // empty: V1-only features
  fs::path manifest;
  fs::path out_dir;
  Split eval_split = Split::test;
  std::optional<std::uint64_t> shuffle_labels_seed;
};

struct EvalReport {
  Evaluation eval;
  fs::path report_csv;
  fs::path confusion_csv;
};

EvalReport cmd_eval(const RunConfig& config, const EvalArgs& args, const ExecPolicy& exec);

struct ScrambleSummary {
  std::size_t images = 0;
  std::size_t clamped_pixels = 0;
  fs::path manifest_path;
};

/// Reads `<in_dir>/manifest.csv` and writes a phase-scrambled copy of every
/// image (same relative paths, 16-bit PGM) plus a manifest to out_dir.
ScrambleSummary cmd_scramble(const fs::path& in_dir, const fs::path& out_dir, std::uint64_t seed,
                             const ExecPolicy& exec);

struct RsaArgs {
  std::optional<fs::path> weights;  // empty: V1-only model
  std::optional<fs::path> stimuli;  // required unless neural_as_model
  fs::path neural_csv;
  fs::path out_dir;
  bool neural_as_model = false;
};

struct RsaSummary {
  double rho = 0.0;
  std::size_t conditions = 0;
};

RsaSummary cmd_rsa(const RunConfig& config, const RsaArgs& args, const ExecPolicy& exec);

/// Stable FNV-1a hash of a file's bytes, for determinism checks.
std::uint64_t file_hash(const fs::path& path);

}  // namespace v2tex::cli
