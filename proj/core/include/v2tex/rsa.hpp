#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "v2tex/dataset_io.hpp"
#include "v2tex/parallel.hpp"
#include "v2tex/v1_frontend.hpp"
#include "v2tex/v2_stage.hpp"

namespace v2tex {

/// Conditions (rows) by units or channels (columns).
struct ResponseMatrix {
  std::vector<std::string> conditions;
  Eigen::MatrixXd values;
};

/// Correlation-distance dissimilarities between conditions.
struct Rdm {
  std::vector<std::string> conditions;
  Eigen::MatrixXd values;

  int size() const { return static_cast<int>(values.rows()); }
};

/// sqrt(r) + sqrt(r + 1); throws ValidationError for r < 0 or non-finite r.
double gaussianize_counts(double r);

/// One row per family (in `families` order) holding the mean of the sample
/// rows assigned to it. Throws ValidationError for a family without samples
/// or a sample whose family is not listed.
ResponseMatrix family_average(const Eigen::MatrixXd& samples, std::span<const std::string> groups,
                              std::span<const std::string> families);

/// Entry (i, j) = 1 - Pearson correlation of rows i and j. Throws
/// ValidationError when fewer than 2 rows or a row has zero variance.
Rdm rdm(const ResponseMatrix& m);

/// Spearman correlation of the strict upper triangles with average ranks for
/// ties. Throws ValidationError on size mismatch, fewer than 3 conditions or
/// a constant triangle.
double spearman_rdm(const Rdm& a, const Rdm& b);

/// Same RDM with conditions reordered by `order` (new index i holds old
/// condition order[i]).
Rdm permute(const Rdm& r, std::span<const int> order);

struct NeuralRecord {
  std::string unit_id;
  std::string stimulus_id;
  std::string family;
  double spike_count = 0.0;
};

/// Reads `unit_id,stimulus_id,family,spike_count`.
std::vector<NeuralRecord> read_neural_csv(const std::filesystem::path& path);

/// Gaussianizes every count, then averages per (family, unit). Rows follow
/// `families` (sorted unique families of the records when empty); columns are
/// units in sorted order. Throws ValidationError naming any requested family
/// absent from the records, or a unit with no response to some family.
ResponseMatrix neural_family_responses(std::span<const NeuralRecord> records,
                                       std::span<const std::string> families = {});

struct StimulusOptions {
  int size = 224;
  double aperture_fraction = 1.0;
  SteerableConfig v1;
  ExecPolicy exec;
};

/// Every manifest entry is fit to size x size, windowed by the raised-cosine
/// aperture and passed through V1 and (unless `params` is empty) the eval-mode
/// V2 stage; GAP features are averaged per label. Rows follow sorted labels.
ResponseMatrix model_family_responses(const DatasetManifest& stimuli,
                                      const std::optional<V2Params>& params,
                                      const StimulusOptions& options = {});

Rdm model_family_rdm(const DatasetManifest& stimuli, const std::optional<V2Params>& params,
                     const StimulusOptions& options = {});

/// Header row `condition,<names...>` then one row per condition.
void write_rdm_csv(const Rdm& r, const std::filesystem::path& path);
Rdm read_rdm_csv(const std::filesystem::path& path);

}  // namespace v2tex
