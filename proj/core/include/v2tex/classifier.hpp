#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "v2tex/image.hpp"

namespace v2tex {

/// Per-channel spatial mean. Throws ValidationError on an empty response.
std::vector<double> gap_features(const FeatureMaps& response);

/// Labelled feature vectors (`id,label,f0,f1,...` on disk).
struct FeatureTable {
  std::vector<std::string> ids;
  std::vector<std::string> labels;
  std::vector<std::vector<double>> rows;

  std::size_t size() const { return rows.size(); }
  std::size_t dim() const { return rows.empty() ? 0 : rows.front().size(); }
  void add(std::string id, std::string label, std::vector<double> features);

  void write_csv(const std::filesystem::path& path) const;
  static FeatureTable read_csv(const std::filesystem::path& path);
};

struct QdaClass {
  std::string label;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // after shrinkage
  Eigen::MatrixXd precision;
  double log_det = 0.0;
  double prior = 0.0;
};

/// Classes are kept in sorted label order; ties go to the lowest index.
struct QdaModel {
  std::vector<QdaClass> classes;
  int dim = 0;

  int class_index(const std::string& label) const;  // -1 when unseen
};

struct QdaOptions {
  double shrinkage = 0.1;  // gamma in [0, 1]
  bool uniform_prior = false;

  void validate() const;
};

/// Sigma_k = (1 - gamma) S_k + gamma tr(S_k)/D I with S_k the unbiased class
/// covariance. Throws ValidationError when a class has fewer than 2 samples,
/// features are non-finite or ragged, or a covariance is not positive definite.
QdaModel fit_qda(std::span<const std::vector<double>> features, std::span<const std::string> labels,
                 const QdaOptions& options = {});

struct QdaPrediction {
  int class_index = 0;
  std::string label;
  std::vector<double> scores;  // g_k(x)
};

QdaPrediction predict_qda(const QdaModel& model, std::span<const double> x);

struct Evaluation {
  std::vector<std::string> classes;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::vector<double> per_class_accuracy;           // NaN for classes absent from the set
  double accuracy = 0.0;
  std::size_t total = 0;
};

/// Throws ValidationError on an empty set or a label unseen at fit time.
Evaluation evaluate(const QdaModel& model, std::span<const std::vector<double>> features,
                    std::span<const std::string> labels);

/// Square CSV with a header row of predicted labels and a leading column of
/// true labels.
void write_confusion_csv(const Evaluation& eval, const std::filesystem::path& path);

}  // namespace v2tex
