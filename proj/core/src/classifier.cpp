#include "v2tex/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "v2tex/csv.hpp"
#include "v2tex/error.hpp"

namespace v2tex {

std::vector<double> gap_features(const FeatureMaps& response) {
  const std::size_t positions = response.plane_size();
  if (positions == 0 || response.channels() == 0) {
    throw ValidationError("gap_features: empty response");
  }
  // Same arithmetic as image_stats so the two agree bit for bit.
  const double inv = 1.0 / static_cast<double>(positions);
  std::vector<double> out(static_cast<std::size_t>(response.channels()));
  for (int ch = 0; ch < response.channels(); ++ch) {
    const auto plane = response.channel(ch);
    out[static_cast<std::size_t>(ch)] = std::accumulate(plane.begin(), plane.end(), 0.0) * inv;
  }
  return out;
}

void FeatureTable::add(std::string id, std::string label, std::vector<double> features) {
  if (!rows.empty() && features.size() != dim()) {
    throw ValidationError("feature table: row " + id + " has " + std::to_string(features.size()) +
                          " features, expected " + std::to_string(dim()));
  }
  ids.push_back(std::move(id));
  labels.push_back(std::move(label));
  rows.push_back(std::move(features));
}

void FeatureTable::write_csv(const std::filesystem::path& path) const {
  std::vector<csv::Row> out;
  csv::Row header{"id", "label"};
  for (std::size_t i = 0; i < dim(); ++i) header.push_back("f" + std::to_string(i));
  out.push_back(std::move(header));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    csv::Row row{ids[r], labels[r]};
    for (double v : rows[r]) row.push_back(csv::format_double(v));
    out.push_back(std::move(row));
  }
  csv::write_file(path, out);
}

FeatureTable FeatureTable::read_csv(const std::filesystem::path& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty() || rows[0].size() < 3 || rows[0][0] != "id" || rows[0][1] != "label") {
    throw FormatError(path.string() + ": expected header id,label,f0,...");
  }
  const std::size_t dim = rows[0].size() - 2;
  FeatureTable table;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != dim + 2) {
      throw FormatError(path.string() + ": row " + std::to_string(r) + " has wrong field count");
    }
    std::vector<double> f(dim);
    for (std::size_t i = 0; i < dim; ++i) f[i] = csv::parse_double(rows[r][i + 2], "feature");
    table.add(rows[r][0], rows[r][1], std::move(f));
  }
  return table;
}

int QdaModel::class_index(const std::string& label) const {
  for (std::size_t k = 0; k < classes.size(); ++k)
    if (classes[k].label == label) return static_cast<int>(k);
  return -1;
}

void QdaOptions::validate() const {
  if (!(shrinkage >= 0.0 && shrinkage <= 1.0)) throw ValidationError("shrinkage must be in [0, 1]");
}

QdaModel fit_qda(std::span<const std::vector<double>> features, std::span<const std::string> labels,
                 const QdaOptions& options) {
  options.validate();
  if (features.size() != labels.size()) throw ValidationError("fit_qda: features/labels length mismatch");
  if (features.empty()) throw ValidationError("fit_qda: no samples");
  const std::size_t dim = features.front().size();
  if (dim == 0) throw ValidationError("fit_qda: zero-dimensional features");
  for (const auto& f : features) {
    if (f.size() != dim) throw ValidationError("fit_qda: ragged feature vectors");
    for (double v : f)
      if (!std::isfinite(v)) throw ValidationError("fit_qda: non-finite feature");
  }

  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);

  QdaModel model;
  model.dim = static_cast<int>(dim);
  const auto d = static_cast<Eigen::Index>(dim);
  for (const auto& [label, idx] : members) {
    if (idx.size() < 2) {
      throw ValidationError("fit_qda: class '" + label + "' has " + std::to_string(idx.size()) +
                            " sample(s), need >= 2");
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(idx.size()), d);
    for (std::size_t r = 0; r < idx.size(); ++r)
      x.row(static_cast<Eigen::Index>(r)) = Eigen::Map<const Eigen::RowVectorXd>(features[idx[r]].data(), d);

    QdaClass c;
    c.label = label;
    c.mean = x.colwise().mean().transpose();
    const Eigen::MatrixXd centered = x.rowwise() - c.mean.transpose();
    Eigen::MatrixXd s = centered.transpose() * centered / static_cast<double>(idx.size() - 1);
    s = 0.5 * (s + s.transpose()).eval();  // blocked GEMM is not exactly symmetric
    const double g = options.shrinkage;
    c.covariance = (1.0 - g) * s;
    c.covariance.diagonal().array() += g * s.trace() / static_cast<double>(dim);

    Eigen::LLT<Eigen::MatrixXd> llt(c.covariance);
    if (llt.info() != Eigen::Success) {
      throw ValidationError("fit_qda: covariance of class '" + label +
                            "' is not positive definite (increase shrinkage)");
    }
    c.log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    c.precision = llt.solve(Eigen::MatrixXd::Identity(d, d));
    c.prior = options.uniform_prior ? 1.0 / static_cast<double>(members.size())
                                    : static_cast<double>(idx.size()) / static_cast<double>(labels.size());
    model.classes.push_back(std::move(c));
  }
  return model;
}

QdaPrediction predict_qda(const QdaModel& model, std::span<const double> x) {
  if (model.classes.empty()) throw ValidationError("predict_qda: model not fitted");
  if (x.size() != static_cast<std::size_t>(model.dim)) {
    throw ValidationError("predict_qda: feature dimension " + std::to_string(x.size()) +
                          " does not match model dimension " + std::to_string(model.dim));
  }
  const Eigen::Map<const Eigen::VectorXd> v(x.data(), model.dim);
  QdaPrediction out;
  out.scores.reserve(model.classes.size());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < model.classes.size(); ++k) {
    const auto& c = model.classes[k];
    const Eigen::VectorXd diff = v - c.mean;
    const double g = -0.5 * c.log_det - 0.5 * diff.dot(c.precision * diff) + std::log(c.prior);
    out.scores.push_back(g);
    if (g > best) {
      best = g;
      out.class_index = static_cast<int>(k);
    }
  }
  out.label = model.classes[static_cast<std::size_t>(out.class_index)].label;
  return out;
}

Evaluation evaluate(const QdaModel& model, std::span<const std::vector<double>> features,
                    std::span<const std::string> labels) {
  if (features.empty()) throw ValidationError("evaluate: empty test set");
  if (features.size() != labels.size()) throw ValidationError("evaluate: features/labels length mismatch");
  const std::size_t k = model.classes.size();
  Evaluation e;
  for (const auto& c : model.classes) e.classes.push_back(c.label);
  e.confusion.assign(k, std::vector<std::size_t>(k, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const int truth = model.class_index(labels[i]);
    if (truth < 0) throw ValidationError("evaluate: label '" + labels[i] + "' unseen at fit time");
    const int pred = predict_qda(model, features[i]).class_index;
    ++e.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)];
    if (pred == truth) ++correct;
  }
  e.total = features.size();
  e.accuracy = static_cast<double>(correct) / static_cast<double>(e.total);
  for (std::size_t t = 0; t < k; ++t) {
    const auto n = std::accumulate(e.confusion[t].begin(), e.confusion[t].end(), std::size_t{0});
    e.per_class_accuracy.push_back(n ? static_cast<double>(e.confusion[t][t]) / static_cast<double>(n)
                                     : std::numeric_limits<double>::quiet_NaN());
  }
  return e;
}

void write_confusion_csv(const Evaluation& eval, const std::filesystem::path& path) {
  std::vector<csv::Row> rows;
  csv::Row header{"true\\predicted"};
  header.insert(header.end(), eval.classes.begin(), eval.classes.end());
  rows.push_back(std::move(header));
  for (std::size_t t = 0; t < eval.classes.size(); ++t) {
    csv::Row row{eval.classes[t]};
    for (auto n : eval.confusion[t]) row.push_back(std::to_string(n));
    rows.push_back(std::move(row));
  }
  csv::write_file(path, rows);
}

}  // namespace v2tex
