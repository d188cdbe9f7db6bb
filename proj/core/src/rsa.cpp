#include "v2tex/rsa.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "v2tex/classifier.hpp"
#include "v2tex/csv.hpp"
#include "v2tex/error.hpp"

namespace v2tex {

namespace {

std::vector<double> upper_triangle(const Rdm& r) {
  std::vector<double> out;
  const int n = r.size();
  out.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) out.push_back(r.values(i, j));
  return out;
}

// Ranks starting at 1, ties replaced by their average rank.
std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

bool constant(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

}  // namespace

double gaussianize_counts(double r) {
  if (!std::isfinite(r) || r < 0.0) {
    throw ValidationError("gaussianize_counts: spike count must be finite and >= 0");
  }
  return std::sqrt(r) + std::sqrt(r + 1.0);
}

ResponseMatrix family_average(const Eigen::MatrixXd& samples, std::span<const std::string> groups,
                              std::span<const std::string> families) {
  if (static_cast<std::size_t>(samples.rows()) != groups.size()) {
    throw ValidationError("family_average: sample/group count mismatch");
  }
  std::map<std::string, Eigen::Index> row_of;
  for (std::size_t f = 0; f < families.size(); ++f) {
    if (!row_of.emplace(families[f], static_cast<Eigen::Index>(f)).second) {
      throw ValidationError("family_average: duplicate family '" + families[f] + "'");
    }
  }
  ResponseMatrix out;
  out.conditions.assign(families.begin(), families.end());
  out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(families.size()), samples.cols());
  std::vector<std::size_t> counts(families.size(), 0);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto it = row_of.find(groups[i]);
    if (it == row_of.end()) throw ValidationError("family_average: unknown family '" + groups[i] + "'");
    out.values.row(it->second) += samples.row(static_cast<Eigen::Index>(i));
    ++counts[static_cast<std::size_t>(it->second)];
  }
  for (std::size_t f = 0; f < families.size(); ++f) {
    if (counts[f] == 0) throw ValidationError("family_average: family '" + families[f] + "' has no samples");
    out.values.row(static_cast<Eigen::Index>(f)) /= static_cast<double>(counts[f]);
  }
  return out;
}

Rdm rdm(const ResponseMatrix& m) {
  const Eigen::Index n = m.values.rows();
  if (n < 2) throw ValidationError("rdm: need at least 2 conditions");
  if (m.values.cols() < 2) throw ValidationError("rdm: need at least 2 columns");
  Eigen::MatrixXd z = m.values.colwise() - m.values.rowwise().mean();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = z.row(i).norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      const std::string name = static_cast<std::size_t>(i) < m.conditions.size()
                                   ? m.conditions[static_cast<std::size_t>(i)]
                                   : std::to_string(i);
      throw ValidationError("rdm: condition '" + name + "' has zero variance across columns");
    }
    z.row(i) /= norm;
  }
  Rdm out;
  out.conditions = m.conditions;
  out.values = Eigen::MatrixXd::Ones(n, n) - z * z.transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = std::clamp(out.values(i, j), 0.0, 2.0);
      out.values(i, j) = v;
      out.values(j, i) = v;
    }
  }
  return out;
}

double spearman_rdm(const Rdm& a, const Rdm& b) {
  if (a.size() != b.size()) {
    throw ValidationError("spearman_rdm: size mismatch (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  }
  if (a.size() < 3) throw ValidationError("spearman_rdm: need at least 3 conditions");
  const auto ta = upper_triangle(a);
  const auto tb = upper_triangle(b);
  if (constant(ta) || constant(tb)) {
    throw ValidationError("spearman_rdm: constant upper triangle, correlation undefined");
  }
  return std::clamp(pearson(average_ranks(ta), average_ranks(tb)), -1.0, 1.0);
}

Rdm permute(const Rdm& r, std::span<const int> order) {
  if (order.size() != static_cast<std::size_t>(r.size())) throw ValidationError("permute: size mismatch");
  std::vector<bool> seen(order.size(), false);
  for (int o : order) {
    if (o < 0 || o >= r.size() || seen[static_cast<std::size_t>(o)]) {
      throw ValidationError("permute: order is not a permutation");
    }
    seen[static_cast<std::size_t>(o)] = true;
  }
  Rdm out;
  out.values.resize(r.values.rows(), r.values.cols());
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (!r.conditions.empty()) out.conditions.push_back(r.conditions[static_cast<std::size_t>(order[i])]);
    for (std::size_t j = 0; j < order.size(); ++j)
      out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r.values(order[i], order[j]);
  }
  return out;
}

std::vector<NeuralRecord> read_neural_csv(const std::filesystem::path& path) {
  const auto rows = csv::read_file(path);
  const csv::Row header{"unit_id", "stimulus_id", "family", "spike_count"};
  if (rows.empty() || rows[0] != header) {
    throw FormatError(path.string() + ": expected header unit_id,stimulus_id,family,spike_count");
  }
  std::vector<NeuralRecord> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 4) {
      throw FormatError(path.string() + ": row " + std::to_string(r) + " does not have 4 fields");
    }
    const double count = csv::parse_double(rows[r][3], "spike_count");
    if (!(count >= 0.0) || !std::isfinite(count)) {
      throw ValidationError(path.string() + ": row " + std::to_string(r) + " has an invalid spike count");
    }
    out.push_back({rows[r][0], rows[r][1], rows[r][2], count});
  }
  return out;
}

ResponseMatrix neural_family_responses(std::span<const NeuralRecord> records,
                                       std::span<const std::string> families) {
  if (records.empty()) throw ValidationError("neural data: no records");
  std::set<std::string> present;
  std::set<std::string> units;
  for (const auto& r : records) {
    present.insert(r.family);
    units.insert(r.unit_id);
  }
  std::vector<std::string> order(families.begin(), families.end());
  if (order.empty()) order.assign(present.begin(), present.end());
  for (const auto& f : order) {
    if (!present.contains(f)) throw ValidationError("neural data has no responses for family '" + f + "'");
  }
  std::map<std::string, Eigen::Index> row_of, col_of;
  for (std::size_t i = 0; i < order.size(); ++i) row_of[order[i]] = static_cast<Eigen::Index>(i);
  Eigen::Index c = 0;
  for (const auto& u : units) col_of[u] = c++;

  const auto nr = static_cast<Eigen::Index>(order.size());
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(nr, c);
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(nr, c);
  for (const auto& r : records) {
    const auto it = row_of.find(r.family);
    if (it == row_of.end()) continue;
    const auto col = col_of.at(r.unit_id);
    sums(it->second, col) += gaussianize_counts(r.spike_count);
    counts(it->second, col) += 1.0;
  }
  for (Eigen::Index i = 0; i < nr; ++i) {
    for (const auto& [unit, col] : col_of) {
      if (counts(i, col) == 0.0) {
        throw ValidationError("neural data: unit '" + unit + "' has no responses for family '" +
                              order[static_cast<std::size_t>(i)] + "'");
      }
    }
  }
  return {order, sums.cwiseQuotient(counts)};
}

ResponseMatrix model_family_responses(const DatasetManifest& stimuli,
                                      const std::optional<V2Params>& params,
                                      const StimulusOptions& options) {
  if (stimuli.empty()) throw ValidationError("stimulus manifest is empty");
  options.v1.validate();
  if (params) params->validate();
  const auto& entries = stimuli.entries();
  const FilterBank bank(options.v1, options.size, options.size);
  const int dim = params ? params->d : options.v1.channel_count();
  Eigen::MatrixXd features(static_cast<Eigen::Index>(entries.size()), dim);
  std::vector<std::string> groups;
  for (const auto& e : entries) groups.push_back(e.label);

  parallel_for(entries.size(), options.exec.threads, [&](std::size_t i) {
    const Image img = raised_cosine_aperture(
        fit_square(load_grayscale(stimuli.resolve(entries[i])), options.size), options.aperture_fraction);
    const V1Response v1 = v1_forward(img, bank);
    const auto f = gap_features(params ? v2_forward_eval(v1, *params) : v1);
    features.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(f.data(), dim);
  });
  return family_average(features, groups, stimuli.labels());
}

Rdm model_family_rdm(const DatasetManifest& stimuli, const std::optional<V2Params>& params,
                     const StimulusOptions& options) {
  const ResponseMatrix m = model_family_responses(stimuli, params, options);
  bool varies = false;
  for (Eigen::Index i = 1; i < m.values.rows() && !varies; ++i) varies = m.values.row(i) != m.values.row(0);
  if (!varies) throw ValidationError("model responses do not vary across stimulus families");
  return rdm(m);
}

void write_rdm_csv(const Rdm& r, const std::filesystem::path& path) {
  std::vector<csv::Row> rows;
  csv::Row header{"condition"};
  header.insert(header.end(), r.conditions.begin(), r.conditions.end());
  rows.push_back(std::move(header));
  for (int i = 0; i < r.size(); ++i) {
    csv::Row row{r.conditions.at(static_cast<std::size_t>(i))};
    for (int j = 0; j < r.size(); ++j) row.push_back(csv::format_double(r.values(i, j)));
    rows.push_back(std::move(row));
  }
  csv::write_file(path, rows);
}

Rdm read_rdm_csv(const std::filesystem::path& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty() || rows[0].empty() || rows[0][0] != "condition") {
    throw FormatError(path.string() + ": expected header condition,...");
  }
  const std::size_t n = rows[0].size() - 1;
  if (rows.size() != n + 1) throw FormatError(path.string() + ": RDM is not square");
  Rdm out;
  out.conditions.assign(rows[0].begin() + 1, rows[0].end());
  out.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i + 1].size() != n + 1) throw FormatError(path.string() + ": RDM row has wrong length");
    for (std::size_t j = 0; j < n; ++j)
      out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          csv::parse_double(rows[i + 1][j + 1], "rdm entry");
  }
  return out;
}

}  // namespace v2tex
