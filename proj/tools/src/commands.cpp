#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <iterator>
#include <numeric>

#include "v2tex/csv.hpp"
#include "v2tex/error.hpp"
#include "v2tex/random.hpp"
#include "v2tex/rsa.hpp"
#include "v2tex/trainer.hpp"
#include "v2tex/v1_frontend.hpp"
#include "v2tex/v2_stage.hpp"
#include "v2tex/weight_file.hpp"

namespace v2tex::cli {

namespace {

void require_fresh_dir(const fs::path& dir) {
  std::error_code ec;
  if (!fs::exists(dir, ec)) return;
  if (!fs::is_directory(dir, ec) || !fs::is_empty(dir, ec)) {
    throw ValidationError("output directory " + dir.string() + " exists and is not empty");
  }
}

// Output directory built under a hidden sibling and renamed on commit.
class StagedDir {
 public:
  explicit StagedDir(fs::path final_dir) : final_(std::move(final_dir)) {
    if (final_.filename().empty()) final_ = final_.parent_path();
    require_fresh_dir(final_);
    staging_ = final_.parent_path() / ("." + final_.filename().string() + ".partial");
    std::error_code ec;
    fs::remove_all(staging_, ec);
    fs::create_directories(staging_, ec);
    if (ec) throw IoError("cannot create " + staging_.string() + ": " + ec.message());
  }
  StagedDir(const StagedDir&) = delete;
  StagedDir& operator=(const StagedDir&) = delete;
  ~StagedDir() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(staging_, ec);
    }
  }

  const fs::path& path() const { return staging_; }
  const fs::path& final_path() const { return final_; }

  void commit() {
    std::error_code ec;
    if (fs::exists(final_, ec)) fs::remove(final_, ec);  // known to be an empty directory
    fs::rename(staging_, final_, ec);
    if (ec) throw IoError("cannot move outputs to " + final_.string() + ": " + ec.message());
    committed_ = true;
  }

 private:
  fs::path final_;
  fs::path staging_;
  bool committed_ = false;
};

DatasetManifest read_manifest(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("manifest not found: " + path.string());
  return DatasetManifest::read_csv(path);
}

// Images that do not already have the configured size are centre-cropped and
// resized to it.
Image load_conformed(const DatasetManifest& manifest, const ManifestEntry& entry, int size) {
  Image img = load_grayscale(manifest.resolve(entry));
  if (img.height() != size || img.width() != size) img = fit_square(img, size);
  return img;
}

std::vector<ManifestEntry> split_entries(const DatasetManifest& manifest, Split which) {
  auto entries = manifest.split(which);
  if (entries.empty()) {
    throw ValidationError("manifest has no " + std::string(to_string(which)) + " entries");
  }
  return entries;
}

V2Params expected_shape(const RunConfig& config) {
  V2Params p;
  p.d = config.model.d;
  p.in_channels = config.v1.channel_count();
  p.kernel = config.model.kernel;
  p.pool_window = config.model.pool_window;
  p.theta.assign(p.weight_count(), 0.0);
  return p;
}

FeatureTable extract_features(const DatasetManifest& manifest, const std::vector<ManifestEntry>& entries,
                              const RunConfig& config, const std::optional<V2Params>& params,
                              const ExecPolicy& exec) {
  const FilterBank bank(config.v1, config.synth.size, config.synth.size);
  std::vector<std::vector<double>> rows(entries.size());
  parallel_for(entries.size(), exec.threads, [&](std::size_t i) {
    const V1Response v1 = v1_forward(load_conformed(manifest, entries[i], config.synth.size), bank);
    rows[i] = gap_features(params ? v2_forward_eval(v1, *params) : v1);
  });
  FeatureTable table;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    table.add(entries[i].path.generic_string(), entries[i].label, std::move(rows[i]));
  }
  return table;
}

}  // namespace

SynthResult cmd_synth(const RunConfig& config, const fs::path& out_dir) {
  config.validate();
  StagedDir staged(out_dir);
  const SynthSet set = synth_texture_set(config.synth);
  write_synth_set(set, staged.path());
  staged.commit();
  SynthResult out{set.manifest, staged.final_path() / "manifest.csv"};
  out.manifest.set_base_dir(staged.final_path());
  return out;
}

TrainSummary cmd_train(const RunConfig& config, const TrainArgs& args, const ExecPolicy& exec) {
  config.validate();
  TrainConfig tc = config.train;
  tc.exec = exec;
  tc.validate();
  const DatasetManifest manifest = read_manifest(args.manifest);
  const auto entries = split_entries(manifest, Split::train);
  if (args.weights.empty()) throw ValidationError("weights path is empty");
  const fs::path log_path = args.log ? *args.log : fs::path(args.weights.string() + ".log.csv");

  V2Params params;
  std::uint64_t start_step = 0;
  if (args.resume) {
    if (!fs::exists(args.weights)) {
      throw ValidationError("--resume given but " + args.weights.string() + " does not exist");
    }
    Checkpoint ck = load_checkpoint(args.weights, expected_shape(config));
    params = std::move(ck.params);
    start_step = ck.step;
  } else {
    params = init_params(config.seed, config.model.d, config.v1.channel_count(), config.model.kernel,
                         config.model.pool_window);
  }

  std::vector<Image> images;
  images.reserve(entries.size() * (tc.augment_rotations ? 4 : 1));
  for (const auto& e : entries) images.push_back(load_conformed(manifest, e, config.synth.size));
  if (tc.augment_rotations) {
    const std::size_t n = images.size();
    for (std::size_t i = 0; i < n; ++i)
      for (int k = 1; k < 4; ++k) images.push_back(rotate_quarter(images[i], k));
  }
  const auto v1 = compute_v1(images, config.v1, exec);
  images.clear();
  images.shrink_to_fit();

  TrainCallbacks callbacks;
  callbacks.checkpoint = [&](const V2Params& p, std::uint64_t step) {
    save_checkpoint(p, args.weights, step);
  };
  callbacks.on_step = [](const TrainStep& s) {
    std::clog << "step " << s.step << " J=" << s.j << " L_var=" << s.l_var << " L_orth=" << s.l_orth
              << " d_min=" << s.d_min << " d_mean=" << s.d_mean << " (" << s.seconds << " s)\n";
  };
  const TrainResult result = train_on_responses(v1, std::move(params), tc, start_step, callbacks);
  if (result.log.dropped_batches > 0) {
    std::clog << "dropped " << result.log.dropped_batches << " tail batch(es) with fewer than 2 images\n";
  }
  save_checkpoint(result.params, args.weights, result.final_step);
  result.log.write_csv(log_path.string() + ".tmp");
  std::error_code ec;
  fs::rename(log_path.string() + ".tmp", log_path, ec);
  if (ec) throw IoError("cannot write " + log_path.string() + ": " + ec.message());
  return {start_step, result.final_step, result.log.steps.size(), log_path};
}

EvalReport cmd_eval(const RunConfig& config, const EvalArgs& args, const ExecPolicy& exec) {
  config.validate();
  const DatasetManifest manifest = read_manifest(args.manifest);
  const auto train_entries = split_entries(manifest, Split::train);
  const auto eval_entries = split_entries(manifest, args.eval_split);
  std::optional<V2Params> params;
  if (args.weights) params = load_checkpoint(*args.weights, expected_shape(config)).params;
  require_fresh_dir(args.out_dir);

  const FeatureTable train = extract_features(manifest, train_entries, config, params, exec);
  const FeatureTable test = args.eval_split == Split::train
                                ? train
                                : extract_features(manifest, eval_entries, config, params, exec);
  std::vector<std::string> fit_labels = train.labels;
  if (args.shuffle_labels_seed) {
    detail::Rng rng(*args.shuffle_labels_seed);
    for (std::size_t i = fit_labels.size(); i > 1; --i) std::swap(fit_labels[i - 1], fit_labels[rng.below(i)]);
  }
  const QdaModel model = fit_qda(train.rows, fit_labels, config.qda);
  const Evaluation eval = evaluate(model, test.rows, test.labels);

  StagedDir staged(args.out_dir);
  const std::string split_name(to_string(args.eval_split));
  train.write_csv(staged.path() / "features_train.csv");
  if (args.eval_split != Split::train) test.write_csv(staged.path() / ("features_" + split_name + ".csv"));
  write_confusion_csv(eval, staged.path() / "confusion.csv");

  const fs::path confusion_final = staged.final_path() / "confusion.csv";
  std::vector<csv::Row> rows{{"split", "class", "accuracy", "count", "confusion_csv"}};
  for (std::size_t k = 0; k < eval.classes.size(); ++k) {
    const auto n = std::accumulate(eval.confusion[k].begin(), eval.confusion[k].end(), std::size_t{0});
    rows.push_back({split_name, eval.classes[k], csv::format_double(eval.per_class_accuracy[k]),
                    std::to_string(n), confusion_final.generic_string()});
  }
  rows.push_back({split_name, "overall", csv::format_double(eval.accuracy), std::to_string(eval.total),
                  confusion_final.generic_string()});
  csv::write_file(staged.path() / "report.csv", rows);
  staged.commit();
  return {eval, staged.final_path() / "report.csv", confusion_final};
}

ScrambleSummary cmd_scramble(const fs::path& in_dir, const fs::path& out_dir, std::uint64_t seed,
                             const ExecPolicy& exec) {
  const DatasetManifest in = read_manifest(in_dir / "manifest.csv");
  if (in.empty()) throw ValidationError("input manifest is empty");
  if (exec.threads < 1) throw ValidationError("threads must be >= 1");
  StagedDir staged(out_dir);

  DatasetManifest out(staged.final_path());
  std::vector<fs::path> rel(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const auto& e = in.entries()[i];
    rel[i] = e.path.is_absolute() ? fs::path(e.label) / e.path.filename() : e.path;
    rel[i].replace_extension(".pgm");
    out.add({rel[i], e.label, e.split});
  }
  std::vector<std::size_t> clamped(in.size(), 0);
  parallel_for(in.size(), exec.threads, [&](std::size_t i) {
    const Image img = load_grayscale(in.resolve(in.entries()[i]));
    const fs::path dst = staged.path() / rel[i];
    std::error_code ec;
    fs::create_directories(dst.parent_path(), ec);
    if (ec) throw IoError("cannot create " + dst.parent_path().string());
    clamped[i] = save_pgm16(phase_scramble(img, detail::derive_seed(seed, i)), dst);
  });
  out.write_csv(staged.path() / "manifest.csv");
  staged.commit();
  return {in.size(), std::accumulate(clamped.begin(), clamped.end(), std::size_t{0}),
          staged.final_path() / "manifest.csv"};
}

RsaSummary cmd_rsa(const RunConfig& config, const RsaArgs& args, const ExecPolicy& exec) {
  config.validate();
  if (!args.neural_as_model && !args.stimuli) throw ValidationError("a stimulus manifest is required");
  std::optional<DatasetManifest> stimuli;
  if (args.stimuli) stimuli = read_manifest(*args.stimuli);
  std::optional<V2Params> params;
  if (args.weights && !args.neural_as_model) {
    params = load_checkpoint(*args.weights, expected_shape(config)).params;
  }
  if (!fs::exists(args.neural_csv)) throw IoError("neural CSV not found: " + args.neural_csv.string());
  const auto records = read_neural_csv(args.neural_csv);
  std::vector<std::string> families;
  if (stimuli) families = stimuli->labels();
  const Rdm neural = rdm(neural_family_responses(records, families));
  require_fresh_dir(args.out_dir);

  Rdm model;
  if (args.neural_as_model) {
    model = neural;
  } else {
    StimulusOptions opts;
    opts.v1 = config.v1;
    opts.exec = exec;
    model = model_family_rdm(*stimuli, params, opts);
  }
  const double rho = spearman_rdm(model, neural);

  StagedDir staged(args.out_dir);
  write_rdm_csv(model, staged.path() / "model_rdm.csv");
  write_rdm_csv(neural, staged.path() / "neural_rdm.csv");
  csv::write_file(staged.path() / "summary.csv",
                  {{"rho", "conditions", "model_rdm", "neural_rdm"},
                   {csv::format_double(rho), std::to_string(neural.size()),
                    (staged.final_path() / "model_rdm.csv").generic_string(),
                    (staged.final_path() / "neural_rdm.csv").generic_string()}});
  staged.commit();
  return {rho, static_cast<std::size_t>(neural.size())};
}

std::uint64_t file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto it = std::istreambuf_iterator<char>(in); it != std::istreambuf_iterator<char>(); ++it) {
    h ^= static_cast<unsigned char>(*it);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace v2tex::cli
