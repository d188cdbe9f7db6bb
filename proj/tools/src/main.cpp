#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "v2tex/error.hpp"

namespace {

using namespace v2tex;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> families;
  std::optional<int> samples_per_family;
  std::optional<int> image_size;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<double> learning_rate;
  std::optional<double> lambda;
};

RunConfig build_config(const std::string& path, const Overrides& o) {
  RunConfig c = path.empty() ? RunConfig{} : load_run_config(path);
  if (o.seed) c.seed = *o.seed;
  if (o.families) c.synth.families = *o.families;
  if (o.samples_per_family) c.synth.samples_per_family = *o.samples_per_family;
  if (o.image_size) c.synth.size = *o.image_size;
  if (o.epochs) c.train.epochs = *o.epochs;
  if (o.batch_size) c.train.batch_size = *o.batch_size;
  if (o.learning_rate) c.train.learning_rate = *o.learning_rate;
  if (o.lambda) c.train.lambda = *o.lambda;
  c.finalize();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"V1/V2 texture model: synthetic data, training, evaluation and RSA"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  ExecPolicy exec;
  exec.deterministic = false;
  Overrides ov;
  app.add_option("--config", config_path, "run configuration file (key = value)");
  app.add_option("--threads", exec.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--deterministic", exec.deterministic, "fixed-order reductions");
  app.add_option("--seed", ov.seed, "random seed (overrides config)");

  auto* synth = app.add_subcommand("synth", "write the synthetic texture set");
  std::string synth_out;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--families", ov.families);
  synth->add_option("--samples-per-family", ov.samples_per_family);
  synth->add_option("--size", ov.image_size);

  auto* train = app.add_subcommand("train", "self-supervised training of the V2 stage");
  cli::TrainArgs train_args;
  std::string train_log;
  train->add_option("--manifest", train_args.manifest, "dataset manifest CSV")->required();
  train->add_option("--weights", train_args.weights, "output weight file")->required();
  train->add_option("--log", train_log, "training log CSV (default <weights>.log.csv)");
  train->add_flag("--resume", train_args.resume, "continue from the existing weight file");
  train->add_option("--epochs", ov.epochs);
  train->add_option("--batch-size", ov.batch_size);
  train->add_option("--lr", ov.learning_rate);
  train->add_option("--lambda", ov.lambda);
  train->add_option("--size", ov.image_size);

  auto* eval = app.add_subcommand("eval", "GAP features + QDA accuracy");
  cli::EvalArgs eval_args;
  std::string eval_weights, eval_split = "test";
  std::optional<std::uint64_t> shuffle_seed;
  bool eval_v1_only = false;
  eval->add_option("--weights", eval_weights, "trained weight file");
  eval->add_flag("--v1-only", eval_v1_only, "use V1 features instead of a trained model");
  eval->add_option("--manifest", eval_args.manifest)->required();
  eval->add_option("--out", eval_args.out_dir, "output directory")->required();
  eval->add_option("--split", eval_split, "split to evaluate (train, val, test)");
  eval->add_option("--shuffle-labels", shuffle_seed, "shuffle training labels with this seed");
  eval->add_option("--size", ov.image_size);

  auto* scramble = app.add_subcommand("scramble", "phase-scramble a dataset");
  std::string scramble_in, scramble_out;
  std::uint64_t scramble_seed = 0;
  scramble->add_option("--in", scramble_in, "input directory with manifest.csv")->required();
  scramble->add_option("--out", scramble_out, "output directory")->required();
  scramble->add_option("--scramble-seed", scramble_seed, "seed for the random phases");

  auto* rsa = app.add_subcommand("rsa", "compare model and neural dissimilarity matrices");
  cli::RsaArgs rsa_args;
  std::string rsa_weights, rsa_stimuli;
  bool rsa_v1_only = false;
  rsa->add_option("--weights", rsa_weights, "trained weight file");
  rsa->add_flag("--v1-only", rsa_v1_only, "use V1 features instead of a trained model");
  rsa->add_option("--stimuli", rsa_stimuli, "stimulus manifest CSV");
  rsa->add_option("--neural", rsa_args.neural_csv, "neural CSV")->required();
  rsa->add_option("--out", rsa_args.out_dir, "output directory")->required();
  rsa->add_flag("--neural-as-model", rsa_args.neural_as_model, "use the neural RDM on the model side");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const RunConfig config = build_config(config_path, ov);
    if (*synth) {
      const auto r = cli::cmd_synth(config, synth_out);
      std::cout << "wrote " << r.manifest.size() << " images; manifest " << r.manifest_path.string() << "\n";
    } else if (*train) {
      if (!train_log.empty()) train_args.log = train_log;
      const auto r = cli::cmd_train(config, train_args, exec);
      std::cout << "trained steps " << r.start_step << " -> " << r.final_step << "; log "
                << r.log.string() << "\n";
    } else if (*eval) {
      if (eval_weights.empty() == !eval_v1_only) {
        throw ValidationError("eval needs exactly one of --weights or --v1-only");
      }
      if (!eval_weights.empty()) eval_args.weights = eval_weights;
      eval_args.eval_split = parse_split(eval_split);
      eval_args.shuffle_labels_seed = shuffle_seed;
      const auto r = cli::cmd_eval(config, eval_args, exec);
      std::cout << "accuracy " << r.eval.accuracy << " (" << r.eval.total << " images); report "
                << r.report_csv.string() << "\n";
    } else if (*scramble) {
      const auto r = cli::cmd_scramble(scramble_in, scramble_out, scramble_seed, exec);
      std::cout << "scrambled " << r.images << " images";
      if (r.clamped_pixels) std::cout << " (" << r.clamped_pixels << " pixels clamped to [0,1])";
      std::cout << "\n";
    } else if (*rsa) {
      if (!rsa_args.neural_as_model && rsa_weights.empty() == !rsa_v1_only) {
        throw ValidationError("rsa needs exactly one of --weights or --v1-only");
      }
      if (!rsa_weights.empty()) rsa_args.weights = rsa_weights;
      if (!rsa_stimuli.empty()) rsa_args.stimuli = rsa_stimuli;
      const auto r = cli::cmd_rsa(config, rsa_args, exec);
      std::cout << "rho " << r.rho << " over " << r.conditions << " conditions\n";
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
