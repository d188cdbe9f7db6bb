#include <doctest.h>

#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "oracles.hpp"
#include "temp_dir.hpp"
#include "commands.hpp"
#include "v2tex/csv.hpp"
#include "v2tex/error.hpp"
#include "v2tex/random.hpp"
#include "v2tex/rsa.hpp"
#include "v2tex/weight_file.hpp"

using namespace v2tex;
using namespace v2tex::cli;
using testing_support::TempDir;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

// Runs the CLI binary with stderr folded into the captured output.
Run run_cli(const std::string& args) {
  const std::string cmd = std::string(V2TEX_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe)) r.out += buf.data();
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

RunConfig small_config(int samples_per_family, std::uint64_t seed = 3) {
  RunConfig c;
  c.seed = seed;
  c.synth.size = 64;
  c.synth.samples_per_family = samples_per_family;
  c.synth.train_fraction = 0.5;
  c.synth.val_fraction = 0.0;
  c.train.batch_size = 8;
  c.train.epochs = 1;
  c.train.learning_rate = 0.01;
  c.model.d = 8;
  c.finalize();
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

const ExecPolicy kExec{1, true};

}  // namespace

TEST_SUITE("run config") {
  TEST_CASE("defaults, comments and overrides") {
    const RunConfig d = parse_run_config("");
    CHECK(d.model.d == 60);
    CHECK(d.train.learning_rate == 0.001);
    CHECK(d.train.batch_size == 275);
    CHECK(d.qda.shrinkage == 0.1);
    CHECK(d.v1.num_scales == 5);

    const RunConfig c = parse_run_config(
        "# comment\n"
        "learning_rate = 0.05   # trailing comment\n"
        "\n"
        "  d=12\n"
        "seed = 77\n"
        "augment_rotations = true\n"
        "gamma = 0.25\n");
    CHECK(c.train.learning_rate == 0.05);
    CHECK(c.model.d == 12);
    CHECK(c.seed == 77);
    CHECK(c.train.seed == 77);
    CHECK(c.synth.seed == 77);
    CHECK(c.train.augment_rotations);
    CHECK(c.qda.shrinkage == 0.25);

    const RunConfig again = parse_run_config(c.to_text());
    CHECK(again.to_text() == c.to_text());
  }

  TEST_CASE("rejects unknown, repeated, malformed and invalid entries") {
    CHECK_THROWS_WITH_AS(parse_run_config("colour = blue\n"), doctest::Contains("colour"), ValidationError);
    CHECK_THROWS_AS(parse_run_config("d = 4\nd = 5\n"), ValidationError);
    CHECK_THROWS_AS(parse_run_config("d 4\n"), ValidationError);
    CHECK_THROWS_AS(parse_run_config("d = four\n"), ValidationError);
    CHECK_THROWS_AS(parse_run_config("d = 4.5\n"), ValidationError);
    CHECK_THROWS_AS(parse_run_config("batch_size = 1\n"), ValidationError);
    CHECK_THROWS_AS(parse_run_config("gamma = 2\n"), ValidationError);
    CHECK_THROWS_AS(parse_run_config("epsilon = 0\n"), ValidationError);
    CHECK_THROWS_AS(parse_run_config("families = 0\n"), ValidationError);
  }
}

TEST_SUITE("synth command") {
  TEST_CASE("default config writes 4 x 100 images; same seed gives the same manifest") {
    TempDir tmp("v2tex_cli");
    RunConfig c;
    c.synth.size = 48;  // the default size only changes pixel counts
    c.finalize();
    const SynthResult a = cmd_synth(c, tmp.path / "a");
    CHECK(a.manifest.size() == 400);
    CHECK(a.manifest.labels().size() == 4);
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(tmp.path / "a"))
      if (e.path().extension() == ".pgm") ++files;
    CHECK(files == 400);
    const SynthResult b = cmd_synth(c, tmp.path / "b");
    CHECK(file_hash(a.manifest_path) == file_hash(b.manifest_path));
    const auto& first = a.manifest.entries().front();
    CHECK(file_hash(a.manifest.resolve(first)) == file_hash(b.manifest.resolve(b.manifest.entries().front())));
  }

  TEST_CASE("refuses a non-empty output directory") {
    TempDir tmp("v2tex_cli");
    fs::create_directories(tmp.path / "busy");
    std::ofstream(tmp.path / "busy" / "keep.txt") << "x";
    CHECK_THROWS_AS(cmd_synth(small_config(2), tmp.path / "busy"), ValidationError);
    CHECK(fs::exists(tmp.path / "busy" / "keep.txt"));
  }

  TEST_CASE("binary: invalid family count fails with a diagnostic and no output") {
    TempDir tmp("v2tex_cli");
    const Run r = run_cli("synth --out " + (tmp.path / "s").string() + " --families 0");
    CHECK(r.code == 1);
    CHECK(r.out.find("error") != std::string::npos);
    CHECK_FALSE(fs::exists(tmp.path / "s"));
    for (const auto& e : fs::directory_iterator(tmp.path)) CHECK(e.path().filename().string().find("partial") == std::string::npos);
  }

  TEST_CASE("binary: success, parse errors and I/O errors map to exit codes") {
    TempDir tmp("v2tex_cli");
    const Run ok = run_cli("synth --out " + (tmp.path / "s").string() +
                           " --samples-per-family 2 --size 48 --seed 4");
    CHECK(ok.code == 0);
    CHECK(fs::exists(tmp.path / "s" / "manifest.csv"));
    CHECK(run_cli("frobnicate").code == 1);
    CHECK(run_cli("synth").code == 1);
    CHECK(run_cli("--help").code == 0);
    const Run missing = run_cli("eval --v1-only --manifest " + (tmp.path / "nope.csv").string() +
                                " --out " + (tmp.path / "e").string());
    CHECK(missing.code == 2);
    const Run both = run_cli("eval --v1-only --weights w.bin --manifest m.csv --out " + (tmp.path / "e").string());
    CHECK(both.code == 1);
    std::ofstream(tmp.path / "bad.cfg") << "nonsense = 1\n";
    const Run bad_cfg = run_cli("--config " + (tmp.path / "bad.cfg").string() + " synth --out " +
                                (tmp.path / "t").string());
    CHECK(bad_cfg.code == 1);
    CHECK(bad_cfg.out.find("nonsense") != std::string::npos);
    CHECK_FALSE(fs::exists(tmp.path / "t"));
  }
}

TEST_SUITE("train command") {
  TEST_CASE("one epoch writes a valid checkpoint and a log row per step; resume continues") {
    TempDir tmp("v2tex_cli");
    const RunConfig c = small_config(8);
    const SynthResult s = cmd_synth(c, tmp.path / "data");
    TrainArgs args;
    args.manifest = s.manifest_path;
    args.weights = tmp.path / "w.bin";
    const TrainSummary first = cmd_train(c, args, kExec);
    CHECK(first.start_step == 0);
    CHECK(first.final_step == 2);  // 16 train images, batches of 8
    const Checkpoint ck = load_checkpoint(args.weights, init_params(0, 8, c.v1.channel_count(), 7, 4));
    CHECK(ck.step == 2);
    CHECK(ck.params.d == 8);
    CHECK(count_lines(first.log) == first.steps + 1);
    CHECK(first.log == fs::path(args.weights.string() + ".log.csv"));

    args.resume = true;
    args.log = tmp.path / "resume.csv";
    const TrainSummary second = cmd_train(c, args, kExec);
    CHECK(second.start_step == 2);
    CHECK(second.final_step == 4);
    CHECK(count_lines(tmp.path / "resume.csv") == 3);
    CHECK(load_checkpoint(args.weights).step == 4);

    // An uninterrupted two-epoch run lands on the same weights.
    RunConfig two = c;
    two.train.epochs = 2;
    TrainArgs fresh;
    fresh.manifest = s.manifest_path;
    fresh.weights = tmp.path / "w2.bin";
    cmd_train(two, fresh, kExec);
    CHECK(load_checkpoint(fresh.weights).params == load_checkpoint(args.weights).params);
  }

  TEST_CASE("resume without a checkpoint and shape mismatches are errors") {
    TempDir tmp("v2tex_cli");
    const RunConfig c = small_config(4);
    const SynthResult s = cmd_synth(c, tmp.path / "data");
    TrainArgs args;
    args.manifest = s.manifest_path;
    args.weights = tmp.path / "none.bin";
    args.resume = true;
    CHECK_THROWS(cmd_train(c, args, kExec));
    CHECK_FALSE(fs::exists(args.weights));

    save_checkpoint(init_params(1, 5, c.v1.channel_count(), 7, 4), tmp.path / "five.bin");
    args.weights = tmp.path / "five.bin";
    CHECK_THROWS_AS(cmd_train(c, args, kExec), ValidationError);
  }
}

TEST_SUITE("eval command") {
  TEST_CASE("report format, shuffled labels near chance, train not far above test") {
    TempDir tmp("v2tex_cli");
    RunConfig c = small_config(150, 9);
    const SynthResult s = cmd_synth(c, tmp.path / "data");

    EvalArgs args;
    args.manifest = s.manifest_path;
    args.out_dir = tmp.path / "v1";
    const EvalReport v1 = cmd_eval(c, args, kExec);
    CHECK(v1.eval.total == 300);
    const auto rows = csv::read_file(v1.report_csv);
    REQUIRE(rows.size() == 6);
    CHECK(rows[0] == csv::Row{"split", "class", "accuracy", "count", "confusion_csv"});
    CHECK(rows[5][1] == "overall");
    for (std::size_t r = 1; r < rows.size(); ++r) {
      CHECK(rows[r][0] == "test");
      CHECK(fs::path(rows[r][4]) == v1.confusion_csv);
    }
    CHECK(fs::exists(v1.confusion_csv));
    CHECK(fs::exists(tmp.path / "v1" / "features_train.csv"));
    CHECK(fs::exists(tmp.path / "v1" / "features_test.csv"));
    CHECK(FeatureTable::read_csv(tmp.path / "v1" / "features_test.csv").dim() == 60);

    args.out_dir = tmp.path / "shuffled";
    args.shuffle_labels_seed = 12;
    const EvalReport shuffled = cmd_eval(c, args, kExec);
    MESSAGE("v1 " << v1.eval.accuracy << " shuffled " << shuffled.eval.accuracy);
    CHECK(std::abs(shuffled.eval.accuracy - 0.25) <= 0.05);

    args.shuffle_labels_seed.reset();
    args.eval_split = Split::train;
    args.out_dir = tmp.path / "train_split";
    const EvalReport on_train = cmd_eval(c, args, kExec);
    CHECK(on_train.eval.accuracy >= v1.eval.accuracy - 0.15);
    CHECK_FALSE(fs::exists(tmp.path / "train_split" / "features_test.csv"));
  }

  TEST_CASE("trained weights and validation before output") {
    TempDir tmp("v2tex_cli");
    RunConfig c = small_config(10, 5);
    const SynthResult s = cmd_synth(c, tmp.path / "data");
    TrainArgs t;
    t.manifest = s.manifest_path;
    t.weights = tmp.path / "w.bin";
    cmd_train(c, t, kExec);

    EvalArgs args;
    args.manifest = s.manifest_path;
    args.weights = t.weights;
    args.out_dir = tmp.path / "out";
    const EvalReport r = cmd_eval(c, args, kExec);
    CHECK(r.eval.total == 20);
    CHECK(FeatureTable::read_csv(tmp.path / "out" / "features_train.csv").dim() == 8);

    RunConfig wrong = c;
    wrong.model.d = 9;
    args.out_dir = tmp.path / "wrong";
    CHECK_THROWS_AS(cmd_eval(wrong, args, kExec), ValidationError);
    CHECK_FALSE(fs::exists(tmp.path / "wrong"));
  }
}

TEST_SUITE("scramble command") {
  TEST_CASE("same count, preserved spectra, deterministic") {
    TempDir tmp("v2tex_cli");
    const RunConfig c = small_config(3);
    const SynthResult s = cmd_synth(c, tmp.path / "data");
    const ScrambleSummary a = cmd_scramble(tmp.path / "data", tmp.path / "a", 21, kExec);
    const ScrambleSummary b = cmd_scramble(tmp.path / "data", tmp.path / "b", 21, kExec);
    CHECK(a.images == s.manifest.size());
    const DatasetManifest out = DatasetManifest::read_csv(a.manifest_path);
    REQUIRE(out.size() == s.manifest.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      const auto& e_in = s.manifest.entries()[i];
      const auto& e_out = out.entries()[i];
      CHECK(e_out.label == e_in.label);
      CHECK(e_out.split == e_in.split);
      CHECK(file_hash(out.resolve(e_out)) ==
            file_hash(DatasetManifest::read_csv(b.manifest_path).resolve(e_out)));

      const Image in = load_grayscale(s.manifest.resolve(e_in));
      const Image got = load_grayscale(out.resolve(e_out));
      const Image want = phase_scramble(in, detail::derive_seed(21, i));
      // Equal to the in-memory scramble up to 16-bit quantization and clamping.
      double worst = 0.0;
      for (std::size_t k = 0; k < got.size(); ++k) {
        const double w = std::clamp(want.pixels()[k], 0.0, 1.0);
        worst = std::max(worst, std::abs(got.pixels()[k] - w));
      }
      CHECK(worst <= 0.5 / 65535.0 + 1e-12);
      if (a.clamped_pixels == 0) {
        const auto fin = oracle::dft2(in);
        const auto fout = oracle::dft2(got);
        const double bound = static_cast<double>(in.size()) * 0.5 / 65535.0;
        for (std::size_t k = 0; k < fin.size(); ++k) CHECK(std::abs(std::abs(fin[k]) - std::abs(fout[k])) <= bound);
      }
    }
    const ScrambleSummary other = cmd_scramble(tmp.path / "data", tmp.path / "c", 22, kExec);
    const DatasetManifest oc = DatasetManifest::read_csv(other.manifest_path);
    CHECK(file_hash(oc.resolve(oc.entries()[0])) != file_hash(out.resolve(out.entries()[0])));
  }
}

TEST_SUITE("rsa command") {
  void write_neural(const fs::path& path, const std::vector<std::string>& families, int units) {
    std::mt19937_64 rng(2);
    std::poisson_distribution<int> counts(6.0);
    std::ofstream out(path);
    out << "unit_id,stimulus_id,family,spike_count\n";
    for (int u = 0; u < units; ++u)
      for (std::size_t f = 0; f < families.size(); ++f)
        for (int s = 0; s < 2; ++s)
          out << "u" << u << ",s" << f << "_" << s << "," << families[f] << "," << counts(rng) + static_cast<int>(f * u % 5)
              << "\n";
  }

  TEST_CASE("neural against itself gives rho 1 and writes all outputs") {
    TempDir tmp("v2tex_cli");
    write_neural(tmp.path / "n.csv", {"a", "b", "c", "d"}, 12);
    RsaArgs args;
    args.neural_csv = tmp.path / "n.csv";
    args.out_dir = tmp.path / "out";
    args.neural_as_model = true;
    const RsaSummary r = cmd_rsa(small_config(2), args, kExec);
    CHECK(r.rho == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r.conditions == 4);
    CHECK(fs::exists(tmp.path / "out" / "model_rdm.csv"));
    CHECK(fs::exists(tmp.path / "out" / "neural_rdm.csv"));
    const auto rows = csv::read_file(tmp.path / "out" / "summary.csv");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0][0] == "rho");
  }

  TEST_CASE("model side from stimuli; missing families are named") {
    TempDir tmp("v2tex_cli");
    const RunConfig c = small_config(2);
    const SynthResult s = cmd_synth(c, tmp.path / "stim");
    const auto fams = s.manifest.labels();
    write_neural(tmp.path / "n.csv", fams, 10);
    RsaArgs args;
    args.stimuli = s.manifest_path;
    args.neural_csv = tmp.path / "n.csv";
    args.out_dir = tmp.path / "out";
    const RsaSummary r = cmd_rsa(c, args, kExec);
    CHECK(r.conditions == 4);
    CHECK(r.rho >= -1.0);
    CHECK(r.rho <= 1.0);
    CHECK(read_rdm_csv(tmp.path / "out" / "model_rdm.csv").conditions == fams);

    write_neural(tmp.path / "short.csv", {fams[0], fams[1], fams[2]}, 10);
    args.neural_csv = tmp.path / "short.csv";
    args.out_dir = tmp.path / "out2";
    CHECK_THROWS_WITH_AS(cmd_rsa(c, args, kExec), doctest::Contains(fams[3].c_str()), ValidationError);
    CHECK_FALSE(fs::exists(tmp.path / "out2"));

    const Run bin = run_cli("rsa --v1-only --stimuli " + s.manifest_path.string() + " --neural " +
                            (tmp.path / "short.csv").string() + " --out " + (tmp.path / "out3").string());
    CHECK(bin.code == 1);
    CHECK_MESSAGE(bin.out.find(fams[3]) != std::string::npos, bin.out);
  }
}
