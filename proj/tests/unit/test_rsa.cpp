#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "temp_dir.hpp"
#include "v2tex/error.hpp"
#include "v2tex/rsa.hpp"

using namespace v2tex;
using testing_support::TempDir;

namespace {

ResponseMatrix random_matrix(std::mt19937_64& rng, int rows, int cols) {
  ResponseMatrix m;
  m.values.resize(rows, cols);
  std::normal_distribution<double> z;
  for (int i = 0; i < rows; ++i) {
    m.conditions.push_back("c" + std::to_string(i));
    for (int j = 0; j < cols; ++j) m.values(i, j) = z(rng);
  }
  return m;
}

Rdm from_upper(const std::vector<double>& upper, int n) {
  Rdm r;
  r.values = Eigen::MatrixXd::Zero(n, n);
  std::size_t k = 0;
  for (int i = 0; i < n; ++i) {
    r.conditions.push_back("c" + std::to_string(i));
    for (int j = i + 1; j < n; ++j) r.values(i, j) = r.values(j, i) = upper[k++];
  }
  return r;
}

std::vector<double> upper(const Rdm& r) {
  std::vector<double> out;
  for (int i = 0; i < r.size(); ++i)
    for (int j = i + 1; j < r.size(); ++j) out.push_back(r.values(i, j));
  return out;
}

}  // namespace

TEST_SUITE("gaussianize_counts") {
  TEST_CASE("values, monotonicity and errors") {
    CHECK(gaussianize_counts(0.0) == 1.0);
    CHECK(gaussianize_counts(4.0) == doctest::Approx(2.0 + std::sqrt(5.0)).epsilon(1e-15));
    CHECK(gaussianize_counts(4.0) == doctest::Approx(4.23607).epsilon(1e-6));
    for (int r = 0; r < 1000; ++r) CHECK(gaussianize_counts(r + 1) > gaussianize_counts(r));
    CHECK_THROWS_AS(gaussianize_counts(-1.0), ValidationError);
    CHECK_THROWS_AS(gaussianize_counts(NAN), ValidationError);
  }
}

TEST_SUITE("family_average") {
  TEST_CASE("means, identity and errors") {
    Eigen::MatrixXd s(3, 2);
    s << 1, 2, 3, 4, 7, 7;
    const std::vector<std::string> groups{"x", "x", "y"};
    const std::vector<std::string> fams{"y", "x"};
    const ResponseMatrix m = family_average(s, groups, fams);
    CHECK(m.conditions == fams);
    CHECK(m.values(0, 0) == 7.0);
    CHECK(m.values(1, 0) == 2.0);
    CHECK(m.values(1, 1) == 3.0);

    const std::vector<std::string> ids{"a", "b", "c"};
    CHECK(family_average(s, ids, ids).values == s);

    Eigen::MatrixXd twin(2, 3);
    twin << 0.1, 0.2, 0.3, 0.1, 0.2, 0.3;
    const std::vector<std::string> same{"f", "f"};
    const std::vector<std::string> one{"f"};
    CHECK(family_average(twin, same, one).values.row(0) == twin.row(0));

    const std::vector<std::string> extra{"x", "y", "z"};
    CHECK_THROWS_AS(family_average(s, groups, extra), ValidationError);
    const std::vector<std::string> missing{"x"};
    CHECK_THROWS_AS(family_average(s, groups, missing), ValidationError);
  }
}

TEST_SUITE("rdm") {
  TEST_CASE("hand-built correlations 1, 0 and -1") {
    ResponseMatrix m;
    m.conditions = {"a", "b", "c", "d"};
    m.values.resize(4, 4);
    m.values << 1, -1, 1, -1,   // a
        2, -2, 2, -2,           // b: correlation 1 with a
        1, 1, -1, -1,           // c: correlation 0 with a
        -1, 1, -1, 1;           // d: correlation -1 with a
    const Rdm r = rdm(m);
    CHECK(r.values(0, 1) == doctest::Approx(0.0).scale(1e-15));
    CHECK(r.values(0, 2) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r.values(0, 3) == doctest::Approx(2.0).epsilon(1e-15));
    for (int i = 0; i < 4; ++i) CHECK(r.values(i, i) == 0.0);
    CHECK(r.conditions == m.conditions);
  }

  TEST_CASE("anticorrelated reflection gives 2") {
    std::mt19937_64 rng(1);
    ResponseMatrix m = random_matrix(rng, 2, 9);
    const double mean = m.values.row(0).mean();
    m.values.row(1) = (-(m.values.row(0).array() - mean) + mean).matrix();
    CHECK(rdm(m).values(0, 1) == doctest::Approx(2.0).epsilon(1e-14));
  }

  TEST_CASE("invariants on random matrices") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.1, 5.0);
    for (int trial = 0; trial < 20; ++trial) {
      ResponseMatrix m = random_matrix(rng, 6, 12);
      const Rdm r = rdm(m);
      for (int i = 0; i < 6; ++i) {
        CHECK(r.values(i, i) == 0.0);
        for (int j = 0; j < 6; ++j) {
          CHECK(std::abs(r.values(i, j) - r.values(j, i)) <= 1e-12);
          CHECK(r.values(i, j) >= 0.0);
          CHECK(r.values(i, j) <= 2.0);
          if (i != j) {
            std::vector<double> ri, rj;
            for (int k = 0; k < 12; ++k) {
              ri.push_back(m.values(i, k));
              rj.push_back(m.values(j, k));
            }
            CHECK(r.values(i, j) == doctest::Approx(1.0 - oracle::pearson(ri, rj)).epsilon(1e-12));
          }
        }
      }
      ResponseMatrix affine = m;
      for (int i = 0; i < 6; ++i) affine.values.row(i) = (m.values.row(i).array() * u(rng) + (u(rng) - 2.5)).matrix();
      CHECK((rdm(affine).values - r.values).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }

  TEST_CASE("errors") {
    ResponseMatrix flat;
    flat.conditions = {"a", "b"};
    flat.values.resize(2, 3);
    flat.values << 1, 2, 3, 5, 5, 5;
    CHECK_THROWS_AS(rdm(flat), ValidationError);
    ResponseMatrix single;
    single.conditions = {"a"};
    single.values.resize(1, 3);
    single.values << 1, 2, 3;
    CHECK_THROWS_AS(rdm(single), ValidationError);
  }
}

TEST_SUITE("spearman_rdm") {
  TEST_CASE("hand examples") {
    const Rdm a = from_upper({1, 2, 3}, 3);
    const Rdm b = from_upper({3, 2, 1}, 3);
    CHECK(spearman_rdm(a, a) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(spearman_rdm(a, b) == doctest::Approx(-1.0).epsilon(1e-15));
    const Rdm tied = from_upper({1, 1, 2, 3, 3, 4}, 4);
    const Rdm other = from_upper({2, 1, 3, 4, 6, 5}, 4);
    CHECK(spearman_rdm(tied, other) ==
          doctest::Approx(oracle::spearman(upper(tied), upper(other))).epsilon(1e-12));
  }

  TEST_CASE("monotone transforms, symmetry and agreement with the oracle") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      const Rdm a = rdm(random_matrix(rng, 7, 10));
      const Rdm b = rdm(random_matrix(rng, 7, 10));
      Rdm cubed = a;
      cubed.values = a.values.array().cube();
      Rdm logged = a;
      logged.values = (a.values.array() + 1.0).log();
      CHECK(spearman_rdm(a, cubed) == 1.0);
      CHECK(spearman_rdm(cubed, b) == spearman_rdm(a, b));
      CHECK(spearman_rdm(logged, b) == spearman_rdm(a, b));
      CHECK(spearman_rdm(a, b) == spearman_rdm(b, a));
      CHECK(spearman_rdm(a, b) == doctest::Approx(oracle::spearman(upper(a), upper(b))).epsilon(1e-12));
      const double rho = spearman_rdm(a, b);
      CHECK(rho >= -1.0);
      CHECK(rho <= 1.0);
    }
  }

  TEST_CASE("label-shuffled responses are uncorrelated on average") {
    std::mt19937_64 rng(4);
    const int families = 15, per_family = 4, units = 30;
    Eigen::MatrixXd family_means = random_matrix(rng, families, units).values * 2.0;
    Eigen::MatrixXd samples(families * per_family, units);
    std::vector<std::string> groups, names;
    std::normal_distribution<double> z;
    for (int f = 0; f < families; ++f) {
      names.push_back("f" + std::to_string(f));
      for (int s = 0; s < per_family; ++s) {
        const int row = f * per_family + s;
        for (int u = 0; u < units; ++u) samples(row, u) = family_means(f, u) + z(rng);
        groups.push_back(names.back());
      }
    }
    const Rdm fixed = rdm(family_average(samples, groups, names));
    double sum = 0.0;
    for (int k = 0; k < 200; ++k) {
      std::vector<std::string> shuffled = groups;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      sum += spearman_rdm(fixed, rdm(family_average(samples, shuffled, names)));
    }
    const double mean = sum / 200.0;
    MESSAGE("mean shuffled rho " << mean);
    CHECK(mean >= -0.1);
    CHECK(mean <= 0.1);
  }

  TEST_CASE("errors") {
    CHECK_THROWS_AS(spearman_rdm(from_upper({1, 2, 3}, 3), from_upper({1, 2, 3, 4, 5, 6}, 4)), ValidationError);
    CHECK_THROWS_AS(spearman_rdm(from_upper({1}, 2), from_upper({1}, 2)), ValidationError);
    CHECK_THROWS_AS(spearman_rdm(from_upper({1, 1, 1}, 3), from_upper({1, 2, 3}, 3)), ValidationError);
  }

  TEST_CASE("permute reorders rows and columns together") {
    std::mt19937_64 rng(5);
    const Rdm a = rdm(random_matrix(rng, 5, 8));
    const std::vector<int> order{3, 0, 4, 1, 2};
    const Rdm p = permute(a, order);
    for (int i = 0; i < 5; ++i) {
      CHECK(p.conditions[static_cast<std::size_t>(i)] == a.conditions[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
      for (int j = 0; j < 5; ++j)
        CHECK(p.values(i, j) == a.values(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]));
    }
    const std::vector<int> bad{0, 0, 1, 2, 3};
    CHECK_THROWS_AS(permute(a, bad), ValidationError);
  }
}

TEST_SUITE("neural data") {
  TEST_CASE("gaussianize before averaging, per family and unit") {
    const std::vector<NeuralRecord> recs{
        {"u1", "s1", "A", 0.0}, {"u1", "s2", "A", 4.0}, {"u1", "s3", "B", 1.0},
        {"u2", "s1", "A", 2.0}, {"u2", "s2", "A", 2.0}, {"u2", "s3", "B", 9.0},
    };
    const ResponseMatrix m = neural_family_responses(recs);
    CHECK(m.conditions == std::vector<std::string>{"A", "B"});
    REQUIRE(m.values.cols() == 2);
    CHECK(m.values(0, 0) == doctest::Approx((1.0 + 2.0 + std::sqrt(5.0)) / 2.0));
    CHECK(m.values(1, 0) == doctest::Approx(1.0 + std::sqrt(2.0)));
    CHECK(m.values(0, 1) == doctest::Approx(std::sqrt(2.0) + std::sqrt(3.0)));
    CHECK(m.values(1, 1) == doctest::Approx(3.0 + std::sqrt(10.0)));

    const std::vector<std::string> want{"B", "A"};
    CHECK(neural_family_responses(recs, want).conditions == want);
    const std::vector<std::string> absent{"A", "Q"};
    CHECK_THROWS_WITH_AS(neural_family_responses(recs, absent), doctest::Contains("Q"), ValidationError);

    std::vector<NeuralRecord> gap = recs;
    gap.pop_back();
    CHECK_THROWS_WITH_AS(neural_family_responses(gap), doctest::Contains("u2"), ValidationError);
  }

  TEST_CASE("CSV ingestion") {
    TempDir tmp("v2tex_rsa");
    {
      std::ofstream out(tmp.path / "n.csv");
      out << "unit_id,stimulus_id,family,spike_count\nu1,s1,A,3\nu1,s2,B,0\n";
    }
    const auto recs = read_neural_csv(tmp.path / "n.csv");
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].unit_id == "u1");
    CHECK(recs[0].family == "A");
    CHECK(recs[0].spike_count == 3.0);
    {
      std::ofstream out(tmp.path / "bad.csv");
      out << "unit_id,stimulus_id,family,spike_count\nu1,s1,A,-2\n";
    }
    CHECK_THROWS_AS(read_neural_csv(tmp.path / "bad.csv"), ValidationError);
    {
      std::ofstream out(tmp.path / "hdr.csv");
      out << "unit,stimulus,family,count\n";
    }
    CHECK_THROWS(read_neural_csv(tmp.path / "hdr.csv"));
  }

  TEST_CASE("RDM CSV round trip") {
    TempDir tmp("v2tex_rsa");
    std::mt19937_64 rng(6);
    const Rdm a = rdm(random_matrix(rng, 4, 6));
    write_rdm_csv(a, tmp.path / "r.csv");
    const Rdm b = read_rdm_csv(tmp.path / "r.csv");
    CHECK(b.conditions == a.conditions);
    CHECK(b.values == a.values);
  }
}

TEST_SUITE("model_family_rdm") {
  struct Stimuli {
    TempDir tmp{"v2tex_rsa_stim"};
    DatasetManifest manifest;
  };

  void write_stimuli(Stimuli& s, const std::vector<std::string>& family_names, bool identical) {
    s.manifest = DatasetManifest(s.tmp.path);
    for (std::size_t f = 0; f < family_names.size(); ++f) {
      for (int k = 0; k < 2; ++k) {
        const std::string name = family_names[f] + "_" + std::to_string(k) + ".pgm";
        const int kind = identical ? 0 : static_cast<int>(f);
        save_pgm16(synth_texture(kind, 64, identical ? 1 : 10 * f + static_cast<std::size_t>(k)), s.tmp.path / name);
        s.manifest.add({name, family_names[f], Split::test});
      }
    }
  }

  TEST_CASE("zero diagonal and label permutation covariance") {
    StimulusOptions o;
    o.size = 64;
    const V2Params p = init_params(3, 8, o.v1.channel_count(), 7, 4);
    Stimuli a;
    write_stimuli(a, {"a", "b", "c", "d"}, false);
    const Rdm base = model_family_rdm(a.manifest, p, o);
    CHECK(base.conditions == std::vector<std::string>{"a", "b", "c", "d"});
    for (int i = 0; i < 4; ++i) CHECK(base.values(i, i) == 0.0);

    // Renaming families reorders the sorted conditions.
    Stimuli b;
    write_stimuli(b, {"w", "z", "x", "y"}, false);
    const Rdm renamed = model_family_rdm(b.manifest, p, o);
    CHECK(renamed.conditions == std::vector<std::string>{"w", "x", "y", "z"});
    const std::vector<int> order{0, 2, 3, 1};
    const Rdm expected = permute(base, order);
    CHECK((renamed.values - expected.values).cwiseAbs().maxCoeff() < 1e-12);

    const Rdm v1_only = model_family_rdm(a.manifest, std::nullopt, o);
    CHECK(v1_only.size() == 4);
  }

  TEST_CASE("identical stimuli are degenerate") {
    StimulusOptions o;
    o.size = 64;
    Stimuli s;
    write_stimuli(s, {"a", "b", "c"}, true);
    const V2Params p = init_params(3, 8, o.v1.channel_count(), 7, 4);
    CHECK_THROWS_AS(model_family_rdm(s.manifest, p, o), ValidationError);
  }
}
