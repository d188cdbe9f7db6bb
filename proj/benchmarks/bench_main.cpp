#include <benchmark/benchmark.h>

#include <random>

#include "v2tex/classifier.hpp"
#include "v2tex/dataset_io.hpp"
#include "v2tex/objective.hpp"
#include "v2tex/v1_frontend.hpp"
#include "v2tex/v2_stage.hpp"

namespace {

using namespace v2tex;

Image texture(int size) { return synth_texture(0, size, 1); }

void BM_V1Forward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const SteerableConfig config;
  const FilterBank bank(config, size, size);
  const Image img = texture(size);
  for (auto _ : state) benchmark::DoNotOptimize(v1_forward(img, bank));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_V1Forward)->Arg(128)->Arg(224)->Unit(benchmark::kMillisecond);

void BM_V2ForwardEval(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const SteerableConfig config;
  const FilterBank bank(config, size, size);
  const V1Response v1 = v1_forward(texture(size), bank);
  const V2Params params = init_params(1, 60, config.channel_count());
  for (auto _ : state) benchmark::DoNotOptimize(v2_forward_eval(v1, params));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_V2ForwardEval)->Arg(128)->Arg(224)->Unit(benchmark::kMillisecond);

void BM_LossGradient(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  const SteerableConfig config;
  const FilterBank bank(config, 128, 128);
  std::vector<V1Response> data;
  for (int i = 0; i < batch; ++i) data.push_back(v1_forward(synth_texture(i % 4, 128, static_cast<std::uint64_t>(i)), bank));
  const V2Params params = init_params(1, 60, config.channel_count());
  const LossConfig loss;
  for (auto _ : state) benchmark::DoNotOptimize(loss_gradient(params, data, loss, {1, true}));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_LossGradient)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_PhaseScramble(benchmark::State& state) {
  const Image img = texture(static_cast<int>(state.range(0)));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(phase_scramble(img, ++seed));
}
BENCHMARK(BM_PhaseScramble)->Arg(224)->Unit(benchmark::kMillisecond);

void BM_QdaPredict(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  std::vector<std::vector<double>> x;
  std::vector<std::string> y;
  for (int i = 0; i < 400; ++i) {
    std::vector<double> row(60);
    for (double& v : row) v = z(rng) + i % 4;
    x.push_back(std::move(row));
    y.push_back("c" + std::to_string(i % 4));
  }
  const QdaModel model = fit_qda(x, y);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(predict_qda(model, x[i++ % x.size()]));
}
BENCHMARK(BM_QdaPredict);

}  // namespace

BENCHMARK_MAIN();
