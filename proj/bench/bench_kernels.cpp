// Serial reference kernels against their OpenMP versions. The OpenMP
// benchmarks take the worker count as their argument.

#include <benchmark/benchmark.h>

#include <numeric>

#include "uap/dataset.hpp"
#include "uap/kernels.hpp"
#include "uap/model.hpp"

using namespace uap;

namespace {

struct Fixture {
  Dataset data;
  std::vector<SampleView> xs;
  ModelParams params;
  std::vector<FeatureMap> features;
  std::vector<int> targets;
  std::vector<std::size_t> batch;

  Fixture() {
    SynthConfig sc;
    sc.per_class = 40;
    data = synth_dataset(sc);
    xs = views(data.train);
    params = init_params(architecture_compact(), frontend_model_a(), toy_labels(4), 1);
    features = kernels::serial::extract_features(*frontend_for(params.frontend), xs);
    for (const auto& w : data.train) targets.push_back(params.class_index(*w.label));
    batch.resize(xs.size());
    std::iota(batch.begin(), batch.end(), 0);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void set_jobs(benchmark::State& state) { kernels::set_jobs(static_cast<int>(state.range(0))); }

void BM_FeaturesSerial(benchmark::State& state) {
  const auto& f = fixture();
  const auto fe = frontend_for(f.params.frontend);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::extract_features(*fe, f.xs));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.xs.size()));
}

void BM_FeaturesOmp(benchmark::State& state) {
  const auto& f = fixture();
  const auto fe = frontend_for(f.params.frontend);
  set_jobs(state);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::omp::extract_features(*fe, f.xs));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.xs.size()));
}

void BM_PredictSerial(benchmark::State& state) {
  const auto& f = fixture();
  const WaveformModel m(f.params);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::predict_labels(m, f.xs, {}));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.xs.size()));
}

void BM_PredictOmp(benchmark::State& state) {
  const auto& f = fixture();
  const WaveformModel m(f.params);
  set_jobs(state);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::omp::predict_labels(m, f.xs, {}));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.xs.size()));
}

void BM_GradientSerial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        kernels::serial::batch_gradient(f.params, f.features, f.targets, f.batch));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.batch.size()));
}

void BM_GradientOmp(benchmark::State& state) {
  const auto& f = fixture();
  set_jobs(state);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::omp::batch_gradient(f.params, f.features, f.targets, f.batch));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.batch.size()));
}

}  // namespace

BENCHMARK(BM_FeaturesSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_FeaturesOmp)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_PredictSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_PredictOmp)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_GradientSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_GradientOmp)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
