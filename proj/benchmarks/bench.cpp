// Microbenchmarks for the hot paths: frozen forward passes, the training
// loss graph, optimal-transport estimators, and Adam updates.
#include <benchmark/benchmark.h>

#include <numeric>
#include <random>
#include <vector>

#include "v2s/alignment.hpp"
#include "v2s/dataio.hpp"
#include "v2s/optim.hpp"
#include "v2s/reprogram.hpp"
#include "v2s/rng.hpp"
#include "v2s/source_model.hpp"
#include "v2s/tape.hpp"
#include "v2s/tensor.hpp"

using namespace v2s;

namespace {

SourceModel frozen_model(int classes, std::size_t input_len) {
  SourceArchConfig cfg;
  cfg.class_count = classes;
  cfg.input_len = input_len;
  cfg.seed = 1;
  SourceModel m = SourceModel::build(cfg);
  m.freeze();
  return m;
}

Tensor random_cloud(std::size_t n, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-2, 2);
  Tensor t({n, k});
  for (auto& v : t.vec()) v = u(rng);
  return t;
}

Dataset random_target(std::size_t n, std::size_t len) {
  Dataset ds;
  ds.name = "bench";
  ds.length = len;
  ds.class_count = 2;
  Rng rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  for (std::size_t i = 0; i < n; ++i) {
    TimeSeries s;
    s.label = static_cast<int>(i % 2);
    s.values.resize(len);
    for (auto& v : s.values) v = u(rng);
    ds.series.push_back(std::move(s));
  }
  return ds;
}

void BM_source_forward(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const SourceModel model = frozen_model(8, 512);
  const Tensor x = random_cloud(batch, 512, 3);
  for (auto _ : state) benchmark::DoNotOptimize(model.logits(x));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          state.range(0));
}
BENCHMARK(BM_source_forward)->Arg(1)->Arg(32);

void BM_loss_and_gradient(benchmark::State& state) {
  const SourceModel model = frozen_model(8, 512);
  const ReprogramPlan plan = build_plan(512, 64, 3, 0.0, 0.04, 5);
  const LabelMapping mapping = make_label_mapping(8, 2, 5);
  const Dataset ds = random_target(32, 64);
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (auto _ : state) {
    Tape tape;
    const LossGraphIds ids =
        build_v2s_loss_graph(tape, model, plan, mapping, ds, idx, nullptr);
    tape.backward(ids.loss);
    benchmark::DoNotOptimize(tape.grad(ids.theta));
  }
}
BENCHMARK(BM_loss_and_gradient);

void BM_w1_exact(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_cloud(n, 8, 11);
  const Tensor b = random_cloud(n, 8, 13);
  for (auto _ : state) benchmark::DoNotOptimize(w1_exact_oracle(a, b));
}
BENCHMARK(BM_w1_exact)->Arg(64)->Arg(256);

void BM_swd(benchmark::State& state) {
  const auto projections = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_cloud(256, 8, 17);
  const Tensor b = random_cloud(256, 8, 19);
  for (auto _ : state)
    benchmark::DoNotOptimize(swd(a, b, projections, 2.0, 23).value);
}
BENCHMARK(BM_swd)->Arg(100)->Arg(1000);

void BM_adam_step(benchmark::State& state) {
  ParamSet params;
  params.add("theta", Tensor::zeros({512}));
  AdamState adam = make_adam(AdamConfig{}, params);
  Tensor g({512});
  Rng rng(29);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& v : g.vec()) v = u(rng);
  const std::vector<Tensor> grads = {g};
  for (auto _ : state) adam_step(adam, params, grads);
}
BENCHMARK(BM_adam_step);

void BM_transform(benchmark::State& state) {
  const ReprogramPlan plan = build_plan(512, 64, 7, 0.0, 0.04, 31);
  std::vector<double> x(64);
  Rng rng(37);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& v : x) v = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(transform(x, plan));
}
BENCHMARK(BM_transform);

}  // namespace

BENCHMARK_MAIN();
