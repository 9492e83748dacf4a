#include <benchmark/benchmark.h>

#include <random>

#include "msgaf/experiment.hpp"
#include "msgaf/matrix.hpp"
#include "msgaf/model.hpp"
#include "msgaf/simkit.hpp"
#include "msgaf/training.hpp"

using namespace msgaf;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(r, c);
  for (double& v : m.data()) v = u(rng);
  return m;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const Matrix a = random_matrix(n, n, rng), b = random_matrix(n, n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(128);

void BM_ForwardSample(benchmark::State& state) {
  ModelConfig cfg;
  cfg.nodes = static_cast<std::size_t>(state.range(0));
  const MsgafModel model(cfg, 1);
  std::mt19937_64 rng(2);
  const Matrix x = random_matrix(cfg.nodes, 9, rng);
  Matrix a(cfg.nodes, cfg.nodes, 0.0);
  for (std::size_t i = 0; i + 1 < cfg.nodes; ++i) a(i, i + 1) = 1.0;
  for (auto _ : state) {
    Tape tape;
    const std::vector<Var> leaves = model.params().bind_constant(tape);
    const Forward f = model.forward(model.view(leaves), tape.constant(x), tape.constant(a));
    benchmark::DoNotOptimize(f.latency.value()(0, 0));
  }
}
BENCHMARK(BM_ForwardSample)->Arg(11)->Arg(32);

void BM_TrainStep(benchmark::State& state) {
  simkit::DatasetSpec spec;
  spec.windows = 64;
  const PreparedData data = prepare_data(simkit::generate_dataset(spec), 90);
  MsgafRegressor model(MsgafModel(ModelConfig{}, 1), data.adjacency);
  Adam adam(model.params(), AdamConfig{});
  std::vector<const Example*> batch;
  std::vector<double> targets;
  for (std::size_t i = 0; i < 32; ++i) {
    batch.push_back(&data.examples[i]);
    targets.push_back(data.examples[i].target);
  }
  const LossConfig loss;
  for (auto _ : state) {
    Tape tape;
    const std::vector<Var> leaves = model.params().bind(tape);
    const BatchOutputs out = model.forward_batch(leaves, batch);
    const Var l = total_loss(out.predictions, tape.constant(Matrix::column_vector(targets)), out.expert_outputs, loss);
    tape.backward(l);
    adam.step(model.params(), leaves);
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_OracleLatency(benchmark::State& state) {
  simkit::DatasetSpec spec;
  spec.windows = 1;
  const simkit::Dataset ds = simkit::generate_dataset(spec);
  const auto oracle = simkit::OracleModel::for_topology(ds.topology, 1);
  const auto scenario = simkit::ScenarioSpec::preset(simkit::ScenarioKind::kMixed);
  for (auto _ : state) benchmark::DoNotOptimize(oracle.latency(ds.records[0].state, scenario, 90).latency_ms);
}
BENCHMARK(BM_OracleLatency);

void BM_GenerateDataset(benchmark::State& state) {
  simkit::DatasetSpec spec;
  spec.windows = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(simkit::generate_dataset(spec).records.size());
}
BENCHMARK(BM_GenerateDataset)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
