#include <benchmark/benchmark.h>

#include <numeric>

#include "pamacf/gaussian.hpp"
#include "pamacf/metrics.hpp"
#include "pamacf/synthetic.hpp"
#include "pamacf/training.hpp"

namespace {

using namespace pamacf;

const InteractionDataset& bench_data() {
  static const InteractionDataset ds = [] {
    SyntheticConfig sc;
    sc.n_users = 2000;
    sc.n_items = 3000;
    sc.mean_interactions = 40;
    return make_two_cluster(sc);
  }();
  return ds;
}

const EmbeddingModel& bench_model() {
  static const EmbeddingModel m = init_embeddings(bench_data().n_users, bench_data().n_items, 64, 7);
  return m;
}

void BM_RankUsers(benchmark::State& state) {
  const auto& ds = bench_data();
  for (auto _ : state) benchmark::DoNotOptimize(rank_users(bench_model(), ds, 20, ds.n_users));
}

void BM_RankUsersSerial(benchmark::State& state) {
  const auto& ds = bench_data();
  for (auto _ : state) benchmark::DoNotOptimize(rank_users_serial(bench_model(), ds, 20, ds.n_users));
}

std::vector<BprTriple> bench_batch() {
  Rng rng = make_rng(11, 0);
  auto triples = epoch_triples(bench_data(), rng);
  triples.resize(4096);
  return triples;
}

TrainConfig bench_train_config() {
  TrainConfig cfg;
  cfg.mode = TrainMode::pamacf;
  cfg.pretrain_epochs = 0;
  cfg.dim = 64;
  return cfg;
}

void BM_BatchGradient(benchmark::State& state) {
  const auto batch = bench_batch();
  const auto cfg = bench_train_config();
  const EpochContext ctx{1, mean_user_norm(bench_model())};
  for (auto _ : state) benchmark::DoNotOptimize(batch_gradient(bench_model(), batch, cfg, ctx));
}

void BM_BatchGradientSerial(benchmark::State& state) {
  const auto batch = bench_batch();
  const auto cfg = bench_train_config();
  const EpochContext ctx{1, mean_user_norm(bench_model())};
  for (auto _ : state) benchmark::DoNotOptimize(batch_gradient_serial(bench_model(), batch, cfg, ctx));
}

theory::GaussianConfig bench_gaussian() {
  theory::GaussianConfig cfg;
  cfg.n = 1000;
  cfg.d = 32;
  cfg.mc_samples = 4000;
  cfg.epsilon = 1.0;
  return cfg;
}

void BM_SimulateErrors(benchmark::State& state) {
  const auto cfg = bench_gaussian();
  const auto probe = theory::make_probe(cfg, theory::ProbePolicy::boundary);
  for (auto _ : state) benchmark::DoNotOptimize(theory::simulate_errors(cfg, probe, std::nullopt));
}

void BM_SimulateErrorsSerial(benchmark::State& state) {
  const auto cfg = bench_gaussian();
  const auto probe = theory::make_probe(cfg, theory::ProbePolicy::boundary);
  for (auto _ : state) benchmark::DoNotOptimize(theory::simulate_errors_serial(cfg, probe, std::nullopt));
}

}  // namespace

BENCHMARK(BM_RankUsers)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_RankUsersSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_BatchGradient)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_BatchGradientSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_SimulateErrors)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_SimulateErrorsSerial)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
