#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "retroclass/classify.hpp"
#include "retroclass/enrich.hpp"

using namespace retroclass;

namespace {

void BM_SoftmaxWeights(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> s(std::size_t(state.range(0)));
  for (auto& x : s) x = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(softmax_weights(s, 0.01));
}
BENCHMARK(BM_SoftmaxWeights)->Arg(10)->Arg(100);

void BM_EnrichQuery(benchmark::State& state) {
  const auto bank = bench::clustered_bank(20000, 512, 64, 2);
  const auto q = bench::query(512, 3);
  EnrichmentConfig config;
  config.k = std::size_t(state.range(0));
  const auto captions = gather_captions(exact_topk(q, bank, config.k), bank);
  for (auto _ : state) benchmark::DoNotOptimize(enrich_query(q.vector, captions, config));
}
BENCHMARK(BM_EnrichQuery)->Arg(10)->Arg(64);

void BM_Classify(benchmark::State& state) {
  const auto protos = bench::clustered_bank(std::size_t(state.range(0)), 512, 16, 4);
  PrototypeSet set;
  set.dim = protos.dim();
  set.matrix.assign(protos.matrix().begin(), protos.matrix().end());
  const auto q = bench::query(512, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(predict_topk(logits(q.vector, set), 5));
  }
}
BENCHMARK(BM_Classify)->Arg(32)->Arg(1000);

}  // namespace
