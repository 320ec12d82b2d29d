#include <benchmark/benchmark.h>

#include <map>

#include "bench_common.hpp"

using namespace retroclass;

namespace {

const EmbeddingBank& cached_bank(std::size_t rows, std::size_t dim) {
  static std::map<std::pair<std::size_t, std::size_t>, EmbeddingBank> banks;
  auto it = banks.find({rows, dim});
  if (it == banks.end()) {
    it = banks.emplace(std::pair{rows, dim}, bench::clustered_bank(rows, dim, 256, 1)).first;
  }
  return it->second;
}

void BM_ExactTopK(benchmark::State& state) {
  const auto& bank = cached_bank(std::size_t(state.range(0)), std::size_t(state.range(1)));
  const auto q = bench::query(bank.dim(), 2);
  for (auto _ : state) benchmark::DoNotOptimize(exact_topk(q, bank, 10));
  state.SetBytesProcessed(std::int64_t(state.iterations()) * std::int64_t(bank.matrix().size_bytes()));
}
BENCHMARK(BM_ExactTopK)->Args({100000, 128})->Args({100000, 512})->Args({200000, 512})
    ->Unit(benchmark::kMillisecond);

void BM_IvfSearch(benchmark::State& state) {
  const auto& bank = cached_bank(200000, 256);
  static const auto index = build_ivf(bank, {.n_clusters = 256, .seed = 3, .max_iters = 10});
  const auto q = bench::query(bank.dim(), 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ivf_search(index, q, 10, std::size_t(state.range(0))));
  }
}
BENCHMARK(BM_IvfSearch)->Arg(4)->Arg(16)->Arg(64)->Unit(benchmark::kMicrosecond);

void BM_BuildIvf(benchmark::State& state) {
  const auto& bank = cached_bank(50000, 128);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        build_ivf(bank, {.n_clusters = std::size_t(state.range(0)), .seed = 5, .max_iters = 10}));
  }
}
BENCHMARK(BM_BuildIvf)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond)->Iterations(1);

}  // namespace
