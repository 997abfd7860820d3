#include <benchmark/benchmark.h>

#include <mtnetkit/rng.hpp>
#include <mtnetkit/tensor.hpp>

using namespace mtnet;

static void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = rng.uniform_tensor({n, n}, -1, 1), b = rng.uniform_tensor({n, n}, -1, 1);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256)->Arg(1024);

static void BM_Conv(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const Tensor x = rng.uniform_tensor({16, size, size}, -1, 1);
  const Tensor k = rng.uniform_tensor({32, 16, 4, 4}, -1, 1);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, k, 1, 2));
}
BENCHMARK(BM_Conv)->Arg(64)->Arg(128);

static void BM_Softmax(benchmark::State& state) {
  Rng rng(3);
  const Tensor x = rng.uniform_tensor({1024, 256}, -4, 4);
  for (auto _ : state) benchmark::DoNotOptimize(scaled_softmax_lastdim(x, 0.125));
}
BENCHMARK(BM_Softmax);

BENCHMARK_MAIN();
