#include <benchmark/benchmark.h>

#include "equigrasp/so3.hpp"

using namespace equigrasp;

static void BM_ShBasis(benchmark::State& state) {
  const int L = static_cast<int>(state.range(0));
  Rng rng(7);
  Eigen::Vector3d u(0.3, -0.5, 0.81);
  u.normalize();
  for (auto _ : state) {
    benchmark::DoNotOptimize(sh_basis(u, L));
  }
}
BENCHMARK(BM_ShBasis)->Arg(2)->Arg(3);

BENCHMARK_MAIN();
