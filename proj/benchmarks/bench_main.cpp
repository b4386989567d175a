#include <benchmark/benchmark.h>

#include <map>

#include "dampopt/bench.hpp"
#include "dampopt/linf.hpp"
#include "dampopt/rom.hpp"

namespace {

using namespace dampopt;

const AffineClosedLoop& loop_of(Index n) {
  static std::map<Index, AffineClosedLoop> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    OscillatorSpec spec;
    spec.n = n;
    it = cache.emplace(n, assemble_closed_loop(build_oscillator(spec))).first;
  }
  return it->second;
}

Vec mid_gains() {
  Vec g(2);
  g << 100.0, 100.0;
  return g;
}

void BM_TransferSample(benchmark::State& state) {
  const AffineClosedLoop& acl = loop_of(state.range(0));
  const Vec g = mid_gains();
  double w = 1.0;
  for (auto _ : state) {
    auto s = eval_sample(acl, g, w);
    benchmark::DoNotOptimize(s.sigma);
    w += 1e-6;  // defeat any memoization
  }
}
BENCHMARK(BM_TransferSample)->Arg(50)->Arg(150)->Unit(benchmark::kMillisecond);

void BM_DenseNorm(benchmark::State& state) {
  const AffineClosedLoop& acl = loop_of(state.range(0));
  const Vec g = mid_gains();
  for (auto _ : state) {
    auto nr = linf_dense(acl.first_order_E(), acl.first_order_A(g),
                         acl.first_order_B(), acl.first_order_C());
    benchmark::DoNotOptimize(nr.value);
  }
}
BENCHMARK(BM_DenseNorm)->Arg(30)->Arg(50)->Arg(80)->Unit(benchmark::kMillisecond);

void BM_ReducedNorm(benchmark::State& state) {
  const AffineClosedLoop& acl = loop_of(50);
  const Vec g = mid_gains();
  ProjectionBasisPair bases;
  for (double w : {0.5, 1.0, 2.0, 3.5, 5.0})
    expand(bases, acl, g, w, DirectionMode::tangential);
  for (auto _ : state) {
    auto rom = reduce(acl, bases);
    auto nr = linf_dense(rom, g);
    benchmark::DoNotOptimize(nr.value);
  }
}
BENCHMARK(BM_ReducedNorm)->Unit(benchmark::kMillisecond);

void BM_GreedyNorm(benchmark::State& state) {
  const AffineClosedLoop& acl = loop_of(state.range(0));
  const Vec g = mid_gains();
  for (auto _ : state) {
    auto nr = hinf_greedy(acl, g, {0.5, 2.0, 5.0});
    benchmark::DoNotOptimize(nr.value);
  }
}
BENCHMARK(BM_GreedyNorm)->Arg(50)->Arg(150)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
