#include <benchmark/benchmark.h>

#include "ccgate/hilbert.hpp"

using namespace ccgate;
using namespace ccgate::hilbert;

static void BM_Embed(benchmark::State& state) {
  SpaceLayout layout{3, static_cast<int>(state.range(0))};
  const ComplexOperator a = fock_annihilation(layout.n_max);
  for (auto _ : state) {
    auto op = embed(a, SpaceLayout::kSiteMode1, layout);
    benchmark::DoNotOptimize(op.matrix().data());
  }
  state.SetLabel("dim=" + std::to_string(layout.dim()));
}
BENCHMARK(BM_Embed)->Arg(2)->Arg(4)->Arg(6);

static void BM_FidelityTrace(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Vector v = Vector::Zero(n);
  v(0) = 1.0;
  const DensityMatrix rho = DensityMatrix::from_pure(StateVector{v});
  const DensityMatrix sigma = DensityMatrix::from_pure(coherent_state(0.2, n - 1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(fidelity_trace(rho, sigma));
  }
}
BENCHMARK(BM_FidelityTrace)->Arg(25)->Arg(100)->Arg(225);

static void BM_TraceDistance(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Matrix r1 = Matrix::Identity(n, n) / static_cast<double>(n);
  Matrix r2 = r1;
  r2(0, 0) += 0.01;
  r2(1, 1) -= 0.01;
  for (auto _ : state) {
    benchmark::DoNotOptimize(trace_distance(DensityMatrix{r1}, DensityMatrix{r2}));
  }
}
BENCHMARK(BM_TraceDistance)->Arg(25)->Arg(100);
