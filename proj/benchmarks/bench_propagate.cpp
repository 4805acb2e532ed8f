#include <benchmark/benchmark.h>

#include "ccgate/dynamics.hpp"
#include "ccgate/experiment.hpp"

using namespace ccgate;
using model::GateModel;

namespace {

experiment::PlannedCurve planned_curve(int index) {
  return experiment::plan_fidelity_curve(experiment::preset("fig3"),
                                         experiment::fig3_curves()[index]);
}

}  // namespace

static void BM_StatePropagation(benchmark::State& state) {
  const auto pc = planned_curve(1);
  const auto c = model::effective_couplings(pc.params);
  const hilbert::SpaceLayout layout{2, static_cast<int>(state.range(0))};
  const auto h = dynamics::build_hamiltonian(GateModel::effective, pc.params, c, layout);

  dynamics::PropagationConfig cfg;
  cfg.dt_ps = dynamics::suggested_dt(h, 0.1);
  cfg.t_final_ps = 100.0 * cfg.dt_ps;
  cfg.sample_stride = 1 << 20;
  Vector v = Vector::Zero(layout.dim());
  v(layout.index(1, 1, 0, 0)) = 1.0;
  for (auto _ : state) {
    auto series = dynamics::propagate_state(h, hilbert::StateVector{v}, cfg);
    benchmark::DoNotOptimize(series.states.back().data());
  }
  state.SetItemsProcessed(state.iterations() * 100);  // RK4 steps
}
BENCHMARK(BM_StatePropagation)->Arg(4)->Arg(6);

static void BM_LindbladPropagation(benchmark::State& state) {
  auto pc = planned_curve(1);
  pc.params.gamma_a = pc.params.gamma_b = 0.01 * pc.params.g_a;
  const auto c = model::effective_couplings(pc.params);
  const hilbert::SpaceLayout layout{2, static_cast<int>(state.range(0))};
  const auto h = dynamics::build_hamiltonian(GateModel::effective, pc.params, c, layout);
  const auto collapse =
      model::collapse_operators(pc.params, layout, model::CollapseBasis::bare);

  dynamics::PropagationConfig cfg;
  cfg.dt_ps = dynamics::suggested_dt(h, 0.1);
  cfg.t_final_ps = 20.0 * cfg.dt_ps;
  cfg.sample_stride = 1 << 20;
  Vector v = Vector::Zero(layout.dim());
  v(layout.index(1, 1, 0, 0)) = 1.0;
  const hilbert::DensityMatrix rho0{v * v.adjoint()};
  for (auto _ : state) {
    auto series = dynamics::propagate_lindblad(h, collapse, rho0, cfg);
    benchmark::DoNotOptimize(series.rhos.back().data());
  }
  state.SetItemsProcessed(state.iterations() * 20);
}
BENCHMARK(BM_LindbladPropagation)->Arg(4)->Arg(6);

static void BM_ScheduleClosedForms(benchmark::State& state) {
  const auto p = experiment::preset("fig3");
  for (auto _ : state) {
    const auto c = model::effective_couplings(p);
    benchmark::DoNotOptimize(phases::make_schedule(c).Theta);
  }
}
BENCHMARK(BM_ScheduleClosedForms);

BENCHMARK_MAIN();
