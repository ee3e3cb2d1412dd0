// Serial reference against the OpenMP element loop for the matrices of the
// flux and Stokes systems on the cube, N = 4.

#include <benchmark/benchmark.h>

#include "hcstokes/assembly.hpp"
#include "hcstokes/mesh.hpp"

using namespace hcstokes;

namespace {

const Mesh& cube_mesh() {
  static const Mesh mesh = generate_mesh(cube_domain(), 4);
  return mesh;
}

Execution exec_of(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::Serial : Execution::Parallel;
}

void label(benchmark::State& state) { state.SetLabel(state.range(0) == 0 ? "serial" : "openmp"); }

void BM_StiffnessP3(benchmark::State& state) {
  const Space v(cube_mesh(), SpaceFamily::Lagrange, 3, 3, Constraint::ZeroBoundary);
  for (auto _ : state) benchmark::DoNotOptimize(assemble_stiffness(v, exec_of(state)));
  label(state);
}

void BM_MassRT1(benchmark::State& state) {
  const Space rt(cube_mesh(), SpaceFamily::RaviartThomas, 1, 3);
  for (auto _ : state) benchmark::DoNotOptimize(assemble_mass(rt, exec_of(state)));
  label(state);
}

void BM_DivRT1(benchmark::State& state) {
  const Space rt(cube_mesh(), SpaceFamily::RaviartThomas, 1, 3);
  const Space x(cube_mesh(), SpaceFamily::DiscontinuousLagrange, 1, 3);
  for (auto _ : state) benchmark::DoNotOptimize(assemble_div_rt(rt, x, exec_of(state)));
  label(state);
}

void BM_DivPressureP2(benchmark::State& state) {
  const Space v(cube_mesh(), SpaceFamily::Lagrange, 2, 3, Constraint::ZeroBoundary);
  const Space q(cube_mesh(), SpaceFamily::DiscontinuousLagrange, 1);
  for (auto _ : state) benchmark::DoNotOptimize(assemble_div_pressure(v, q, exec_of(state)));
  label(state);
}

}  // namespace

BENCHMARK(BM_StiffnessP3)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MassRT1)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DivRT1)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DivPressureP2)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
