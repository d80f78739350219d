#include "plastmix/estimator.hpp"
#include "plastmix/study.hpp"

#include <benchmark/benchmark.h>

using namespace plastmix;

namespace {

SaddleSystem strip(int n, int p) {
  const Problem pr = strip_benchmark(n, p);
  return assemble(make_dofmap(pr.mesh), pr.data);
}

void BM_Assemble(benchmark::State& state) {
  const Problem pr = strip_benchmark(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  auto dofs = make_dofmap(pr.mesh);
  for (auto _ : state) benchmark::DoNotOptimize(assemble(dofs, pr.data));
  state.counters["N"] = dofs->num_dofs();
}
BENCHMARK(BM_Assemble)->Args({10, 1})->Args({20, 1})->Args({10, 3})->Unit(benchmark::kMillisecond);

void BM_Uzawa(benchmark::State& state) {
  const SaddleSystem sys = strip(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  SolverConfig cfg;
  int it = 0;
  for (auto _ : state) {
    const SolutionTriple s = solve_uzawa(sys, cfg);
    it = s.iterations;
  }
  state.counters["N"] = sys.dofs->num_dofs();
  state.counters["iterations"] = it;
}
BENCHMARK(BM_Uzawa)->Args({10, 1})->Args({10, 2})->Unit(benchmark::kMillisecond);

void BM_SemismoothNewton(benchmark::State& state) {
  const SaddleSystem sys = strip(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  SolverConfig cfg;
  cfg.algorithm = Algorithm::SemismoothNewton;
  int it = 0;
  for (auto _ : state) {
    const SolutionTriple s = solve_ssn(sys, cfg);
    it = s.iterations;
  }
  state.counters["N"] = sys.dofs->num_dofs();
  state.counters["iterations"] = it;
}
BENCHMARK(BM_SemismoothNewton)->Args({10, 1})->Args({10, 2})->Args({40, 1})->Unit(benchmark::kMillisecond);

void BM_Estimate(benchmark::State& state) {
  const Problem pr = strip_benchmark(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  const SaddleSystem sys = assemble(make_dofmap(pr.mesh), pr.data);
  SolverConfig cfg;
  cfg.algorithm = Algorithm::SemismoothNewton;
  const SolutionTriple s = solve(sys, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(estimate(pr.data, s));
}
BENCHMARK(BM_Estimate)->Args({10, 1})->Args({10, 3})->Unit(benchmark::kMillisecond);

void BM_ProjectOntoLambda(benchmark::State& state) {
  const SaddleSystem sys = strip(static_cast<int>(state.range(0)), 2);
  FieldQ q(sys.dofs, Eigen::VectorXd::Random(sys.dofs->num_q()) * 10.0);
  for (auto _ : state) benchmark::DoNotOptimize(project_onto_lambda(q, 5.0));
  state.SetItemsProcessed(state.iterations() * sys.dofs->num_q() / 2);
}
BENCHMARK(BM_ProjectOntoLambda)->Arg(20)->Arg(80);

void BM_RefineAdaptive(benchmark::State& state) {
  Mesh m = strip_benchmark(10, 1).mesh;
  std::set<int> marked;
  for (int t = 0; t < m.num_elements(); t += 3) marked.insert(t);
  for (auto _ : state) benchmark::DoNotOptimize(refine(m, marked));
}
BENCHMARK(BM_RefineAdaptive)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
