// Normal-equation assembly: serial reference vs OpenMP kernel vs dense J^T J.

#include "pstraj/estimator.hpp"
#include "pstraj/kernels.hpp"
#include "pstraj/scenario.hpp"

#include <benchmark/benchmark.h>

#include <memory>

namespace {

using namespace pstraj;

struct Fixture {
  std::unique_ptr<EstimationProblem> problem;
  LinearizedObjective lin;
};

Fixture make_fixture(int degree) {
  const Scenario scenario = desk_scenario();
  const GroundTruth truth = simulate_truth(scenario);
  auto model = std::make_shared<QuadrotorModel>(scenario.params);
  Fixture f;
  f.problem = std::make_unique<EstimationProblem>(make_grid(degree, 0.0, scenario.duration_s),
                                                  model);
  f.problem->measurements = synth_measurements(truth, scenario);
  f.problem->rig = scenario.rig;
  const Eigen::MatrixXd X = sample_function(
      f.problem->grid, [&](double t) { return truth.state_at(t); });
  const Eigen::MatrixXd U = sample_function(
      f.problem->grid, [&](double t) { return truth.control_at(t); });
  ObjectiveEvaluator evaluator(*f.problem, X, U, true);
  f.lin = evaluator.linearize(X, U, false);
  return f;
}

void BM_AssembleSerial(benchmark::State& state) {
  const Fixture f = make_fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        kernels::assemble_normal_equations_serial(f.lin.blocks, f.problem->layout()));
  }
}

void BM_AssembleOmp(benchmark::State& state) {
  const Fixture f = make_fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        kernels::assemble_normal_equations_omp(f.lin.blocks, f.problem->layout()));
  }
}

void BM_AssembleDense(benchmark::State& state) {
  const Fixture f = make_fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        kernels::assemble_normal_equations_dense(f.lin.blocks, f.problem->layout()));
  }
}

}  // namespace

BENCHMARK(BM_AssembleSerial)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AssembleOmp)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AssembleDense)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
