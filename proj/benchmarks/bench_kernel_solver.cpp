#include <benchmark/benchmark.h>

#include "kolmo/kernel_solver.hpp"

using namespace kolmo;

namespace {

Eigen::VectorXd vec1(double v) { return Eigen::VectorXd::Constant(1, v); }

void BM_KernelSlice1D(benchmark::State& state) {
    const CoefficientField field = build_example_operator(0, 3, 2, 1);
    const int nx = static_cast<int>(state.range(0));
    const SpaceTimeGrid grid = make_grid(1, 3.3, nx, 0.0, 1.0, nx - 1);
    const SolverConfig cfg;
    for (auto _ : state) {
        KernelSlice slice = solve_kernel_slice(field, 1.0, vec1(0.0), cfg, grid);
        benchmark::DoNotOptimize(slice.values.data());
    }
    state.SetComplexityN(nx);
}
BENCHMARK(BM_KernelSlice1D)->Arg(129)->Arg(257)->Arg(513)->Arg(1025)->Complexity();

void BM_KernelSlice2D(benchmark::State& state) {
    CoefficientField field;
    field.dim = 2;
    field.eta = 1.0;
    field.Q = [](double, const Eigen::VectorXd&) { return Eigen::MatrixXd::Identity(2, 2); };
    field.DQ = [](double, const Eigen::VectorXd&, int) { return Eigen::MatrixXd::Zero(2, 2); };
    field.F = [](double, const Eigen::VectorXd& y) -> Eigen::VectorXd { return -y; };
    field.V = [](double, const Eigen::VectorXd&) { return 0.0; };
    field.potential_is_zero = true;
    const int nx = static_cast<int>(state.range(0));
    const SpaceTimeGrid grid = make_grid(2, 4.0, nx, 0.0, 1.0, 64);
    const SolverConfig cfg;
    for (auto _ : state) {
        KernelSlice slice = solve_kernel_slice(field, 1.0, Eigen::VectorXd::Zero(2), cfg, grid);
        benchmark::DoNotOptimize(slice.values.data());
    }
}
BENCHMARK(BM_KernelSlice2D)->Arg(33)->Arg(65)->Arg(129)->Unit(benchmark::kMillisecond);

void BM_ForwardCauchy1D(benchmark::State& state) {
    const CoefficientField field = build_example_operator(0, 3, 2, 1);
    const SpaceTimeGrid grid = make_grid(1, 3.3, 513, 0.0, 1.0, 512);
    const SolverConfig cfg;
    for (auto _ : state) {
        auto u = solve_cauchy(
            field, [](const Eigen::VectorXd& y) { return std::exp(-y.squaredNorm()); }, 0.3, 1.0,
            cfg, grid);
        benchmark::DoNotOptimize(u.data());
    }
}
BENCHMARK(BM_ForwardCauchy1D);

}  // namespace

BENCHMARK_MAIN();
