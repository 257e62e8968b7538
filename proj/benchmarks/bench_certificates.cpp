#include <benchmark/benchmark.h>

#include "kolmo/bounds.hpp"
#include "kolmo/cutoff.hpp"
#include "kolmo/weights.hpp"

using namespace kolmo;

namespace {

void BM_TimeDependentCheck(benchmark::State& state) {
    const CoefficientField field = build_example_operator(0, 3, 2, 1);
    const auto w =
        build_time_dependent_w(0, 3, 2, LyapunovCase::DriftDominated, 0.1, 0.2, 2.5, 1.0, 1);
    SampleGrid grid;
    grid.radius = 4.0;
    grid.s_hi = 0.9;
    grid.time_samples = static_cast<int>(state.range(0));
    grid.space_samples_per_axis = 129;
    grid.random_samples = 1000;
    for (auto _ : state) {
        auto report = check_time_dependent(field, w, grid);
        benchmark::DoNotOptimize(report.margin_star);
    }
}
BENCHMARK(BM_TimeDependentCheck)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_WeightConstants(benchmark::State& state) {
    const CoefficientField field = build_example_operator(0, 3, 2, 1);
    const TimeWindow win = make_time_window(0.3, 0.4, 0.6, 0.7, 1.0);
    for (auto _ : state) {
        WeightSystem ws =
            make_weight_system(0, 3, 2, 4.0, 0.1, 0.13, 0.16, 0.2, 2.5, 4.0, win, 1);
        auto diag = compute_weight_constants(field, ws);
        benchmark::DoNotOptimize(diag.scan_radius);
    }
}
BENCHMARK(BM_WeightConstants)->Unit(benchmark::kMillisecond);

void BM_EnvelopeBound(benchmark::State& state) {
    double acc = 0.0;
    double gamma = 0.1;
    for (auto _ : state) {
        gamma = gamma < 6.0 ? gamma + 1e-3 : 0.1;
        acc += envelope_bound(gamma, 0.37, 2.4);
        benchmark::DoNotOptimize(acc);
    }
}
BENCHMARK(BM_EnvelopeBound);

void BM_CutoffBuild(benchmark::State& state) {
    for (auto _ : state) {
        auto profile = build_cutoff_profile(0.05);
        benchmark::DoNotOptimize(profile.verified_max_t_phi_prime);
    }
}
BENCHMARK(BM_CutoffBuild)->Unit(benchmark::kMillisecond);

}  // namespace
