#include <benchmark/benchmark.h>

#include <cmath>

#include "speds/cavity.hpp"
#include "speds/correlation.hpp"
#include "speds/dipole.hpp"
#include "speds/multilayer.hpp"
#include "speds/qd_source.hpp"

using namespace speds;

static void BM_StackResponse(benchmark::State& state) {
    auto stack = optics::build_bragg({3.5, 0.0}, {2.95, 0.0}, 900.0, static_cast<int>(state.range(0)));
    stack.exit_index = {1.0, 0.0};
    const auto q = optics::PlaneWaveQuery::at_angle(900.0, 3.5, 0.3, optics::Polarization::TM);
    for (auto _ : state) benchmark::DoNotOptimize(optics::stack_response(stack, q));
}
BENCHMARK(BM_StackResponse)->Arg(1)->Arg(12)->Arg(25);

static void BM_EmissionPattern(benchmark::State& state) {
    cavity::CavityDesign design = cavity::no_cavity_geometry();
    design.bottom_periods = static_cast<int>(state.range(0));
    const auto geometry = cavity::to_geometry(design);
    for (auto _ : state) benchmark::DoNotOptimize(dipole::emission_pattern(geometry, 0.5));
}
BENCHMARK(BM_EmissionPattern)->Arg(0)->Arg(12)->Unit(benchmark::kMillisecond);

static void BM_Simulate(benchmark::State& state) {
    const qd::QDModel model;
    qd::DriveProgram drive;
    drive.duration_ns = 1e6;
    std::uint64_t seed = 1;
    for (auto _ : state) benchmark::DoNotOptimize(qd::simulate(model, drive, seed++));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * drive.periods()));
}
BENCHMARK(BM_Simulate)->Unit(benchmark::kMillisecond);

static void BM_Correlate(benchmark::State& state) {
    qd::QDModel model;
    model.capture_rate_per_ns = 50.0;
    qd::DriveProgram drive;
    drive.duration_ns = 2e6;
    const auto record = qd::simulate(model, drive, 3);
    const std::vector<qd::Line> x{qd::Line::X};
    const auto streams = correlation::detect(record, correlation::DetectorPair{}, x, x, 4);
    for (auto _ : state) benchmark::DoNotOptimize(correlation::correlate(streams, 137.5, 0.125));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * (streams.a.size() + streams.b.size())));
}
BENCHMARK(BM_Correlate)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
