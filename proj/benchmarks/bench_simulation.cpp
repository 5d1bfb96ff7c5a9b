#include <benchmark/benchmark.h>

#include "detmac/experiments.hpp"

using namespace detmac::harness;

namespace {

// One point of the contention sweep; Arg is the number of CAP contenders.
void BM_Fig7Point(benchmark::State& state)
{
    const int contenders = static_cast<int>(state.range(0));
    std::uint64_t events = 0;
    for (auto _ : state) {
        const auto s = fig7_scenario(contenders, 1);
        const auto r = run_scenario(s);
        events = r.global.events;
        benchmark::DoNotOptimize(r.flows.data());
    }
    state.counters["events"] = static_cast<double>(events);
    state.counters["events_per_s"] =
        benchmark::Counter(static_cast<double>(events), benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_Fig7Point)->Arg(0)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

// One acknowledged point of the single-GTS sweep; Arg is the beacon order.
void BM_Fig6Point(benchmark::State& state)
{
    const int bo = static_cast<int>(state.range(0));
    const int psdu = fig6_best_psdu(bo, true, fig6_phy());
    for (auto _ : state) {
        const auto r = run_scenario(fig6_scenario(bo, true, psdu, 1));
        benchmark::DoNotOptimize(r.flows.data());
    }
}
BENCHMARK(BM_Fig6Point)->Arg(2)->Arg(8)->Unit(benchmark::kMillisecond);

} // namespace
