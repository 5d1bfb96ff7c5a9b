#include <benchmark/benchmark.h>

#include <random>

#include "detmac/simcore.hpp"

using namespace detmac;
using namespace detmac::sim;

namespace {

// Fill the queue with N random-time events, then drain it.
void BM_EventQueueFillDrain(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(1);
    for (auto _ : state) {
        EventQueue q;
        for (std::size_t i = 0; i < n; ++i)
            q.schedule(SimTime{static_cast<std::int64_t>(rng() % (n * 10))}, DeviceId{1},
                       EventKind::Timer);
        std::uint64_t sum = 0;
        q.run_until(SimTime{static_cast<std::int64_t>(n * 10)},
                    [&](const SimEvent& e) { sum += e.ordinal; });
        benchmark::DoNotOptimize(sum);
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_EventQueueFillDrain)->Arg(1 << 10)->Arg(1 << 16)->Arg(1 << 20)->Unit(benchmark::kMillisecond);

// Steady-state hold model: each event schedules one successor.
void BM_EventQueueHold(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0));
    EventQueue q;
    RngStream rng(1, 0);
    for (std::size_t i = 0; i < n; ++i)
        q.schedule(SimTime{static_cast<std::int64_t>(rng.uniform(0, 1000))}, DeviceId{1},
                   EventKind::Timer);
    for (auto _ : state) {
        const SimTime until = q.now() + SimTime{1};
        q.run_until(until, [&](const SimEvent& e) {
            q.schedule(e.time + SimTime{static_cast<std::int64_t>(1 + rng.uniform(0, 1000))},
                       e.target, EventKind::Timer);
        });
    }
}
BENCHMARK(BM_EventQueueHold)->Arg(64)->Arg(4096);

// Collision bookkeeping in a dense cell.
void BM_MediumOverlaps(benchmark::State& state)
{
    const auto devices = static_cast<std::size_t>(state.range(0));
    Medium m(devices);
    for (std::size_t a = 0; a < devices; ++a)
        for (std::size_t b = a + 1; b < devices; ++b)
            m.connect(DeviceId{static_cast<std::uint32_t>(a)}, DeviceId{static_cast<std::uint32_t>(b)});
    std::int64_t t = 0;
    for (auto _ : state) {
        const auto x = m.begin_tx(DeviceId{0}, SimTime{t}, SimTime{t + 100});
        const auto y = m.begin_tx(DeviceId{1}, SimTime{t + 50}, SimTime{t + 150});
        benchmark::DoNotOptimize(m.end_tx(x));
        benchmark::DoNotOptimize(m.end_tx(y));
        t += 200;
    }
}
BENCHMARK(BM_MediumOverlaps)->Arg(8)->Arg(64);

} // namespace
