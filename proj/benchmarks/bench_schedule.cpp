#include <benchmark/benchmark.h>

#include <random>

#include "detmac/schedule.hpp"

using namespace detmac;
using namespace detmac::schedule;

namespace {

ScheduleCycle make_cycle(int n_max, int stars)
{
    ScheduleConfig cfg;
    cfg.n_max = n_max;
    ScheduleCycle c(timing::SuperframeConfig{}, cfg);
    for (int s = 1; s <= stars; ++s) {
        const auto star = StarId{static_cast<std::uint32_t>(s)};
        c.register_star(star);
        for (int n = 0; n < 16; ++n)
            c.register_node(DeviceId{static_cast<std::uint32_t>(s * 100 + n)}, star);
        for (int o = 1; o < s; ++o)
            c.add_interference(star, StarId{static_cast<std::uint32_t>(o)});
    }
    return c;
}

// Random admit/release churn; Arg is the number of mutually interfering stars.
void BM_AdmitReleaseChurn(benchmark::State& state)
{
    const int stars = static_cast<int>(state.range(0));
    auto c = make_cycle(4, stars);
    std::mt19937_64 rng(1);
    std::int64_t granted_count = 0;
    for (auto _ : state) {
        if (!c.allocations().empty() && rng() % 3 == 0) {
            c.release(c.allocations()[rng() % c.allocations().size()].id,
                      ReleaseReason::NodeRequest);
            continue;
        }
        const auto s = static_cast<std::uint32_t>(1 + rng() % static_cast<std::uint64_t>(stars));
        const auto r = c.admit({Kind::Gts, DeviceId{s * 100 + static_cast<std::uint32_t>(rng() % 16)},
                                StarId{s}, ReservationLevel{static_cast<int>(rng() % 5)},
                                Direction::Uplink});
        granted_count += granted(r) ? 1 : 0;
    }
    state.counters["granted"] = benchmark::Counter(static_cast<double>(granted_count),
                                                   benchmark::Counter::kAvgIterations);
}
BENCHMARK(BM_AdmitReleaseChurn)->Arg(1)->Arg(4)->Arg(16);

// Expansion of a full cycle into the occupancy map.
void BM_Occupancy(benchmark::State& state)
{
    const int n_max = static_cast<int>(state.range(0));
    auto c = make_cycle(n_max, 4);
    std::mt19937_64 rng(2);
    for (int i = 0; i < 400; ++i) {
        const auto s = static_cast<std::uint32_t>(1 + rng() % 4);
        c.admit({Kind::Gts, DeviceId{s * 100 + static_cast<std::uint32_t>(rng() % 16)}, StarId{s},
                 ReservationLevel{static_cast<int>(rng() % static_cast<std::uint64_t>(n_max + 1))},
                 Direction::Uplink});
    }
    for (auto _ : state)
        benchmark::DoNotOptimize(count_double_occupied(occupancy(c)));
    state.counters["allocations"] = static_cast<double>(c.allocations().size());
}
BENCHMARK(BM_Occupancy)->Arg(2)->Arg(4)->Arg(6);

} // namespace
