#include <gtest/gtest.h>

#include <sstream>

#include "detmac/csv.hpp"
#include "detmac/simulation.hpp"
#include "oracle.hpp"

using namespace detmac;
using namespace detmac::harness;

namespace {

Scenario parse(const std::string& text)
{
    std::istringstream in(text);
    auto r = parse_scenario(in);
    if (!r.ok())
        throw std::runtime_error(r.errors.front().message);
    return r.scenario;
}

Scenario load(const char* name)
{
    auto r = parse_scenario_file(std::string(DETMAC_TEST_DATA) + "/" + name);
    if (!r.ok())
        throw std::runtime_error(r.errors.front().message);
    return r.scenario;
}

const char* kMixed = R"(
[pan]
name = mixed
bo = 3
so = 3
duration = 96
seed = 5

[star 1]
gbs_level = 0

[node 2]
star = 1
[node 3]
star = 1
[node 4]
star = 1
[node 5]
star = 1
[node 6]
star = 1

[flow 1]
src = 2
dst = 1
psdu = 100
level = 0

[flow 2]
src = 3
dst = 1
psdu = 100
level = 1

[flow 3]
src = 1
dst = 4
psdu = 60
level = 2

[flow 4]
src = 5
dst = 1
mode = cap

[flow 5]
src = 6
dst = 1
mode = cap
acked = no
psdu = 40
)";

} // namespace

TEST(Simulation, AckedFramesAreConserved)
{
    const auto r = run_scenario(parse(kMixed));
    for (const auto& m : r.flows) {
        if (m.flow_id == 5) {
            EXPECT_LE(m.delivered, m.sent);
            continue;
        }
        EXPECT_EQ(m.sent, m.delivered + m.dropped + m.in_flight) << "flow " << m.flow_id;
        EXPECT_GT(m.delivered, 0u) << "flow " << m.flow_id;
    }
}

TEST(Simulation, DataStaysInsideItsSlots)
{
    const auto r = run_scenario(parse(kMixed));
    EXPECT_EQ(r.global.slot_violations, 0u);
    EXPECT_EQ(r.global.tx_conflicts, 0u);
    EXPECT_EQ(r.global.reserved_slot_collisions, 0u);
}

TEST(Simulation, ReservedTrafficMatchesSlotCapacity)
{
    const auto s = parse(kMixed);
    const auto r = run_scenario(s);
    const double bi = static_cast<double>(oracle::beacon_interval_us(3));
    const int k100 = oracle::frames_per_slot(100, true, 3);
    const int k60 = oracle::frames_per_slot(60, true, 3);
    EXPECT_DOUBLE_EQ(r.flow(1)->throughput_bps, k100 * 100 * 8 * 1e6 / bi);
    EXPECT_DOUBLE_EQ(r.flow(2)->throughput_bps, k100 * 100 * 8 * 1e6 / bi / 2);
    EXPECT_DOUBLE_EQ(r.flow(3)->throughput_bps, k60 * 60 * 8 * 1e6 / bi / 4);
    EXPECT_EQ(r.flow(1)->dropped, 0u);
    EXPECT_EQ(r.flow(1)->collisions, 0u);
}

TEST(Simulation, HalfRateLevelHalvesThroughput)
{
    const auto r = run_scenario(parse(kMixed));
    EXPECT_DOUBLE_EQ(r.flow(2)->throughput_bps * 2, r.flow(1)->throughput_bps);
}

TEST(Simulation, GtsIsUnaffectedByContention)
{
    auto quiet = parse(kMixed);
    quiet.flows.erase(quiet.flows.begin() + 3, quiet.flows.end());
    const auto a = run_scenario(quiet);
    const auto b = run_scenario(parse(kMixed));
    for (std::uint32_t id : {1u, 2u, 3u}) {
        EXPECT_EQ(a.flow(id)->delivered, b.flow(id)->delivered);
        EXPECT_EQ(a.flow(id)->max_latency_us, b.flow(id)->max_latency_us);
    }
}

TEST(Simulation, NoFlowsNoTraffic)
{
    auto s = parse("[pan]\nduration = 32\n[star 1]\n[node 2]\nstar = 1\n");
    const auto r = run_scenario(s);
    EXPECT_TRUE(r.flows.empty());
    EXPECT_EQ(r.global.collisions, 0u);
    EXPECT_EQ(r.global.superframes, 32);
    // Beacons and the superbeacon are the only transmissions.
    EXPECT_GT(r.global.transmissions, 0u);
}

TEST(Simulation, InvalidScenarioThrows)
{
    EXPECT_THROW(run_scenario(load("invalid.scn")), ScenarioError);
}

TEST(Simulation, OversubscribedFlowsAreRefusedAtSetup)
{
    const auto r = run_scenario(load("oversubscribed.scn"));
    ASSERT_EQ(r.setup_refusals.size(), 2u);
    EXPECT_EQ(r.flow(8)->delivered, 0u);
    EXPECT_EQ(r.global.slot_violations, 0u);
}

TEST(Simulation, NonInterferingStarsShareSlots)
{
    const auto s = load("spatial_reuse.scn");
    const auto r = run_scenario(s);
    ASSERT_EQ(r.initial_allocations.size(), 4u);
    EXPECT_EQ(r.flow(1)->throughput_bps, r.flow(2)->throughput_bps);
    EXPECT_GT(r.flow(1)->throughput_bps, 0.0);
    EXPECT_EQ(r.global.reserved_slot_collisions, 0u);
}

TEST(Simulation, DynamicRequestIsGranted)
{
    const auto r = run_scenario(load("dynamic_request.scn"));
    ASSERT_EQ(r.requests.size(), 1u);
    EXPECT_TRUE(r.requests[0].granted);
    ASSERT_TRUE(r.requests[0].decided.has_value());
    EXPECT_GT(r.flow(1)->delivered, 0u);
    EXPECT_EQ(r.global.slot_violations, 0u);
}

TEST(Simulation, IdleLeaseIsRevoked)
{
    auto s = parse(kMixed);
    s.flows[0].stop = 20;
    s.schedule.inactivity_threshold = 2;
    const auto r = run_scenario(s);
    EXPECT_GE(r.global.revocations, 1u);
    EXPECT_LT(r.final_allocations.size(), r.initial_allocations.size());
}

TEST(Simulation, GbsKeepsHiddenBeaconsApart)
{
    auto s = load("hidden_coordinator.scn");
    const auto with = run_scenario(s);
    EXPECT_EQ(with.global.beacon_collisions, 0u);
    EXPECT_EQ(with.global.missed_beacons, 0u);
    s.mac.gbs_enabled = false;
    const auto without = run_scenario(s);
    EXPECT_GT(without.global.beacon_collisions, 0u);
    EXPECT_GT(without.global.beacon_collisions_at.at(DeviceId{3}), 0u);
}

TEST(Simulation, PdsJoinIsExactUnderLoad)
{
    const auto s = load("pds_association.scn");
    const auto r = run_scenario(s);
    const auto* pds = r.association(DeviceId{2});
    ASSERT_NE(pds, nullptr);
    ASSERT_TRUE(pds->associated);
    EXPECT_EQ(pds->attempts, 1);
    EXPECT_EQ(pds->failures, 0);
    const schedule::Allocation* slot = nullptr;
    for (const auto& a : r.initial_allocations)
        if (a.kind == schedule::Kind::Pds && a.owner == DeviceId{2})
            slot = &a;
    ASSERT_NE(slot, nullptr);
    const std::int64_t start = slot->phase * oracle::beacon_interval_us(3) +
                               slot->slot * oracle::slot_us(3);
    EXPECT_EQ(pds->access_time->count(), start);
    EXPECT_EQ(pds->completed->count(),
              start + oracle::airtime_us(10) + 192 + oracle::airtime_us(5));
    bool contention_hurt = false;
    for (const auto& a : r.associations)
        if (a.join == protocol::JoinMode::Contention)
            contention_hurt = contention_hurt || a.failures > 0 || !a.associated;
    EXPECT_TRUE(contention_hurt);
    EXPECT_EQ(r.global.slot_violations, 0u);
}

TEST(Simulation, SameSeedSameBytes)
{
    auto run = [](const Scenario& s) {
        std::ostringstream trace, csv;
        const auto r = run_scenario(s, &trace);
        write_csv(csv, csv_rows(s, r));
        return trace.str() + csv.str();
    };
    const auto s = parse(kMixed);
    EXPECT_EQ(run(s), run(s));
    auto other = s;
    other.seed = 6;
    EXPECT_NE(run(s), run(other));
}

TEST(Simulation, TraceLinesHaveEightFields)
{
    std::ostringstream trace;
    run_scenario(parse(kMixed), &trace);
    std::istringstream in(trace.str());
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        std::istringstream f(line);
        std::string w, outcome;
        int fields = 0;
        while (f >> w) {
            ++fields;
            outcome = w;
        }
        ASSERT_EQ(fields, 8) << line;
        ASSERT_TRUE(outcome == "ok" || outcome == "collision" || outcome == "dropped") << line;
        ++lines;
    }
    EXPECT_GT(lines, 100);
}
