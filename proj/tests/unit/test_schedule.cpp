#include <gtest/gtest.h>

#include <random>
#include <sstream>
#include <stdexcept>

#include "detmac/schedule.hpp"
#include "oracle.hpp"

using namespace detmac;
using namespace detmac::schedule;

namespace {

ScheduleCycle make_cycle(int n_max = 4, int max_gts = 7)
{
    ScheduleConfig cfg;
    cfg.n_max = n_max;
    cfg.max_gts_per_superframe = max_gts;
    ScheduleCycle c(timing::SuperframeConfig{}, cfg);
    c.register_star(StarId{1});
    c.register_star(StarId{2});
    for (std::uint32_t n = 10; n < 20; ++n)
        c.register_node(DeviceId{n}, StarId{1});
    for (std::uint32_t n = 20; n < 30; ++n)
        c.register_node(DeviceId{n}, StarId{2});
    return c;
}

AdmissionRequest gts(std::uint32_t owner, std::uint32_t star, int level)
{
    return AdmissionRequest{Kind::Gts, DeviceId{owner}, StarId{star}, ReservationLevel{level},
                            Direction::Uplink};
}

Allocation alloc(std::uint32_t star, int slot, int level, int phase)
{
    Allocation a;
    a.star = StarId{star};
    a.slot = slot;
    a.level = ReservationLevel{level};
    a.phase = phase;
    return a;
}

} // namespace

TEST(Schedule, OccursInFollowsCongruence)
{
    const auto a = alloc(1, 9, 2, 3);
    for (std::int64_t i = 0; i < 64; ++i)
        EXPECT_EQ(occurs_in(a, i), i % 4 == 3);
}

TEST(Schedule, LevelOccupiesFractionOfHorizon)
{
    for (int n_max = 0; n_max <= 6; ++n_max) {
        for (int n = 0; n <= n_max; ++n) {
            for (int p = 0; p < (1 << n); ++p) {
                const auto a = alloc(1, 9, n, p);
                int count = 0;
                for (std::int64_t i = 0; i < (std::int64_t{1} << n_max); ++i)
                    count += occurs_in(a, i) ? 1 : 0;
                EXPECT_EQ(count, 1 << (n_max - n));
            }
        }
    }
}

TEST(Schedule, ConflictsMatchesCellOracleExhaustively)
{
    // Every (slot, level, phase) pair for two stars, with and without an
    // interference edge.
    std::vector<Allocation> all;
    for (std::uint32_t star : {1u, 2u})
        for (int slot = 9; slot < 16; ++slot)
            for (int n = 0; n <= 4; ++n)
                for (int p = 0; p < (1 << n); ++p)
                    all.push_back(alloc(star, slot, n, p));

    for (bool linked : {false, true}) {
        InterferenceGraph g;
        oracle::Edges edges;
        if (linked) {
            g.add(StarId{1}, StarId{2});
            edges.insert({1, 2});
        }
        for (const auto& a : all)
            for (const auto& b : all)
                ASSERT_EQ(conflicts(a, b, g), oracle::clash(a, b, edges, 4));
    }
}

TEST(Schedule, InterferenceIsSymmetricAndReflexive)
{
    InterferenceGraph g;
    EXPECT_TRUE(g.interferes(StarId{3}, StarId{3}));
    EXPECT_FALSE(g.interferes(StarId{3}, StarId{4}));
    g.add(StarId{4}, StarId{3});
    EXPECT_TRUE(g.interferes(StarId{3}, StarId{4}));
    EXPECT_TRUE(g.interferes(StarId{4}, StarId{3}));
}

TEST(Schedule, AdmitsLowestSlotThenPhase)
{
    auto c = make_cycle();
    auto r1 = c.admit(gts(10, 1, 1));
    ASSERT_TRUE(granted(r1));
    EXPECT_EQ(std::get<Allocation>(r1).slot, 9);
    EXPECT_EQ(std::get<Allocation>(r1).phase, 0);
    auto r2 = c.admit(gts(11, 1, 1));
    ASSERT_TRUE(granted(r2));
    EXPECT_EQ(std::get<Allocation>(r2).slot, 9);
    EXPECT_EQ(std::get<Allocation>(r2).phase, 1);
    auto r3 = c.admit(gts(12, 1, 0));
    ASSERT_TRUE(granted(r3));
    EXPECT_EQ(std::get<Allocation>(r3).slot, 10);
}

TEST(Schedule, HalfRateReservationsShareASlot)
{
    auto c = make_cycle();
    for (int i = 0; i < 14; ++i)
        ASSERT_TRUE(granted(c.admit(gts(10 + static_cast<std::uint32_t>(i % 10), 1, 1))));
    auto r = c.admit(gts(10, 1, 1));
    ASSERT_FALSE(granted(r));
    EXPECT_EQ(std::get<Refusal>(r).reason, RefusalReason::NoFreeSlot);
    EXPECT_EQ(count_double_occupied(occupancy(c)), 0u);
}

TEST(Schedule, NonInterferingStarsReuseSlots)
{
    auto c = make_cycle();
    auto a = c.admit(gts(10, 1, 0));
    auto b = c.admit(gts(20, 2, 0));
    ASSERT_TRUE(granted(a));
    ASSERT_TRUE(granted(b));
    EXPECT_EQ(std::get<Allocation>(a).slot, std::get<Allocation>(b).slot);
}

TEST(Schedule, InterferingStarsAreSeparated)
{
    auto c = make_cycle();
    c.add_interference(StarId{1}, StarId{2});
    auto a = c.admit(gts(10, 1, 0));
    auto b = c.admit(gts(20, 2, 0));
    ASSERT_TRUE(granted(a));
    ASSERT_TRUE(granted(b));
    EXPECT_NE(std::get<Allocation>(a).slot, std::get<Allocation>(b).slot);
}

TEST(Schedule, GtsCapPerSuperframe)
{
    auto c = make_cycle(4, 2);
    ASSERT_TRUE(granted(c.admit(gts(10, 1, 0))));
    ASSERT_TRUE(granted(c.admit(gts(11, 1, 0))));
    auto r = c.admit(gts(12, 1, 0));
    ASSERT_FALSE(granted(r));
    EXPECT_EQ(std::get<Refusal>(r).reason, RefusalReason::GtsCapReached);
    // A beacon reservation does not count against the cap.
    EXPECT_TRUE(granted(c.admit_gbs(StarId{1}, ReservationLevel{0})));
}

TEST(Schedule, MalformedRequestsThrow)
{
    auto c = make_cycle();
    EXPECT_THROW(c.admit(gts(10, 7, 0)), std::domain_error);
    EXPECT_THROW(c.admit(gts(10, 1, 5)), std::domain_error);
    EXPECT_THROW(c.admit(gts(10, 1, -1)), std::domain_error);
    EXPECT_THROW(c.admit(gts(99, 1, 0)), std::domain_error);
    EXPECT_THROW(c.admit(gts(20, 1, 0)), std::domain_error);
    AdmissionRequest beacon = gts(10, 1, 0);
    beacon.direction = Direction::Beacon;
    EXPECT_THROW(c.admit(beacon), std::domain_error);
    EXPECT_THROW(c.release(AllocationId{42}, ReleaseReason::NodeRequest), std::domain_error);
}

TEST(Schedule, ReleaseFreesCellsAndIsAudited)
{
    auto c = make_cycle();
    auto a = std::get<Allocation>(c.admit(gts(10, 1, 0)));
    const auto released = c.release(a.id, ReleaseReason::CoordinatorRevocation, 5);
    EXPECT_EQ(released, a);
    EXPECT_EQ(c.find(a.id), nullptr);
    ASSERT_EQ(c.audit_log().size(), 1u);
    EXPECT_EQ(c.audit_log()[0].reason, ReleaseReason::CoordinatorRevocation);
    EXPECT_EQ(c.audit_log()[0].superframe, 5);
    auto b = std::get<Allocation>(c.admit(gts(11, 1, 0)));
    EXPECT_EQ(b.slot, a.slot);
    EXPECT_NE(b.id, a.id);
}

TEST(Schedule, BitReversedPhasesKeepBuddyFree)
{
    ScheduleConfig cfg;
    cfg.phase_order = PhaseOrder::BitReversed;
    ScheduleCycle c(timing::SuperframeConfig{}, cfg);
    c.register_star(StarId{1});
    c.register_node(DeviceId{10}, StarId{1});
    c.register_node(DeviceId{11}, StarId{1});
    c.register_node(DeviceId{12}, StarId{1});
    auto a = std::get<Allocation>(c.admit(gts(10, 1, 2)));
    auto b = std::get<Allocation>(c.admit(gts(11, 1, 2)));
    EXPECT_EQ(a.phase, 0);
    EXPECT_EQ(b.phase, 2);
    // Phases 1 and 3 stay whole, so a level-1 reservation still fits.
    auto h = std::get<Allocation>(c.admit(gts(12, 1, 1)));
    EXPECT_EQ(h.slot, a.slot);
    EXPECT_EQ(h.phase, 1);
}

TEST(Schedule, AdmissionIsDeterministic)
{
    auto run = [] {
        auto c = make_cycle();
        c.add_interference(StarId{1}, StarId{2});
        std::mt19937_64 rng(9);
        for (int i = 0; i < 200; ++i) {
            const auto star = static_cast<std::uint32_t>(1 + rng() % 2);
            const auto owner = static_cast<std::uint32_t>(star * 10 + rng() % 10);
            c.admit(gts(owner, star, static_cast<int>(rng() % 5)), i);
            if (!c.allocations().empty() && rng() % 3 == 0)
                c.release(c.allocations()[rng() % c.allocations().size()].id,
                          ReleaseReason::NodeRequest, i);
        }
        return c;
    };
    EXPECT_EQ(run(), run());
}

TEST(Schedule, RandomSequencesNeverDoubleBook)
{
    std::mt19937_64 rng(2024);
    for (int seq = 0; seq < 500; ++seq) {
        auto c = make_cycle();
        oracle::Edges edges;
        if (rng() % 2) {
            c.add_interference(StarId{1}, StarId{2});
            edges.insert({1, 2});
        }
        const int ops = 5 + static_cast<int>(rng() % 40);
        for (int op = 0; op < ops; ++op) {
            if (!c.allocations().empty() && rng() % 4 == 0) {
                c.release(c.allocations()[rng() % c.allocations().size()].id,
                          ReleaseReason::NodeRequest, op);
                continue;
            }
            const auto star = static_cast<std::uint32_t>(1 + rng() % 2);
            const auto owner = static_cast<std::uint32_t>(star * 10 + rng() % 10);
            const int level = static_cast<int>(rng() % 5);
            auto r = c.admit(gts(owner, star, level), op);
            if (!granted(r)) {
                // A refusal is only allowed when every candidate clashes or
                // breaks the per-superframe cap.
                bool any_free = false;
                for (int slot = 9; slot < 16 && !any_free; ++slot) {
                    for (int p = 0; p < (1 << level) && !any_free; ++p) {
                        auto cand = alloc(star, slot, level, p);
                        bool ok = true;
                        for (const auto& a : c.allocations())
                            ok = ok && !oracle::clash(a, cand, edges, 4);
                        any_free = ok;
                    }
                }
                if (std::get<Refusal>(r).reason == RefusalReason::NoFreeSlot)
                    ASSERT_FALSE(any_free);
            }
        }
        ASSERT_EQ(oracle::double_booked_cells(c.allocations(), edges, 4), 0u);
        ASSERT_EQ(count_double_occupied(occupancy(c)), 0u);
    }
}

TEST(Schedule, OccupancyFlagsPlantedClash)
{
    std::vector<Allocation> v{alloc(1, 9, 1, 0), alloc(1, 9, 2, 2)};
    v[0].id = AllocationId{1};
    v[1].id = AllocationId{2};
    InterferenceGraph g;
    EXPECT_GT(count_double_occupied(occupancy(v, g, 4)), 0u);
    v[1].phase = 1;
    EXPECT_EQ(count_double_occupied(occupancy(v, g, 4)), 0u);
}

TEST(Schedule, LeaseInactivitySweepRevokes)
{
    auto c = make_cycle();
    auto a = std::get<Allocation>(c.admit(gts(10, 1, 0)));
    auto b = std::get<Allocation>(c.admit(gts(11, 1, 0)));
    LeaseBook book;
    book.open(a.id);
    book.open(b.id);
    for (int i = 0; i < 4; ++i) {
        book.record_occurrence(a.id, false);
        book.record_occurrence(b.id, i == 3);
    }
    const auto revoked = inactivity_sweep(c, book, 4, 16);
    ASSERT_EQ(revoked.size(), 1u);
    EXPECT_EQ(revoked[0].id, a.id);
    EXPECT_EQ(book.find(a.id)->status, LeaseStatus::RevokedByCoordinator);
    EXPECT_EQ(book.find(b.id)->status, LeaseStatus::Active);
    EXPECT_EQ(c.find(a.id), nullptr);
    EXPECT_NE(c.find(b.id), nullptr);
}

TEST(Schedule, DumpListsAllocationsAndMatrix)
{
    auto c = make_cycle(2);
    ASSERT_TRUE(granted(c.admit_gbs(StarId{1}, ReservationLevel{0})));
    ASSERT_TRUE(granted(c.admit(gts(10, 1, 1))));
    std::ostringstream os;
    write_dump(os, c);
    const auto text = os.str();
    EXPECT_NE(text.find("1 GBS 1 1 9 0 0\n"), std::string::npos);
    EXPECT_NE(text.find("2 GTS 10 1 10 1 0\n"), std::string::npos);
    EXPECT_NE(text.find("occupancy star 1"), std::string::npos);
    EXPECT_NE(text.find("slot 10: 10 . 10 ."), std::string::npos);
}
