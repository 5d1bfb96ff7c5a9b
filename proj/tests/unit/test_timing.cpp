#include <gtest/gtest.h>

#include <stdexcept>

#include "detmac/timing.hpp"
#include "oracle.hpp"

using namespace detmac;
using namespace detmac::timing;

TEST(Timing, BeaconIntervalAndActivePortionForAllOrders)
{
    for (int bo = 0; bo <= kMaxOrder; ++bo) {
        EXPECT_EQ(beacon_interval(bo).count(), oracle::beacon_interval_us(bo)) << "bo " << bo;
        for (int so = 0; so <= bo; ++so)
            EXPECT_EQ(active_portion(so).count(), oracle::beacon_interval_us(so)) << "so " << so;
    }
    EXPECT_EQ(beacon_interval(0).count(), 15360);
    EXPECT_EQ(beacon_interval(14).count(), 251'658'240);
}

TEST(Timing, OrdersOutOfRangeThrow)
{
    EXPECT_THROW(beacon_interval(-1), std::domain_error);
    EXPECT_THROW(beacon_interval(15), std::domain_error);
    EXPECT_THROW(active_portion(15), std::domain_error);
}

TEST(Timing, ValidateRejectsBadConfigs)
{
    SuperframeConfig ok;
    EXPECT_NO_THROW(validate(ok));

    SuperframeConfig so_above_bo;
    so_above_bo.bo = 2;
    so_above_bo.so = 3;
    EXPECT_THROW(validate(so_above_bo), std::domain_error);

    SuperframeConfig no_cap;
    no_cap.min_cap_slots = 15;
    EXPECT_THROW(validate(no_cap), std::domain_error);

    PhyParams phy;
    phy.data_rate_bps = 0;
    EXPECT_THROW(validate(phy), std::domain_error);
}

TEST(Timing, GridSlotsTileTheActivePortion)
{
    for (int bo = 0; bo <= kMaxOrder; ++bo) {
        for (int so = 0; so <= bo; ++so) {
            SuperframeConfig cfg;
            cfg.bo = bo;
            cfg.so = so;
            const auto g = build_grid(cfg);
            ASSERT_EQ(g.slot_count(), 16);
            EXPECT_EQ(g.slot_boundaries.front().start.count(), 0);
            for (int i = 1; i < g.slot_count(); ++i)
                EXPECT_EQ(g.slot_boundaries[i].start, g.slot_boundaries[i - 1].end);
            EXPECT_EQ(g.slot_boundaries.back().end, g.active_portion);
            EXPECT_EQ(g.inactive_start, g.active_portion);
            EXPECT_EQ(g.slot_duration.count(), oracle::slot_us(so));
        }
    }
}

TEST(Timing, SlotRoles)
{
    const auto g = build_grid(SuperframeConfig{});
    EXPECT_EQ(g.role(0), SlotRole::Beacon);
    for (int s = 1; s < g.first_reservable_slot(); ++s)
        EXPECT_EQ(g.role(s), SlotRole::Contention);
    for (int s = g.first_reservable_slot(); s < 16; ++s)
        EXPECT_EQ(g.role(s), SlotRole::Reservable);
    EXPECT_EQ(g.first_reservable_slot(), 9);
    EXPECT_EQ(g.cap_start(), g.slot_duration);
    EXPECT_EQ(g.cap_end(), g.slot_duration * 9);
}

TEST(Timing, AirtimeMatchesByteTime)
{
    const PhyParams phy;
    for (int p = 1; p <= 127; ++p)
        EXPECT_EQ(frame_airtime(p, phy).count(), oracle::airtime_us(p));
    EXPECT_THROW(frame_airtime(0, phy), std::domain_error);
    EXPECT_THROW(frame_airtime(128, phy), std::domain_error);
}

TEST(Timing, AirtimeRoundsUpAtOddRates)
{
    PhyParams phy;
    phy.data_rate_bps = 300'000;
    // 13 bytes = 104 bits = 346.67 us
    EXPECT_EQ(frame_airtime(7, phy).count(), 347);
}

TEST(Timing, FramesPerSlotAgreesWithCounting)
{
    for (int so = 0; so <= 8; ++so) {
        for (int p : {9, 20, 50, 80, 100, 127}) {
            for (bool acked : {false, true}) {
                SuperframeConfig cfg;
                cfg.bo = cfg.so = so;
                PhyParams phy;
                EXPECT_EQ(frames_per_slot(p, acked, cfg, phy), oracle::frames_per_slot(p, acked, so));
                phy.gts_guard = Duration{640};
                EXPECT_EQ(frames_per_slot(p, acked, cfg, phy),
                          oracle::frames_per_slot(p, acked, so, 640));
            }
        }
    }
}

TEST(Timing, UnconstrainedThroughputIncreasesWithPsdu)
{
    PhyParams phy;
    phy.host_delay = Duration{4211};
    double prev = 0.0;
    for (int p = 1; p <= 127; ++p) {
        const double t = unconstrained_throughput(p, phy);
        EXPECT_GT(t, prev);
        prev = t;
    }
}

TEST(Timing, CalibrationHitsTarget)
{
    const PhyParams phy;
    const auto d = calibrate_host_delay(120000.0, 127, phy);
    // 127 * 8 / 120 kbps = 8466.67 us per frame, minus 4256 us of airtime
    EXPECT_EQ(d.count(), 4211);
    PhyParams calibrated = phy;
    calibrated.host_delay = d;
    EXPECT_NEAR(unconstrained_throughput(127, calibrated), 120000.0, 10.0);
    EXPECT_THROW(calibrate_host_delay(300000.0, 127, phy), std::domain_error);
    EXPECT_THROW(calibrate_host_delay(0.0, 127, phy), std::domain_error);
}
