#include <gtest/gtest.h>

#include <sstream>

#include "detmac/csv.hpp"
#include "detmac/experiments.hpp"
#include "oracle.hpp"

using namespace detmac;
using namespace detmac::harness;

TEST(Fig4, CalibratedEndpointAndMonotoneCurve)
{
    const auto pts = experiment_fig4();
    ASSERT_EQ(pts.size(), 16u);
    EXPECT_EQ(pts.back().psdu, 127);
    EXPECT_NEAR(pts.back().throughput_bps, 120000.0, 6000.0);
    for (std::size_t i = 1; i < pts.size(); ++i) {
        EXPECT_GT(pts[i].throughput_bps, pts[i - 1].throughput_bps);
        EXPECT_GT(pts[i].ideal_bps, pts[i].throughput_bps);
    }
    // 127 bytes back to back: 1016 bits every 4256 us + host delay
    const double expected = 127 * 8 * 1e6 / static_cast<double>(oracle::airtime_us(127) +
                                                                pts.back().host_delay.count());
    EXPECT_DOUBLE_EQ(pts.back().throughput_bps, expected);
}

TEST(Fig6, BestPsduMaximisesPayloadPerSlot)
{
    const auto phy = fig6_phy();
    for (int bo = 0; bo <= kFig6MaxBo; ++bo) {
        for (bool acked : {true, false}) {
            const int best = fig6_best_psdu(bo, acked, phy);
            const long best_bytes =
                static_cast<long>(oracle::frames_per_slot(best, acked, bo, 640)) * best;
            for (int p = 9; p <= 127; ++p)
                EXPECT_LE(static_cast<long>(oracle::frames_per_slot(p, acked, bo, 640)) * p,
                          best_bytes);
        }
    }
}

TEST(Fig6, ZeroAtShortestSuperframeWithAck)
{
    const auto phy = fig6_phy();
    timing::SuperframeConfig sf;
    sf.bo = sf.so = 0;
    EXPECT_EQ(analytic_gts_bps(fig6_best_psdu(0, true, phy), true, sf, phy), 0.0);
    // 320 us remain after the guard, less than the shortest frame.
    EXPECT_EQ(analytic_gts_bps(fig6_best_psdu(0, false, phy), false, sf, phy), 0.0);
    sf.bo = sf.so = 1;
    EXPECT_GT(analytic_gts_bps(fig6_best_psdu(1, true, phy), true, sf, phy), 0.0);
}

TEST(Fig6, SimulatedPointMatchesAnalytic)
{
    const auto phy = fig6_phy();
    for (int bo : {1, 4}) {
        const int psdu = fig6_best_psdu(bo, true, phy);
        auto s = fig6_scenario(bo, true, psdu, 1);
        s.duration = 64;
        const auto r = run_scenario(s);
        const double analytic = analytic_gts_bps(psdu, true, s.mac.superframe, phy);
        EXPECT_DOUBLE_EQ(r.flow(1)->throughput_bps, analytic) << "bo " << bo;
    }
}

TEST(Fig7, ReferenceFlowHoldsWithContenders)
{
    const auto base = run_fig7_point(0, 1);
    const auto busy = run_fig7_point(4, 1);
    EXPECT_GT(base.reference.throughput_bps, 0.0);
    EXPECT_EQ(base.reference.throughput_bps, busy.reference.throughput_bps);
    EXPECT_EQ(base.cap_aggregate_bps, 0.0);
    EXPECT_GT(busy.cap_aggregate_bps, 0.0);
    ASSERT_EQ(busy.rows.size(), 6u);
    EXPECT_EQ(busy.rows.back().mode, "cap_aggregate");
}

TEST(Csv, HeaderAndFixedColumns)
{
    CsvRow row;
    row.scenario = "x";
    row.flow_id = 3;
    row.bo = 2;
    row.so = 1;
    row.mode = "gts";
    row.level = "1";
    row.psdu = 50;
    row.offered_bps = 1.0 / 3.0;
    row.delivered_bps = 2.5;
    std::ostringstream os;
    write_csv(os, {row});
    EXPECT_EQ(os.str(), std::string(kCsvHeader) +
                            "\nx,3,2,1,gts,1,50,1,0,0.333,2.500,0.000,0,0,0,0,0\n");
}

TEST(Csv, RowsAreSortedRegardlessOfInput)
{
    CsvRow a, b, c;
    a.flow_id = 2;
    b.flow_id = 1;
    c.flow_id = 1;
    c.contenders = 4;
    std::ostringstream x, y;
    write_csv(x, {a, b, c});
    write_csv(y, {c, b, a});
    EXPECT_EQ(x.str(), y.str());
}

TEST(ScheduleReport, RefusalsFailValidation)
{
    auto ok = parse_scenario_file(std::string(DETMAC_TEST_DATA) + "/feasible.scn");
    std::ostringstream os;
    EXPECT_TRUE(validate_schedule(ok.scenario, os).ok);
    auto bad = parse_scenario_file(std::string(DETMAC_TEST_DATA) + "/oversubscribed.scn");
    std::ostringstream os2;
    const auto rep = validate_schedule(bad.scenario, os2);
    EXPECT_FALSE(rep.ok);
    EXPECT_EQ(rep.refusals.size(), 2u);
    EXPECT_EQ(rep.double_occupied, 0u);
}
