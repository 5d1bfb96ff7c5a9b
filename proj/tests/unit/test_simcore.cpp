#include <gtest/gtest.h>

#include <chrono>
#include <random>
#include <stdexcept>
#include <vector>

#include "detmac/simcore.hpp"

using namespace detmac;
using namespace detmac::sim;
using namespace std::chrono_literals;

TEST(EventQueue, OrdersByTimeThenInsertion)
{
    EventQueue q;
    q.schedule(30us, DeviceId{1}, EventKind::Timer, 1);
    q.schedule(10us, DeviceId{1}, EventKind::Timer, 2);
    q.schedule(10us, DeviceId{2}, EventKind::Timer, 3);
    q.schedule(20us, DeviceId{1}, EventKind::Timer, 4);
    std::vector<std::uint32_t> seen;
    const auto n = q.run_until(100us, [&](const SimEvent& e) { seen.push_back(e.code); });
    EXPECT_EQ(n, 4u);
    EXPECT_EQ(seen, (std::vector<std::uint32_t>{2, 3, 4, 1}));
    EXPECT_EQ(q.now(), 100us);
}

TEST(EventQueue, RunUntilIsInclusiveAndStops)
{
    EventQueue q;
    q.schedule(10us, DeviceId{1}, EventKind::Timer);
    q.schedule(11us, DeviceId{1}, EventKind::Timer);
    EXPECT_EQ(q.run_until(10us, [](const SimEvent&) {}), 1u);
    EXPECT_EQ(q.size(), 1u);
    EXPECT_EQ(q.now(), 10us);
}

TEST(EventQueue, HandlersMayScheduleAtCurrentTime)
{
    EventQueue q;
    q.schedule(5us, DeviceId{1}, EventKind::Timer, 0);
    int count = 0;
    q.run_until(5us, [&](const SimEvent& e) {
        ++count;
        if (e.code < 3)
            q.schedule(e.time, e.target, EventKind::Timer, e.code + 1);
    });
    EXPECT_EQ(count, 4);
}

TEST(EventQueue, RejectsThePast)
{
    EventQueue q;
    q.run_until(50us, [](const SimEvent&) {});
    EXPECT_THROW(q.schedule(49us, DeviceId{1}, EventKind::Timer), std::logic_error);
    EXPECT_THROW(q.run_until(10us, [](const SimEvent&) {}), std::logic_error);
}

TEST(EventQueue, MillionEventsUnderASecond)
{
    EventQueue q;
    std::mt19937_64 rng(1);
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < 1'000'000; ++i)
        q.schedule(SimTime{static_cast<std::int64_t>(rng() % 10'000'000)}, DeviceId{1},
                   EventKind::Timer);
    SimTime last{0};
    bool ordered = true;
    const auto n = q.run_until(SimTime{10'000'000}, [&](const SimEvent& e) {
        ordered = ordered && e.time >= last;
        last = e.time;
    });
    const auto elapsed = std::chrono::steady_clock::now() - t0;
    EXPECT_EQ(n, 1'000'000u);
    EXPECT_TRUE(ordered);
    EXPECT_LT(elapsed, std::chrono::seconds(1));
}

TEST(Medium, SingleTransmissionIsReceived)
{
    Medium m(4);
    m.connect(DeviceId{1}, DeviceId{2});
    const auto id = m.begin_tx(DeviceId{1}, 0us, 100us);
    EXPECT_EQ(m.cca(DeviceId{2}, 50us), ChannelState::Busy);
    EXPECT_EQ(m.cca(DeviceId{3}, 50us), ChannelState::Idle);
    EXPECT_EQ(m.cca(DeviceId{2}, 100us), ChannelState::Idle);
    const auto rx = m.end_tx(id);
    ASSERT_EQ(rx.size(), 1u);
    EXPECT_EQ(rx[0].receiver, DeviceId{2});
    EXPECT_EQ(rx[0].outcome, RxOutcome::Ok);
}

TEST(Medium, OverlapCollidesOnlyWhereBothAreHeard)
{
    // 1 - 2 - 3: 1 and 3 are hidden from each other.
    Medium m(4);
    m.connect(DeviceId{1}, DeviceId{2});
    m.connect(DeviceId{2}, DeviceId{3});
    const auto a = m.begin_tx(DeviceId{1}, 0us, 100us);
    const auto b = m.begin_tx(DeviceId{3}, 50us, 150us);
    EXPECT_EQ(m.cca(DeviceId{3}, 10us), ChannelState::Idle);
    const auto ra = m.end_tx(a);
    ASSERT_EQ(ra.size(), 1u);
    EXPECT_EQ(ra[0].outcome, RxOutcome::Collision);
    const auto rb = m.end_tx(b);
    ASSERT_EQ(rb.size(), 1u);
    EXPECT_EQ(rb[0].outcome, RxOutcome::Collision);
}

TEST(Medium, BackToBackFramesDoNotCollide)
{
    Medium m(3);
    m.connect(DeviceId{1}, DeviceId{2});
    const auto a = m.begin_tx(DeviceId{1}, 0us, 100us);
    const auto b = m.begin_tx(DeviceId{2}, 100us, 200us);
    EXPECT_EQ(m.end_tx(a)[0].outcome, RxOutcome::Ok);
    EXPECT_EQ(m.end_tx(b)[0].outcome, RxOutcome::Ok);
}

TEST(Medium, TransmittingReceiverIsHalfDuplex)
{
    Medium m(3);
    m.connect(DeviceId{1}, DeviceId{2});
    const auto a = m.begin_tx(DeviceId{1}, 0us, 100us);
    const auto b = m.begin_tx(DeviceId{2}, 0us, 10us);
    EXPECT_TRUE(m.transmitting(DeviceId{2}, 5us));
    const auto rb = m.end_tx(b);
    EXPECT_NE(rb[0].outcome, RxOutcome::Ok);
    EXPECT_NE(m.end_tx(a)[0].outcome, RxOutcome::Ok);
}

TEST(Medium, SenderCannotOverlapItself)
{
    Medium m(2);
    m.begin_tx(DeviceId{1}, 0us, 100us);
    EXPECT_THROW(m.begin_tx(DeviceId{1}, 50us, 60us), std::logic_error);
}

TEST(Rng, StreamsAreReproducibleAndIndependent)
{
    RngStream a(7, 1), b(7, 1), c(7, 2), d(8, 1);
    bool differs_c = false, differs_d = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next();
        EXPECT_EQ(x, b.next());
        differs_c = differs_c || x != c.next();
        differs_d = differs_d || x != d.next();
    }
    EXPECT_TRUE(differs_c);
    EXPECT_TRUE(differs_d);
}

TEST(Rng, UniformStaysInRangeAndCoversIt)
{
    RngStream r(3, 0);
    std::vector<int> hits(8, 0);
    for (int i = 0; i < 8000; ++i) {
        const auto v = r.uniform(2, 9);
        ASSERT_GE(v, 2u);
        ASSERT_LE(v, 9u);
        ++hits[v - 2];
    }
    for (int h : hits)
        EXPECT_GT(h, 800);
    EXPECT_EQ(r.uniform(5, 5), 5u);
}
