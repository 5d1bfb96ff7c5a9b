#pragma once

#include <cassert>
#include <cstdint>
#include <random>
#include <vector>

#include "detmac/ids.hpp"

namespace detmac::sim {

enum class EventKind : std::uint8_t { Timer, TxEnd, RxDeliver, ScenarioAction };

struct SimEvent
{
    SimTime time{};
    std::uint64_t ordinal = 0;
    DeviceId target{};
    EventKind kind = EventKind::Timer;
    std::uint32_t code = 0;
    std::uint64_t arg = 0;
};

/// Min-queue on (time, ordinal). Equal-time events run in insertion order.
class EventQueue
{
public:
    /// Throws std::logic_error when time precedes the current time.
    std::uint64_t schedule(SimTime time, DeviceId target, EventKind kind, std::uint32_t code = 0,
                           std::uint64_t arg = 0);

    /// Processes every event with time <= t_end, then advances the clock to
    /// t_end. Returns the number of events processed.
    template <class Handler>
    std::size_t run_until(SimTime t_end, Handler&& handler)
    {
        if (t_end < now_)
            throw_backwards(t_end);
        std::size_t processed = 0;
        while (!heap_.empty() && heap_.front().time <= t_end) {
            const auto slot = pop_min();
            const SimEvent ev = events_[slot];
            free_.push_back(slot);
            assert(ev.time >= now_);
            now_ = ev.time;
            handler(ev);
            ++processed;
        }
        now_ = t_end;
        return processed;
    }

    SimTime now() const noexcept { return now_; }
    bool empty() const noexcept { return heap_.empty(); }
    std::size_t size() const noexcept { return heap_.size(); }

private:
    [[noreturn]] void throw_backwards(SimTime t_end) const;

    // Four-ary min-heap of compact keys; event bodies live in a recycled
    // table so sifting moves 24 bytes per level.
    struct Key
    {
        SimTime time;
        std::uint64_t ordinal;
        std::uint32_t slot;

        bool before(const Key& o) const noexcept
        {
            return time != o.time ? time < o.time : ordinal < o.ordinal;
        }
    };

    void push(Key k);
    std::uint32_t pop_min();

    std::vector<Key> heap_;
    std::vector<SimEvent> events_;
    std::vector<std::uint32_t> free_;
    std::uint64_t next_ordinal_ = 0;
    SimTime now_{0};
};

enum class ChannelState : std::uint8_t { Idle, Busy };

enum class RxOutcome : std::uint8_t {
    Ok,
    Collision,  ///< another audible transmission overlapped the frame
    HalfDuplex, ///< the receiver was itself transmitting
};

struct Reception
{
    DeviceId receiver{};
    RxOutcome outcome = RxOutcome::Ok;
};

using TxId = std::uint64_t;

struct Transmission
{
    TxId id = 0;
    DeviceId sender{};
    SimTime start{};
    SimTime end{};
    bool finished = false;
};

/// Single shared channel over a symmetric range graph. A receiver decodes a
/// frame iff no other in-range transmission overlaps it and it is not
/// transmitting itself; otherwise every overlapping frame is lost there.
class Medium
{
public:
    explicit Medium(std::size_t device_count);

    void connect(DeviceId a, DeviceId b);
    bool in_range(DeviceId a, DeviceId b) const;
    std::size_t device_count() const noexcept { return range_.size(); }
    const std::vector<DeviceId>& neighbours(DeviceId d) const;

    /// Registers a transmission occupying [start, end). Throws
    /// std::logic_error if the sender already has an overlapping one.
    TxId begin_tx(DeviceId sender, SimTime start, SimTime end);

    /// Closes a transmission and returns the outcome at every in-range
    /// receiver (ordered by device id).
    std::vector<Reception> end_tx(TxId id);

    /// Busy iff some in-range transmission covers time t.
    ChannelState cca(DeviceId device, SimTime t) const;

    bool transmitting(DeviceId device, SimTime t) const;
    std::size_t active_count() const;

private:
    void prune();
    std::size_t index(DeviceId d) const;

    std::vector<std::vector<char>> range_;
    std::vector<std::vector<DeviceId>> adjacency_;
    std::vector<Transmission> txs_;
    TxId next_id_ = 1;
};

/// mt19937_64 substream per device; a (seed, stream) pair fully determines
/// the sequence on every platform.
class RngStream
{
public:
    RngStream(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t next() { return engine_(); }
    /// Uniform integer in [lo, hi], by rejection (no modulo bias).
    std::uint64_t uniform(std::uint64_t lo, std::uint64_t hi);

private:
    std::mt19937_64 engine_;
};

} // namespace detmac::sim
