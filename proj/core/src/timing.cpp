#include "detmac/timing.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace detmac::timing {

namespace {

Duration order_duration(int order, const char* what)
{
    if (order < 0 || order > kMaxOrder) {
        throw std::domain_error(std::string(what) + " must be in [0, 14], got " +
                                std::to_string(order));
    }
    return kBaseSuperframeDuration * (std::int64_t{1} << order);
}

} // namespace

Duration beacon_interval(int bo) { return order_duration(bo, "beacon order"); }

Duration active_portion(int so) { return order_duration(so, "superframe order"); }

SlotRole SuperframeGrid::role(int slot) const
{
    if (slot < 0 || slot >= slot_count())
        throw std::out_of_range("slot index " + std::to_string(slot) + " outside superframe");
    if (slot == 0)
        return SlotRole::Beacon;
    if (slot < first_reservable_slot())
        return SlotRole::Contention;
    return SlotRole::Reservable;
}

void validate(const SuperframeConfig& cfg)
{
    if (cfg.bo < 0 || cfg.bo > kMaxOrder)
        throw std::domain_error("bo must be in [0, 14]");
    if (cfg.so < 0 || cfg.so > cfg.bo)
        throw std::domain_error("so must be in [0, bo]");
    if (cfg.slots_per_superframe < 3)
        throw std::domain_error("slots_per_superframe must be at least 3");
    if (cfg.min_cap_slots < 1)
        throw std::domain_error("min_cap_slots must be at least 1");
    if (1 + cfg.min_cap_slots >= cfg.slots_per_superframe)
        throw std::domain_error("no reservable slot left after beacon and contention slots");
    // Slots of an order-0 superframe must be whole ticks; higher orders follow.
    if (kBaseSuperframeDuration.count() % cfg.slots_per_superframe != 0)
        throw std::domain_error("slots_per_superframe must divide 15360 us");
}

void validate(const PhyParams& phy)
{
    if (phy.data_rate_bps <= 0)
        throw std::domain_error("data_rate_bps must be positive");
    if (phy.phy_overhead_bytes < 0)
        throw std::domain_error("phy_overhead_bytes must be non-negative");
    if (phy.ack_psdu_bytes < 1 || phy.max_psdu_bytes < phy.ack_psdu_bytes)
        throw std::domain_error("need max_psdu_bytes >= ack_psdu_bytes >= 1");
    if (phy.turnaround_time < Duration::zero())
        throw std::domain_error("turnaround_time must be non-negative");
    if (phy.host_delay < Duration::zero())
        throw std::domain_error("host_delay must be non-negative");
    if (phy.gts_guard < Duration::zero())
        throw std::domain_error("gts_guard must be non-negative");
}

SuperframeGrid build_grid(const SuperframeConfig& cfg)
{
    validate(cfg);
    SuperframeGrid grid;
    grid.beacon_interval = beacon_interval(cfg.bo);
    grid.active_portion = active_portion(cfg.so);
    grid.slot_duration = grid.active_portion / cfg.slots_per_superframe;
    grid.inactive_start = grid.active_portion;
    grid.min_cap_slots = cfg.min_cap_slots;
    grid.slot_boundaries.reserve(static_cast<std::size_t>(cfg.slots_per_superframe));
    for (int i = 0; i < cfg.slots_per_superframe; ++i)
        grid.slot_boundaries.push_back({i, grid.slot_duration * i, grid.slot_duration * (i + 1)});
    return grid;
}

Duration frame_airtime(int psdu_len, const PhyParams& phy)
{
    if (psdu_len < 1 || psdu_len > phy.max_psdu_bytes) {
        throw std::domain_error("psdu length " + std::to_string(psdu_len) + " outside [1, " +
                                std::to_string(phy.max_psdu_bytes) + "]");
    }
    const std::int64_t bits = std::int64_t{phy.phy_overhead_bytes + psdu_len} * 8;
    const std::int64_t num = bits * 1'000'000;
    return Duration{(num + phy.data_rate_bps - 1) / phy.data_rate_bps};
}

Duration exchange_duration(int psdu_len, bool acked, const PhyParams& phy)
{
    Duration cycle = phy.host_delay + frame_airtime(psdu_len, phy);
    if (acked)
        cycle += phy.turnaround_time + frame_airtime(phy.ack_psdu_bytes, phy);
    return cycle;
}

int frames_per_slot(int psdu_len, bool acked, const SuperframeConfig& cfg, const PhyParams& phy)
{
    const Duration slot = active_portion(cfg.so) / cfg.slots_per_superframe;
    const Duration usable = slot - phy.gts_guard;
    if (usable <= Duration::zero())
        return 0;
    return static_cast<int>(usable / exchange_duration(psdu_len, acked, phy));
}

double unconstrained_throughput(int psdu_len, const PhyParams& phy)
{
    const Duration per_frame = frame_airtime(psdu_len, phy) + phy.host_delay;
    return static_cast<double>(psdu_len) * 8.0 * 1e6 / static_cast<double>(per_frame.count());
}

Duration calibrate_host_delay(double target_bps, int psdu_len, const PhyParams& phy)
{
    if (!(target_bps > 0.0))
        throw std::domain_error("target throughput must be positive");
    const double per_frame_us = static_cast<double>(psdu_len) * 8.0 * 1e6 / target_bps;
    const double delay = per_frame_us - static_cast<double>(frame_airtime(psdu_len, phy).count());
    if (delay < 0.0)
        throw std::domain_error("target throughput exceeds the raw PHY rate");
    return Duration{static_cast<std::int64_t>(std::llround(delay))};
}

} // namespace detmac::timing
