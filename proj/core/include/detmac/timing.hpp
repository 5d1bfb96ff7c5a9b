#pragma once

#include <cstdint>
#include <vector>

#include "detmac/ids.hpp"

namespace detmac::timing {

/// Length of a superframe of order 0 at 250 kbps: 960 symbols of 16 us.
inline constexpr Duration kBaseSuperframeDuration{15'360};
inline constexpr int kMaxOrder = 14;

struct SuperframeConfig
{
    int bo = 3;
    int so = 3;
    int slots_per_superframe = 16;
    int min_cap_slots = 8;

    friend bool operator==(const SuperframeConfig&, const SuperframeConfig&) = default;
};

struct PhyParams
{
    std::int64_t data_rate_bps = 250'000;
    int phy_overhead_bytes = 6;
    int max_psdu_bytes = 127;
    Duration turnaround_time{192};
    int ack_psdu_bytes = 5;
    /// Per-frame processing delay on the host side (bus transfer to the radio).
    Duration host_delay{0};
    /// Idle time a GTS transaction must leave before the end of its slot.
    Duration gts_guard{0};

    friend bool operator==(const PhyParams&, const PhyParams&) = default;
};

enum class SlotRole { Beacon, Contention, Reservable };

struct SlotBoundary
{
    int index;
    Duration start;
    Duration end;
};

struct SuperframeGrid
{
    Duration beacon_interval{};
    Duration active_portion{};
    Duration slot_duration{};
    std::vector<SlotBoundary> slot_boundaries;
    Duration inactive_start{};
    int min_cap_slots = 0;

    int slot_count() const noexcept { return static_cast<int>(slot_boundaries.size()); }
    int first_reservable_slot() const noexcept { return 1 + min_cap_slots; }
    SlotRole role(int slot) const;
    Duration cap_start() const noexcept { return slot_duration; }
    Duration cap_end() const noexcept { return slot_duration * first_reservable_slot(); }
};

/// BI = 15.36 ms * 2^bo. Throws std::domain_error unless 0 <= bo <= 14.
Duration beacon_interval(int bo);
/// SFAP = 15.36 ms * 2^so. Throws std::domain_error unless 0 <= so <= 14.
Duration active_portion(int so);

/// Throws std::domain_error naming the first violated invariant.
void validate(const SuperframeConfig& cfg);
void validate(const PhyParams& phy);

SuperframeGrid build_grid(const SuperframeConfig& cfg);

/// On-air time of one PPDU, rounded up to the next tick.
Duration frame_airtime(int psdu_len, const PhyParams& phy);

/// Time one frame exchange occupies inside a slot: host processing, the
/// frame itself and, when acknowledged, turnaround plus the ACK.
Duration exchange_duration(int psdu_len, bool acked, const PhyParams& phy);

/// Largest k with k exchanges (plus the guard) fitting in one slot.
int frames_per_slot(int psdu_len, bool acked, const SuperframeConfig& cfg, const PhyParams& phy);

/// Back-to-back send rate with no MAC and no acknowledgements, in bit/s.
double unconstrained_throughput(int psdu_len, const PhyParams& phy);

/// Host delay (rounded to the nearest tick) that brings
/// unconstrained_throughput(psdu_len) to target_bps.
Duration calibrate_host_delay(double target_bps, int psdu_len, const PhyParams& phy);

} // namespace detmac::timing
