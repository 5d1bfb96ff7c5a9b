#pragma once

// Scenario execution: builds the initial schedule, wires the role state
// machines to the event queue and the medium, and collects metrics.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "detmac/ids.hpp"
#include "detmac/protocol.hpp"
#include "detmac/scenario.hpp"
#include "detmac/schedule.hpp"

namespace detmac::harness {

/// Admission of every reservation a scenario declares up front: GBS per star
/// (when enabled), PDS per dedicated-slot joiner, then GTS/PDS flows, each
/// group in ascending id order.
struct ScheduleSetup
{
    schedule::ScheduleCycle cycle;
    std::map<StarId, AllocationId> gbs;
    std::map<DeviceId, AllocationId> pds_join;
    std::map<std::uint32_t, AllocationId> flow_allocation;
    std::vector<std::string> refusals;
};

/// include_requested also admits flows marked setup = request.
ScheduleSetup build_schedule(const Scenario& scenario, bool include_requested);

struct FlowMetrics
{
    std::uint32_t flow_id = 0;
    std::uint64_t sent = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
    std::uint64_t in_flight = 0;
    std::uint64_t collisions = 0;
    /// Deliveries inside the measurement window (after warm-up).
    std::uint64_t measured_delivered = 0;
    std::uint64_t measured_bits = 0;
    double throughput_bps = 0.0;
    double mean_latency_us = 0.0;
    std::int64_t max_latency_us = 0;
};

struct AssociationRecord
{
    DeviceId node{};
    protocol::JoinMode join = protocol::JoinMode::Associated;
    bool associated = false;
    bool gave_up = false;
    int attempts = 0;
    int failures = 0;
    std::optional<SimTime> first_attempt;
    /// Start of the request transmission that led to association.
    std::optional<SimTime> access_time;
    std::optional<SimTime> completed;
};

struct GtsRequestRecord
{
    DeviceId node{};
    std::uint32_t flow = 0;
    int cap_failures = 0;
    std::optional<SimTime> acked;
    std::optional<SimTime> decided;
    bool granted = false;
};

struct GlobalMetrics
{
    std::int64_t superframes = 0;
    std::int64_t measured_superframes = 0;
    std::uint64_t events = 0;
    std::uint64_t transmissions = 0;
    /// Receptions lost to overlapping in-range transmissions.
    std::uint64_t collisions = 0;
    std::uint64_t beacon_collisions = 0;
    std::map<DeviceId, std::uint64_t> beacon_collisions_at;
    /// Collisions of frames sent inside a reserved slot, at their destination.
    std::uint64_t reserved_slot_collisions = 0;
    /// Data frames sent outside the sender's own reservation or the CAP.
    std::uint64_t slot_violations = 0;
    /// Transmissions discarded because the sender was already on air.
    std::uint64_t tx_conflicts = 0;
    std::uint64_t stale_beacons = 0;
    std::uint64_t missed_beacons = 0;
    std::uint64_t channel_access_failures = 0;
    std::uint64_t gts_requests_failed = 0;
    std::uint64_t revocations = 0;
};

struct RunResult
{
    std::vector<FlowMetrics> flows; ///< ascending flow id
    std::vector<AssociationRecord> associations;
    std::vector<GtsRequestRecord> requests;
    GlobalMetrics global;
    std::vector<schedule::Allocation> initial_allocations;
    std::vector<schedule::Allocation> final_allocations;
    std::vector<std::string> setup_refusals;

    const FlowMetrics* flow(std::uint32_t id) const;
    const AssociationRecord* association(DeviceId node) const;
};

/// Runs the scenario with its own seed. Throws ScenarioError when invalid.
/// With a trace stream, writes one line per transmission:
///   time_us kind src dst psdu_len slot superframe outcome
RunResult run_scenario(const Scenario& scenario, std::ostream* trace = nullptr);

} // namespace detmac::harness
