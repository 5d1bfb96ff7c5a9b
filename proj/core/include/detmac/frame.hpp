#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "detmac/ids.hpp"
#include "detmac/schedule.hpp"

namespace detmac::protocol {

enum class FrameKind : std::uint8_t {
    Beacon,
    Superbeacon,
    Data,
    Ack,
    GtsRequest,
    GtsGrant,
    GtsRefuse,
    AssocRequest,
    AssocResponse,
    ReleaseNotice,
};

const char* to_string(FrameKind k) noexcept;

/// Frame control, sequence number, addressing and FCS of every non-ACK frame.
inline constexpr int kMacHeaderBytes = 8;
/// Every announced beacon entry (allocation, grant, refusal, ...) costs this much.
inline constexpr int kBeaconEntryBytes = 3;
inline constexpr int kAllocationDigestBytes = 2;

enum class EntryKind : std::uint8_t { Slot, GtsGrant, GtsRefuse, AssocResponse, ReleaseNotice };

/// One announcement carried in a beacon.
struct BeaconEntry
{
    EntryKind kind = EntryKind::Slot;
    DeviceId node{};
    std::uint32_t flow = 0;
    schedule::Allocation allocation{};
    schedule::RefusalReason refusal = schedule::RefusalReason::NoFreeSlot;
};

/// Where and how often a star coordinator sends its beacon.
struct BeaconSchedule
{
    int slot = 0;
    schedule::ReservationLevel level;
    int phase = 0;

    bool occurs_in(std::int64_t superframe) const noexcept
    {
        return superframe % level.period() == phase;
    }
};

struct BeaconPayload
{
    StarId star{};
    std::int64_t superframe = 0;
    int bo = 0;
    int so = 0;
    BeaconSchedule schedule;
    std::vector<BeaconEntry> entries;
};

/// PAN coordinator decision addressed to one star.
struct PanDecision
{
    StarId star{};
    BeaconEntry entry;
};

struct SuperbeaconPayload
{
    std::int64_t superframe = 0;
    int bo = 0;
    int so = 0;
    std::vector<schedule::Allocation> gbs_table;
    std::vector<PanDecision> decisions;
    std::uint16_t digest = 0;
};

struct DataPayload
{
    std::uint32_t flow = 0;
    std::uint64_t frame_number = 0;
    SimTime enqueued{};
    bool acked = true;
    AllocationId allocation{}; ///< 0 when sent in the contention period
    int body_bytes = 1;
};

struct AckPayload
{
    int length = 5;
};

struct GtsRequestPayload
{
    std::uint32_t flow = 0;
    schedule::ReservationLevel level;
    schedule::Direction direction = schedule::Direction::Uplink;
};

struct GtsGrantPayload
{
    schedule::Allocation allocation;
};

struct GtsRefusePayload
{
    schedule::RefusalReason reason = schedule::RefusalReason::NoFreeSlot;
};

struct AssocRequestPayload
{
    AllocationId via{}; ///< the dedicated slot used, 0 for contention access
};

struct AssocResponsePayload
{
    DeviceId node{};
    bool accepted = true;
};

struct ReleaseNoticePayload
{
    AllocationId allocation{};
};

using Payload = std::variant<BeaconPayload, SuperbeaconPayload, DataPayload, AckPayload,
                             GtsRequestPayload, GtsGrantPayload, GtsRefusePayload,
                             AssocRequestPayload, AssocResponsePayload, ReleaseNoticePayload>;

struct Frame
{
    FrameKind kind = FrameKind::Data;
    DeviceId src{};
    DeviceId dst = kBroadcast;
    std::uint32_t seq = 0;
    int psdu_len = 0;
    Payload payload;

    bool broadcast() const noexcept { return dst == kBroadcast; }
};

/// Encoded PSDU length of a payload.
int encoded_length(const Payload& payload);

/// Builds a frame and fills psdu_len from the payload encoding. Throws
/// std::length_error if the encoding exceeds max_psdu.
Frame make_frame(DeviceId src, DeviceId dst, std::uint32_t seq, Payload payload,
                 int max_psdu = 127);

/// Entries that still fit into a beacon next to its fixed header.
int beacon_entry_capacity(int max_psdu = 127);

std::uint16_t allocation_digest(const std::vector<schedule::Allocation>& allocations);

} // namespace detmac::protocol
