#include "detmac/frame.hpp"

#include <stdexcept>
#include <string>

namespace detmac::protocol {

namespace {

template <class... Ts>
struct overloaded : Ts...
{
    using Ts::operator()...;
};

} // namespace

const char* to_string(FrameKind k) noexcept
{
    switch (k) {
    case FrameKind::Beacon: return "Beacon";
    case FrameKind::Superbeacon: return "Superbeacon";
    case FrameKind::Data: return "Data";
    case FrameKind::Ack: return "Ack";
    case FrameKind::GtsRequest: return "GtsRequest";
    case FrameKind::GtsGrant: return "GtsGrant";
    case FrameKind::GtsRefuse: return "GtsRefuse";
    case FrameKind::AssocRequest: return "AssocRequest";
    case FrameKind::AssocResponse: return "AssocResponse";
    case FrameKind::ReleaseNotice: return "ReleaseNotice";
    }
    return "?";
}

int encoded_length(const Payload& payload)
{
    return std::visit(
        overloaded{
            [](const BeaconPayload& p) {
                return kMacHeaderBytes + kBeaconEntryBytes * static_cast<int>(p.entries.size());
            },
            [](const SuperbeaconPayload& p) {
                const auto n = p.gbs_table.size() + p.decisions.size();
                return kMacHeaderBytes + kBeaconEntryBytes * static_cast<int>(n) +
                       kAllocationDigestBytes;
            },
            [](const DataPayload& p) { return kMacHeaderBytes + p.body_bytes; },
            [](const AckPayload& p) { return p.length; },
            [](const GtsRequestPayload&) { return kMacHeaderBytes + 2; },
            [](const GtsGrantPayload&) { return kMacHeaderBytes + 4; },
            [](const GtsRefusePayload&) { return kMacHeaderBytes + 2; },
            [](const AssocRequestPayload&) { return kMacHeaderBytes + 2; },
            [](const AssocResponsePayload&) { return kMacHeaderBytes + 3; },
            [](const ReleaseNoticePayload&) { return kMacHeaderBytes + 2; },
        },
        payload);
}

Frame make_frame(DeviceId src, DeviceId dst, std::uint32_t seq, Payload payload, int max_psdu)
{
    static constexpr FrameKind kinds[] = {
        FrameKind::Beacon,       FrameKind::Superbeacon,  FrameKind::Data,
        FrameKind::Ack,          FrameKind::GtsRequest,   FrameKind::GtsGrant,
        FrameKind::GtsRefuse,    FrameKind::AssocRequest, FrameKind::AssocResponse,
        FrameKind::ReleaseNotice,
    };
    Frame f;
    f.kind = kinds[payload.index()];
    f.src = src;
    f.dst = dst;
    f.seq = seq;
    f.psdu_len = encoded_length(payload);
    if (f.psdu_len > max_psdu) {
        throw std::length_error(std::string(to_string(f.kind)) + " encodes to " +
                                std::to_string(f.psdu_len) + " bytes, above " +
                                std::to_string(max_psdu));
    }
    f.payload = std::move(payload);
    return f;
}

int beacon_entry_capacity(int max_psdu)
{
    return (max_psdu - kMacHeaderBytes - kAllocationDigestBytes) / kBeaconEntryBytes;
}

std::uint16_t allocation_digest(const std::vector<schedule::Allocation>& allocations)
{
    // FNV-1a over the fields that define occupancy, folded to 16 bits.
    std::uint32_t h = 2166136261u;
    auto mix = [&h](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            h ^= (v >> (8 * i)) & 0xFFu;
            h *= 16777619u;
        }
    };
    for (const auto& a : allocations) {
        mix(raw(a.id));
        mix(raw(a.owner));
        mix(raw(a.star));
        mix(static_cast<std::uint32_t>(a.slot));
        mix(static_cast<std::uint32_t>(a.level.n));
        mix(static_cast<std::uint32_t>(a.phase));
    }
    return static_cast<std::uint16_t>((h >> 16) ^ (h & 0xFFFFu));
}

} // namespace detmac::protocol
