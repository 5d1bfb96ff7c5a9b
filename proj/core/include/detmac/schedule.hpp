#pragma once

// PAN-coordinator allocation engine for periodic reservations.
//
// A reservation of level n on slot s with phase p occupies slot s in every
// superframe whose index i satisfies i mod 2^n == p. The engine keeps the
// complete set of reservations over the 2^n_max superframe horizon and only
// admits a new one when its congruence class is disjoint from every existing
// reservation on the same slot whose star interferes with the requester's.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "detmac/ids.hpp"
#include "detmac/timing.hpp"

namespace detmac::schedule {

enum class Kind : std::uint8_t { Gts, Gbs, Pds };
enum class Direction : std::uint8_t { Uplink, Downlink, Beacon };

const char* to_string(Kind k) noexcept;
const char* to_string(Direction d) noexcept;

struct ReservationLevel
{
    int n = 0;

    std::int64_t period() const noexcept { return std::int64_t{1} << n; }
    friend auto operator<=>(const ReservationLevel&, const ReservationLevel&) = default;
};

struct Allocation
{
    AllocationId id{};
    Kind kind = Kind::Gts;
    DeviceId owner{};
    StarId star{};
    int slot = 0;
    ReservationLevel level;
    int phase = 0;
    Direction direction = Direction::Uplink;
    std::int64_t granted_at = 0;

    friend bool operator==(const Allocation&, const Allocation&) = default;
};

/// True iff superframe_index mod 2^level == phase.
bool occurs_in(const Allocation& a, std::int64_t superframe_index);

/// Symmetric relation over stars; every star interferes with itself.
class InterferenceGraph
{
public:
    void add(StarId a, StarId b);
    bool interferes(StarId a, StarId b) const;
    const std::set<std::pair<StarId, StarId>>& edges() const noexcept { return edges_; }

private:
    std::set<std::pair<StarId, StarId>> edges_;
};

bool conflicts(const Allocation& a, const Allocation& b, const InterferenceGraph& interference);

enum class PhaseOrder : std::uint8_t {
    Lowest,      ///< 0, 1, 2, ... 2^n - 1
    BitReversed, ///< buddy order: keeps the complementary congruence class whole
};

struct ScheduleConfig
{
    int n_max = 4;
    int max_gts_per_superframe = 7;
    int inactivity_threshold = 4;
    PhaseOrder phase_order = PhaseOrder::Lowest;
};

struct AdmissionRequest
{
    Kind kind = Kind::Gts;
    DeviceId owner{};
    StarId star{};
    ReservationLevel level;
    Direction direction = Direction::Uplink;
};

enum class RefusalReason : std::uint8_t { NoFreeSlot, GtsCapReached };
const char* to_string(RefusalReason r) noexcept;

struct Refusal
{
    RefusalReason reason = RefusalReason::NoFreeSlot;
    std::string detail;
};

using AdmitResult = std::variant<Allocation, Refusal>;

inline bool granted(const AdmitResult& r) noexcept { return std::holds_alternative<Allocation>(r); }

enum class ReleaseReason : std::uint8_t { NodeRequest, CoordinatorRevocation };
const char* to_string(ReleaseReason r) noexcept;

struct AuditEntry
{
    Allocation allocation;
    ReleaseReason reason = ReleaseReason::NodeRequest;
    std::int64_t superframe = 0;

    friend bool operator==(const AuditEntry&, const AuditEntry&) = default;
};

class ScheduleCycle
{
public:
    ScheduleCycle(const timing::SuperframeConfig& superframe, ScheduleConfig config);

    void register_star(StarId star);
    void register_node(DeviceId node, StarId star);
    void add_interference(StarId a, StarId b);

    /// Grants the lowest conflict-free (slot, phase) or returns a refusal.
    /// Throws std::domain_error for malformed requests.
    AdmitResult admit(const AdmissionRequest& request, std::int64_t superframe = 0);

    /// Coordinator-initiated reservation for a known node, no request needed.
    AdmitResult admit_pds(DeviceId node, StarId star, ReservationLevel level,
                          Direction direction = Direction::Uplink, std::int64_t superframe = 0);

    /// Reserves a slot for the star coordinator's own beacon.
    AdmitResult admit_gbs(StarId star, ReservationLevel level, std::int64_t superframe = 0);

    /// Throws std::domain_error when id is unknown.
    Allocation release(AllocationId id, ReleaseReason reason, std::int64_t superframe = 0);

    const Allocation* find(AllocationId id) const;
    const std::vector<Allocation>& allocations() const noexcept { return allocations_; }
    const std::vector<AuditEntry>& audit_log() const noexcept { return audit_; }
    const InterferenceGraph& interference() const noexcept { return interference_; }
    const ScheduleConfig& config() const noexcept { return config_; }
    const std::set<StarId>& stars() const noexcept { return stars_; }

    bool knows_star(StarId star) const { return stars_.contains(star); }
    bool knows_node(DeviceId node, StarId star) const;

    std::int64_t horizon() const noexcept { return std::int64_t{1} << config_.n_max; }
    int slot_count() const noexcept { return slot_count_; }
    int first_reservable_slot() const noexcept { return first_reservable_; }

    friend bool operator==(const ScheduleCycle& a, const ScheduleCycle& b)
    {
        return a.allocations_ == b.allocations_ && a.audit_ == b.audit_ && a.next_id_ == b.next_id_;
    }

private:
    bool within_gts_cap(const Allocation& candidate) const;
    std::vector<int> phase_sequence(int level) const;

    ScheduleConfig config_;
    int slot_count_;
    int first_reservable_;
    std::set<StarId> stars_;
    std::map<DeviceId, StarId> nodes_;
    InterferenceGraph interference_;
    std::vector<Allocation> allocations_; // ordered by id
    std::vector<AuditEntry> audit_;
    std::uint32_t next_id_ = 1;
};

enum class LeaseStatus : std::uint8_t { Active, ReleasedByNode, RevokedByCoordinator };

struct LeaseState
{
    AllocationId id{};
    int consecutive_unused = 0;
    LeaseStatus status = LeaseStatus::Active;
};

class LeaseBook
{
public:
    void open(AllocationId id);
    /// One occurrence of the allocation elapsed; used resets the counter.
    void record_occurrence(AllocationId id, bool used);
    void mark_released(AllocationId id);

    const LeaseState* find(AllocationId id) const;
    const std::map<AllocationId, LeaseState>& leases() const noexcept { return leases_; }

private:
    friend std::vector<Allocation> inactivity_sweep(ScheduleCycle&, LeaseBook&, int, std::int64_t);
    std::map<AllocationId, LeaseState> leases_;
};

/// Revokes every active lease with at least `threshold` consecutive unused
/// occurrences and returns the revoked allocations (the owners to notify).
std::vector<Allocation> inactivity_sweep(ScheduleCycle& cycle, LeaseBook& leases, int threshold,
                                         std::int64_t superframe = 0);

/// Cell of the horizon expansion. A cell belongs to one star's interference
/// neighbourhood and lists every reservation audible there.
struct OccupancyKey
{
    std::int64_t superframe = 0;
    int slot = 0;
    StarId neighborhood{};

    friend auto operator<=>(const OccupancyKey&, const OccupancyKey&) = default;
};

struct OccupancyEntry
{
    AllocationId id{};
    DeviceId owner{};
    StarId star{};
};

using OccupancyMap = std::map<OccupancyKey, std::vector<OccupancyEntry>>;

OccupancyMap occupancy(const ScheduleCycle& cycle);
OccupancyMap occupancy(const std::vector<Allocation>& allocations, const InterferenceGraph& g,
                       int n_max);

/// A cell is double-occupied when its own star holds a reservation there and
/// any other reservation is audible in the same cell.
bool double_occupied(const OccupancyKey& key, const std::vector<OccupancyEntry>& entries);
std::size_t count_double_occupied(const OccupancyMap& map);

/// `id kind owner star slot level phase` per allocation, then one occupancy
/// matrix per star (rows: slots, columns: superframes of the horizon).
void write_dump(std::ostream& os, const ScheduleCycle& cycle);

} // namespace detmac::schedule
