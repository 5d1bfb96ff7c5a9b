#include "detmac/schedule.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>
#include <string>

namespace detmac::schedule {

const char* to_string(Kind k) noexcept
{
    switch (k) {
    case Kind::Gts: return "GTS";
    case Kind::Gbs: return "GBS";
    case Kind::Pds: return "PDS";
    }
    return "?";
}

const char* to_string(Direction d) noexcept
{
    switch (d) {
    case Direction::Uplink: return "uplink";
    case Direction::Downlink: return "downlink";
    case Direction::Beacon: return "beacon";
    }
    return "?";
}

const char* to_string(RefusalReason r) noexcept
{
    switch (r) {
    case RefusalReason::NoFreeSlot: return "no-free-slot";
    case RefusalReason::GtsCapReached: return "gts-cap-reached";
    }
    return "?";
}

const char* to_string(ReleaseReason r) noexcept
{
    switch (r) {
    case ReleaseReason::NodeRequest: return "node-request";
    case ReleaseReason::CoordinatorRevocation: return "coordinator-revocation";
    }
    return "?";
}

bool occurs_in(const Allocation& a, std::int64_t superframe_index)
{
    return superframe_index % a.level.period() == a.phase;
}

void InterferenceGraph::add(StarId a, StarId b)
{
    if (a == b)
        return;
    edges_.insert(std::minmax(a, b));
}

bool InterferenceGraph::interferes(StarId a, StarId b) const
{
    return a == b || edges_.contains(std::minmax(a, b));
}

bool conflicts(const Allocation& a, const Allocation& b, const InterferenceGraph& interference)
{
    if (a.slot != b.slot || !interference.interferes(a.star, b.star))
        return false;
    const Allocation& coarse = a.level.n <= b.level.n ? a : b;
    const Allocation& fine = a.level.n <= b.level.n ? b : a;
    return fine.phase % coarse.level.period() == coarse.phase;
}

ScheduleCycle::ScheduleCycle(const timing::SuperframeConfig& superframe, ScheduleConfig config)
    : config_(config)
    , slot_count_(superframe.slots_per_superframe)
    , first_reservable_(1 + superframe.min_cap_slots)
{
    timing::validate(superframe);
    if (config_.n_max < 0 || config_.n_max > 20)
        throw std::domain_error("n_max must be in [0, 20]");
    if (config_.max_gts_per_superframe < 1)
        throw std::domain_error("max_gts_per_superframe must be at least 1");
    if (config_.inactivity_threshold < 1)
        throw std::domain_error("inactivity threshold must be at least 1");
}

void ScheduleCycle::register_star(StarId star) { stars_.insert(star); }

void ScheduleCycle::register_node(DeviceId node, StarId star)
{
    if (!knows_star(star))
        throw std::domain_error("node registered to unknown star " + std::to_string(raw(star)));
    nodes_[node] = star;
}

void ScheduleCycle::add_interference(StarId a, StarId b)
{
    if (!knows_star(a) || !knows_star(b))
        throw std::domain_error("interference between unregistered stars");
    interference_.add(a, b);
}

bool ScheduleCycle::knows_node(DeviceId node, StarId star) const
{
    if (node == coordinator_of(star))
        return knows_star(star);
    auto it = nodes_.find(node);
    return it != nodes_.end() && it->second == star;
}

const Allocation* ScheduleCycle::find(AllocationId id) const
{
    auto it = std::lower_bound(allocations_.begin(), allocations_.end(), id,
                               [](const Allocation& a, AllocationId v) { return a.id < v; });
    return it != allocations_.end() && it->id == id ? &*it : nullptr;
}

std::vector<int> ScheduleCycle::phase_sequence(int level) const
{
    const int period = 1 << level;
    std::vector<int> phases(static_cast<std::size_t>(period));
    for (int i = 0; i < period; ++i) {
        int p = i;
        if (config_.phase_order == PhaseOrder::BitReversed) {
            p = 0;
            for (int b = 0; b < level; ++b)
                if (i & (1 << b))
                    p |= 1 << (level - 1 - b);
        }
        phases[static_cast<std::size_t>(i)] = p;
    }
    return phases;
}

bool ScheduleCycle::within_gts_cap(const Allocation& candidate) const
{
    if (candidate.kind == Kind::Gbs)
        return true;
    for (std::int64_t sf = candidate.phase; sf < horizon(); sf += candidate.level.period()) {
        int count = 1;
        for (const auto& a : allocations_)
            if (a.star == candidate.star && a.kind != Kind::Gbs && occurs_in(a, sf))
                ++count;
        if (count > config_.max_gts_per_superframe)
            return false;
    }
    return true;
}

AdmitResult ScheduleCycle::admit(const AdmissionRequest& request, std::int64_t superframe)
{
    if (!knows_star(request.star))
        throw std::domain_error("unknown star " + std::to_string(raw(request.star)));
    if (request.level.n < 0 || request.level.n > config_.n_max) {
        throw std::domain_error("reservation level " + std::to_string(request.level.n) +
                                " outside [0, n_max]");
    }
    if (!knows_node(request.owner, request.star)) {
        throw std::domain_error("owner " + std::to_string(raw(request.owner)) +
                                " is not known to star " + std::to_string(raw(request.star)));
    }
    if (request.kind == Kind::Gbs) {
        if (request.owner != coordinator_of(request.star) || request.direction != Direction::Beacon)
            throw std::domain_error("GBS must be owned by the star coordinator with beacon direction");
    } else if (request.direction == Direction::Beacon) {
        throw std::domain_error("beacon direction is reserved for GBS");
    }

    Allocation candidate;
    candidate.id = AllocationId{next_id_};
    candidate.kind = request.kind;
    candidate.owner = request.owner;
    candidate.star = request.star;
    candidate.level = request.level;
    candidate.direction = request.direction;
    candidate.granted_at = superframe;

    bool blocked_by_cap = false;
    const auto phases = phase_sequence(request.level.n);
    for (int slot = first_reservable_; slot < slot_count_; ++slot) {
        candidate.slot = slot;
        for (int phase : phases) {
            candidate.phase = phase;
            const bool clash = std::any_of(allocations_.begin(), allocations_.end(),
                                           [&](const Allocation& a) {
                                               return conflicts(a, candidate, interference_);
                                           });
            if (clash)
                continue;
            if (!within_gts_cap(candidate)) {
                blocked_by_cap = true;
                continue;
            }
            ++next_id_;
            allocations_.push_back(candidate);
            return candidate;
        }
    }
    if (blocked_by_cap) {
        return Refusal{RefusalReason::GtsCapReached,
                       "star " + std::to_string(raw(request.star)) + " already holds " +
                           std::to_string(config_.max_gts_per_superframe) +
                           " reservations in a superframe"};
    }
    return Refusal{RefusalReason::NoFreeSlot,
                   "no conflict-free slot/phase at level " + std::to_string(request.level.n)};
}

AdmitResult ScheduleCycle::admit_pds(DeviceId node, StarId star, ReservationLevel level,
                                     Direction direction, std::int64_t superframe)
{
    return admit({Kind::Pds, node, star, level, direction}, superframe);
}

AdmitResult ScheduleCycle::admit_gbs(StarId star, ReservationLevel level, std::int64_t superframe)
{
    if (!knows_star(star))
        throw std::domain_error("GBS for unregistered star " + std::to_string(raw(star)));
    return admit({Kind::Gbs, coordinator_of(star), star, level, Direction::Beacon}, superframe);
}

Allocation ScheduleCycle::release(AllocationId id, ReleaseReason reason, std::int64_t superframe)
{
    auto it = std::find_if(allocations_.begin(), allocations_.end(),
                           [id](const Allocation& a) { return a.id == id; });
    if (it == allocations_.end())
        throw std::domain_error("release of unknown allocation " + std::to_string(raw(id)));
    Allocation gone = *it;
    allocations_.erase(it);
    audit_.push_back({gone, reason, superframe});
    return gone;
}

void LeaseBook::open(AllocationId id) { leases_[id] = LeaseState{id, 0, LeaseStatus::Active}; }

void LeaseBook::record_occurrence(AllocationId id, bool used)
{
    auto it = leases_.find(id);
    if (it == leases_.end() || it->second.status != LeaseStatus::Active)
        return;
    it->second.consecutive_unused = used ? 0 : it->second.consecutive_unused + 1;
}

void LeaseBook::mark_released(AllocationId id)
{
    auto it = leases_.find(id);
    if (it != leases_.end())
        it->second.status = LeaseStatus::ReleasedByNode;
}

const LeaseState* LeaseBook::find(AllocationId id) const
{
    auto it = leases_.find(id);
    return it == leases_.end() ? nullptr : &it->second;
}

std::vector<Allocation> inactivity_sweep(ScheduleCycle& cycle, LeaseBook& leases, int threshold,
                                         std::int64_t superframe)
{
    if (threshold < 1)
        throw std::domain_error("inactivity threshold must be at least 1");
    std::vector<Allocation> revoked;
    for (auto& [id, lease] : leases.leases_) {
        if (lease.status != LeaseStatus::Active || lease.consecutive_unused < threshold)
            continue;
        if (cycle.find(id) == nullptr)
            continue;
        revoked.push_back(cycle.release(id, ReleaseReason::CoordinatorRevocation, superframe));
        lease.status = LeaseStatus::RevokedByCoordinator;
    }
    return revoked;
}

OccupancyMap occupancy(const std::vector<Allocation>& allocations, const InterferenceGraph& g,
                       int n_max)
{
    std::set<StarId> stars;
    for (const auto& a : allocations)
        stars.insert(a.star);
    for (const auto& [a, b] : g.edges()) {
        stars.insert(a);
        stars.insert(b);
    }
    const std::int64_t horizon = std::int64_t{1} << n_max;
    OccupancyMap map;
    for (const auto& a : allocations) {
        for (StarId hood : stars) {
            if (!g.interferes(a.star, hood))
                continue;
            for (std::int64_t sf = a.phase; sf < horizon; sf += a.level.period())
                map[{sf, a.slot, hood}].push_back({a.id, a.owner, a.star});
        }
    }
    return map;
}

OccupancyMap occupancy(const ScheduleCycle& cycle)
{
    return occupancy(cycle.allocations(), cycle.interference(), cycle.config().n_max);
}

bool double_occupied(const OccupancyKey& key, const std::vector<OccupancyEntry>& entries)
{
    if (entries.size() < 2)
        return false;
    return std::any_of(entries.begin(), entries.end(),
                       [&](const OccupancyEntry& e) { return e.star == key.neighborhood; });
}

std::size_t count_double_occupied(const OccupancyMap& map)
{
    std::size_t n = 0;
    for (const auto& [key, entries] : map)
        n += double_occupied(key, entries) ? 1 : 0;
    return n;
}

void write_dump(std::ostream& os, const ScheduleCycle& cycle)
{
    for (const auto& a : cycle.allocations()) {
        os << raw(a.id) << ' ' << to_string(a.kind) << ' ' << raw(a.owner) << ' ' << raw(a.star)
           << ' ' << a.slot << ' ' << a.level.n << ' ' << a.phase << '\n';
    }
    const auto map = occupancy(cycle);
    for (StarId star : cycle.stars()) {
        os << "occupancy star " << raw(star) << '\n';
        for (int slot = cycle.first_reservable_slot(); slot < cycle.slot_count(); ++slot) {
            os << "slot " << slot << ':';
            for (std::int64_t sf = 0; sf < cycle.horizon(); ++sf) {
                os << ' ';
                auto it = map.find({sf, slot, star});
                if (it == map.end()) {
                    os << '.';
                    continue;
                }
                if (double_occupied(it->first, it->second)) {
                    os << '!';
                    continue;
                }
                auto own = std::find_if(it->second.begin(), it->second.end(),
                                        [&](const OccupancyEntry& e) { return e.star == star; });
                // Reservations of neighbouring stars show as '~'.
                if (own == it->second.end())
                    os << '~';
                else
                    os << raw(own->owner);
            }
            os << '\n';
        }
    }
}

} // namespace detmac::schedule
