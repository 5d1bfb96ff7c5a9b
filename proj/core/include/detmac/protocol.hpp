#pragma once

// Per-role MAC state machines. Every handler takes the current time and an
// Outbox; it mutates only the object's own state and appends the actions
// (transmissions, timers, CCA probes, relay messages, metric reports) that
// the simulation core must carry out. Nothing here touches the medium.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <variant>
#include <vector>

#include "detmac/frame.hpp"
#include "detmac/ids.hpp"
#include "detmac/schedule.hpp"
#include "detmac/simcore.hpp"
#include "detmac/timing.hpp"

namespace detmac::protocol {

struct CsmaParams
{
    int min_be = 3;
    int max_be = 5;
    int max_backoffs = 4;
    Duration backoff_unit{320};
};

void validate(const CsmaParams& csma);

struct MacParams
{
    timing::SuperframeConfig superframe;
    timing::PhyParams phy;
    CsmaParams csma;
    int retry_limit = 3;
    int n_max = 4;
    bool gbs_enabled = true;
    int assoc_max_attempts = 4;
};

/// Immutable timing context shared by every device of one run.
class MacContext
{
public:
    explicit MacContext(MacParams params);

    const MacParams& params() const noexcept { return params_; }
    const timing::SuperframeGrid& grid() const noexcept { return grid_; }
    const timing::PhyParams& phy() const noexcept { return params_.phy; }

    SimTime superframe_start(std::int64_t sf) const { return grid_.beacon_interval * sf; }
    SimTime slot_start(std::int64_t sf, int slot) const
    {
        return superframe_start(sf) + grid_.slot_duration * slot;
    }
    SimTime slot_end(std::int64_t sf, int slot) const { return slot_start(sf, slot + 1); }
    SimTime cap_start(std::int64_t sf) const { return superframe_start(sf) + grid_.cap_start(); }
    SimTime cap_end(std::int64_t sf) const { return superframe_start(sf) + grid_.cap_end(); }

    std::int64_t superframe_of(SimTime t) const { return t / grid_.beacon_interval; }
    /// Slot containing t, or nullopt inside the inactive portion.
    std::optional<int> slot_of(SimTime t) const;

    Duration airtime(int psdu) const { return timing::frame_airtime(psdu, params_.phy); }
    Duration ack_airtime() const { return airtime(params_.phy.ack_psdu_bytes); }
    std::int64_t horizon() const noexcept { return std::int64_t{1} << params_.n_max; }
    /// Largest PSDU (capped at the PHY maximum) whose airtime fits into d.
    int max_psdu_within(Duration d) const;

private:
    MacParams params_;
    timing::SuperframeGrid grid_;
};

enum class FlowMode : std::uint8_t { Gts, Pds, Cap };
const char* to_string(FlowMode m) noexcept;

enum class JoinMode : std::uint8_t { Associated, Contention, Pds };
const char* to_string(JoinMode m) noexcept;

inline constexpr int kSaturating = -1;

struct FlowConfig
{
    std::uint32_t index = 0;
    DeviceId src{};
    DeviceId dst{};
    int psdu = 127;
    bool acked = true;
    FlowMode mode = FlowMode::Gts;
    schedule::ReservationLevel level;
    /// The node asks for its GTS through the contention period instead of
    /// having it provisioned before the run.
    bool dynamic_request = false;
    /// Frames generated per superframe, or kSaturating.
    int frames_per_superframe = kSaturating;
    std::int64_t start_superframe = 0;
    std::int64_t stop_superframe = -1; ///< -1: never stops
    schedule::Direction direction = schedule::Direction::Uplink;

    bool active_in(std::int64_t sf) const noexcept
    {
        return sf >= start_superframe && (stop_superframe < 0 || sf < stop_superframe);
    }
};

enum class TimerTag : std::uint32_t {
    GtsSlot,     ///< arg: allocation id
    SlotEnd,     ///< arg: allocation id
    BeaconSlot,
    BeaconCheck, ///< arg: superframe index
    CapStart,
    AckTimeout,  ///< arg: sequence number
};

struct GtsRequestRelay
{
    DeviceId node{};
    std::uint32_t flow = 0;
    schedule::ReservationLevel level;
    schedule::Direction direction = schedule::Direction::Uplink;
};

struct UsageReport
{
    AllocationId allocation{};
    bool used = false;
};

using RelayMessage = std::variant<GtsRequestRelay, UsageReport>;

enum class ReportKind : std::uint8_t {
    FrameSent,
    FrameDelivered,
    FrameDropped,
    ChannelAccessFailure,
    Associated,
    AssocAttemptFailed,
    AssocGaveUp,
    GtsRequestAcked,
    GtsRequestFailed,
    GtsGranted,
    GtsRefused,
    LeaseRevoked,
    BeaconMissed,
    StaleBeacon,
};

struct Report
{
    ReportKind kind = ReportKind::FrameSent;
    DeviceId device{};
    std::uint32_t flow = 0;
    SimTime time{};
    Duration latency{};
    SimTime access_time{};
    int attempts = 0;
    bool via_pds = false;
};

struct Transmit
{
    Frame frame;
    SimTime start{};
};

struct SetTimer
{
    SimTime at{};
    TimerTag tag = TimerTag::GtsSlot;
    std::uint64_t arg = 0;
};

struct RequestCca
{
    SimTime at{};
};

struct RelayToPan
{
    StarId star{};
    RelayMessage message;
};

using Action = std::variant<Transmit, SetTimer, RequestCca, RelayToPan, Report>;
using Outbox = std::vector<Action>;

// ---------------------------------------------------------------------------
// Slotted CSMA/CA

struct CapWindow
{
    SimTime start{};
    SimTime end{};
};

/// First backoff-period boundary at or after t, counted from the CAP start.
SimTime backoff_boundary(SimTime t, SimTime cap_start, Duration unit);

/// One slotted CSMA/CA procedure for one frame. The caller performs the CCA
/// at the time returned in a CcaAt step and feeds the result back.
class CsmaProcedure
{
public:
    enum class StepKind : std::uint8_t { CcaAt, TransmitAt, Deferred, ChannelAccessFailure };

    struct Step
    {
        StepKind kind;
        SimTime at{};
    };

    explicit CsmaProcedure(CsmaParams params = {});

    /// Resets NB and BE and draws the first backoff.
    Step start(SimTime now, CapWindow window, Duration tx_span, sim::RngStream& rng);
    /// Continues after a deferral, keeping NB and BE.
    Step resume(SimTime now, CapWindow window, Duration tx_span, sim::RngStream& rng);
    /// tx_span covers everything from the CCA to the end of the exchange; the
    /// transmission itself begins one turnaround after an idle CCA.
    Step on_cca(bool idle, SimTime now, CapWindow window, Duration tx_span, Duration turnaround,
                sim::RngStream& rng);

    int nb() const noexcept { return nb_; }
    int be() const noexcept { return be_; }

private:
    Step draw(SimTime now, CapWindow window, Duration tx_span, sim::RngStream& rng);

    CsmaParams params_;
    int nb_ = 0;
    int be_ = 0;
};

// ---------------------------------------------------------------------------
// Flow queues and GTS transfers (shared by end nodes and coordinators)

struct QueuedFrame
{
    std::uint64_t number = 0;
    SimTime enqueued{};
    int attempts = 0;
};

struct FlowState
{
    FlowConfig config;
    std::deque<QueuedFrame> queue;
    std::uint64_t generated = 0;
};

/// How a head-of-line frame left the sender.
enum class Completion : std::uint8_t {
    Delivered,   ///< acknowledged
    Dropped,     ///< retries or channel access exhausted
    Unconfirmed, ///< unacknowledged frame handed to the radio
};

class FlowSender
{
public:
    FlowSender(DeviceId self, const MacContext& ctx);

    void add_flow(const FlowConfig& flow);
    bool has_flow(std::uint32_t index) const { return flows_.contains(index); }
    FlowState& flow(std::uint32_t index);
    const std::map<std::uint32_t, FlowState>& flows() const noexcept { return flows_; }

    /// Superframe-start traffic generation.
    void generate(std::int64_t sf, SimTime now);

    /// Opens a GTS occurrence for `flow`; returns true if a frame went out.
    bool start_gts(std::uint32_t flow, AllocationId alloc, SimTime slot_start, SimTime slot_end,
                   SimTime now, std::uint32_t& seq_counter, Outbox& out);
    bool session_active() const noexcept { return session_.has_value(); }

    /// Returns true if the event belonged to the GTS session.
    bool on_ack(std::uint32_t seq, SimTime now, std::uint32_t& seq_counter, Outbox& out);
    bool on_ack_timeout(std::uint32_t seq, SimTime now, Outbox& out);
    bool on_tx_end(const Frame& frame, SimTime now, std::uint32_t& seq_counter, Outbox& out);

    /// Head-of-line helpers for contention access.
    QueuedFrame* head(std::uint32_t flow);
    void mark_attempt(std::uint32_t flow, SimTime now, Outbox& out);
    void complete_head(std::uint32_t flow, Completion how, SimTime now, Outbox& out);

    std::uint64_t in_flight(std::uint32_t flow) const;
    std::int64_t current_superframe() const noexcept { return current_sf_; }

    Frame make_data(std::uint32_t flow, AllocationId alloc, std::uint32_t seq) const;

private:
    struct Session
    {
        std::uint32_t flow = 0;
        AllocationId alloc{};
        SimTime slot_start{};
        SimTime slot_end{};
        int index = 0;
        std::uint32_t seq = 0;
        bool awaiting_ack = false;
    };

    bool send_next(SimTime now, std::uint32_t& seq_counter, Outbox& out);
    void refill(FlowState& fs, SimTime now);

    DeviceId self_;
    const MacContext* ctx_;
    std::map<std::uint32_t, FlowState> flows_;
    std::optional<Session> session_;
    std::int64_t current_sf_ = 0;
};

// ---------------------------------------------------------------------------
// End node

struct EndNodeConfig
{
    DeviceId id{};
    StarId star{};
    JoinMode join = JoinMode::Associated;
    /// Beacon placement of the star, known up front for pre-associated nodes.
    std::optional<BeaconSchedule> beacon;
    std::vector<FlowConfig> flows;
    /// Pre-provisioned reservations: allocation plus the flow it carries.
    std::vector<std::pair<schedule::Allocation, std::optional<std::uint32_t>>> leases;
};

struct AssociationState
{
    bool associated = false;
    bool gave_up = false;
    bool awaiting_response = false;
    int attempts = 0; ///< request transmissions
    int failures = 0; ///< transmissions without acknowledgement or response
    std::int64_t awaiting_since = 0;
    std::optional<SimTime> first_attempt;
    std::optional<SimTime> access_time;
    std::optional<SimTime> completed;
};

class EndNode
{
public:
    EndNode(EndNodeConfig config, const MacContext& ctx, sim::RngStream rng);

    void on_superframe_start(std::int64_t sf, SimTime now, Outbox& out);
    void on_timer(TimerTag tag, std::uint64_t arg, SimTime now, Outbox& out);
    void on_receive(const Frame& frame, SimTime now, Outbox& out);
    void on_tx_end(const Frame& frame, SimTime now, Outbox& out);
    void on_cca(sim::ChannelState state, SimTime now, Outbox& out);

    /// Beacon handling: clock resync, grant/revocation bookkeeping and
    /// scheduling of the transfers that are still ahead in this superframe.
    void on_beacon(const Frame& beacon, SimTime now, Outbox& out);

    DeviceId id() const noexcept { return id_; }
    StarId star() const noexcept { return star_; }
    bool associated() const noexcept { return assoc_.associated; }
    bool synced() const noexcept { return synced_; }
    std::int64_t last_beacon_superframe() const noexcept { return last_beacon_sf_; }
    const AssociationState& association() const noexcept { return assoc_; }
    const std::map<AllocationId, schedule::Allocation>& leases() const noexcept { return leases_; }
    const FlowSender& flows() const noexcept { return flows_; }
    std::uint64_t in_flight(std::uint32_t flow) const;

private:
    enum class CapPhase : std::uint8_t { Idle, Backoff, Transmitting, AwaitingAck, Deferred };

    struct CapItem
    {
        enum class Type : std::uint8_t { Data, GtsRequest, AssocRequest } type;
        std::uint32_t flow = 0;
    };

    enum class RequestState : std::uint8_t { None, Queued, AwaitingGrant, Granted, Refused };

    void schedule_lease(const schedule::Allocation& a, SimTime now, Outbox& out);
    void maybe_queue_association(Outbox& out, SimTime now);
    bool assoc_pending_in_cap() const;
    void assoc_failed(SimTime now, Outbox& out);
    void gts_slot(AllocationId id, SimTime now, Outbox& out);
    void maybe_start_cap(SimTime now, Outbox& out);
    std::optional<CapItem> next_cap_item() const;
    Frame cap_frame(const CapItem& item, std::uint32_t seq) const;
    Duration cap_span(const CapItem& item) const;
    void handle_csma_step(CsmaProcedure::Step step, SimTime now, Outbox& out);
    void cap_success(SimTime now, Outbox& out);
    void cap_failure(bool channel_access, SimTime now, Outbox& out);
    void finish_cap_item(SimTime now, Outbox& out);
    CapWindow cap_window() const;
    void report(Outbox& out, ReportKind kind, SimTime now, std::uint32_t flow = 0) const;

    DeviceId id_;
    StarId star_;
    DeviceId coordinator_;
    JoinMode join_;
    const MacContext* ctx_;
    sim::RngStream rng_;

    bool synced_ = false;
    std::int64_t last_beacon_sf_ = -1;
    std::int64_t sf_ = 0;
    std::optional<BeaconSchedule> beacon_;
    std::map<AllocationId, schedule::Allocation> leases_;
    std::map<AllocationId, std::uint32_t> lease_flow_;
    std::set<AllocationId> scheduled_;
    FlowSender flows_;
    std::map<std::uint32_t, RequestState> requests_;
    AssociationState assoc_;
    std::uint32_t next_seq_ = 1;

    // Dedicated-slot association exchange in progress.
    std::optional<std::uint32_t> pds_assoc_seq_;
    SimTime pds_assoc_start_{};

    std::deque<CapItem> cap_mgmt_;
    CapPhase cap_phase_ = CapPhase::Idle;
    std::optional<CapItem> cap_current_;
    CsmaProcedure csma_;
    int cap_retries_ = 0;
    std::uint32_t cap_seq_ = 0;
    SimTime cap_tx_start_{};
};

// ---------------------------------------------------------------------------
// Star coordinator

struct StarConfig
{
    StarId id{};
    BeaconSchedule beacon;
    std::vector<schedule::Allocation> allocations; ///< GTS/PDS of this star
    std::set<DeviceId> members;                    ///< associated before the run
    std::vector<FlowConfig> downlink_flows;
    std::vector<BeaconEntry> announcements;
};

class StarCoordinator
{
public:
    StarCoordinator(StarConfig config, const MacContext& ctx, sim::RngStream rng);

    void on_superframe_start(std::int64_t sf, SimTime now, Outbox& out);
    void on_timer(TimerTag tag, std::uint64_t arg, SimTime now, Outbox& out);
    void on_receive(const Frame& frame, SimTime now, Outbox& out);
    void on_tx_end(const Frame& frame, SimTime now, Outbox& out);

    StarId id() const noexcept { return id_; }
    DeviceId device() const noexcept { return coordinator_of(id_); }
    bool suspended() const noexcept { return suspended_; }
    const BeaconSchedule& beacon_schedule() const noexcept { return beacon_; }
    const std::vector<schedule::Allocation>& allocations() const noexcept { return allocations_; }
    const std::set<DeviceId>& members() const noexcept { return members_; }
    const FlowSender& flows() const noexcept { return flows_; }
    std::uint64_t in_flight(std::uint32_t flow) const { return flows_.in_flight(flow); }

    /// Beacon for the given superframe; pops the announcements it carries.
    Frame build_beacon(std::int64_t sf);

private:
    bool reserve_air(SimTime start, SimTime end);
    void send_ack(const Frame& to, SimTime now, Outbox& out);
    void apply_decision(const BeaconEntry& entry);

    StarId id_;
    const MacContext* ctx_;
    sim::RngStream rng_;
    BeaconSchedule beacon_;
    std::vector<schedule::Allocation> allocations_;
    std::set<DeviceId> members_;
    std::deque<BeaconEntry> announcements_;
    std::map<AllocationId, bool> used_;
    std::map<AllocationId, std::uint32_t> downlink_flow_;
    std::set<std::pair<DeviceId, std::uint32_t>> relayed_;
    FlowSender flows_;
    std::vector<std::pair<SimTime, SimTime>> committed_;
    std::int64_t sf_ = 0;
    std::int64_t last_superbeacon_sf_ = -1;
    bool suspended_ = false;
    std::uint32_t next_seq_ = 1;
};

// ---------------------------------------------------------------------------
// PAN coordinator

class PanCoordinator
{
public:
    PanCoordinator(DeviceId id, const MacContext& ctx, schedule::ScheduleCycle cycle,
                   schedule::LeaseBook leases, int inactivity_threshold);

    /// Superframe boundary: admits queued requests in arrival order, sweeps
    /// idle leases once per horizon and sends the superbeacon in slot 0.
    void on_superframe_start(std::int64_t sf, SimTime now, Outbox& out);
    void on_relay(StarId from, const RelayMessage& message, SimTime now);

    DeviceId id() const noexcept { return id_; }
    const schedule::ScheduleCycle& cycle() const noexcept { return cycle_; }
    const schedule::LeaseBook& leases() const noexcept { return leases_; }
    std::size_t pending_requests() const noexcept { return inbox_.size(); }
    std::size_t pending_decisions() const noexcept { return decisions_.size(); }
    std::uint64_t revocations() const noexcept { return revocations_; }

private:
    struct Pending
    {
        SimTime arrival{};
        DeviceId requester{};
        StarId star{};
        GtsRequestRelay request;
    };

    DeviceId id_;
    const MacContext* ctx_;
    schedule::ScheduleCycle cycle_;
    schedule::LeaseBook leases_;
    int inactivity_threshold_;
    std::vector<Pending> inbox_;
    std::deque<PanDecision> decisions_;
    std::uint64_t revocations_ = 0;
    std::uint32_t next_seq_ = 1;
};

} // namespace detmac::protocol
