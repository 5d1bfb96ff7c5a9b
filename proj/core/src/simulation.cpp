#include "detmac/simulation.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <memory>
#include <ostream>
#include <set>

#include "detmac/simcore.hpp"

namespace detmac::harness {

namespace {

using protocol::Action;
using protocol::Frame;
using protocol::FrameKind;
using protocol::Outbox;
using protocol::ReportKind;
using schedule::Allocation;

constexpr Duration kOneTick{1};
constexpr std::uint32_t kCcaCode = 1;

std::string refusal_text(const std::string& what, const schedule::Refusal& r)
{
    std::string s = what + ": refused (" + schedule::to_string(r.reason) + ")";
    if (!r.detail.empty())
        s += ": " + r.detail;
    return s;
}

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

protocol::FlowConfig flow_config(const Scenario& s, const FlowSpec& f)
{
    protocol::FlowConfig c;
    c.index = f.id;
    c.src = f.src;
    c.dst = f.dst;
    c.psdu = f.psdu;
    c.acked = f.acked;
    c.mode = f.mode;
    c.level = schedule::ReservationLevel{f.level};
    c.dynamic_request = f.dynamic_request;
    c.frames_per_superframe = f.load;
    c.start_superframe = f.start;
    c.stop_superframe = f.stop;
    c.direction = s.direction_of(f);
    return c;
}

class Runner
{
public:
    Runner(const Scenario& s, std::ostream* trace);
    RunResult run();

private:
    struct PendingTx
    {
        Frame frame;
        SimTime start{};
        std::optional<sim::TxId> medium_id;
    };

    void apply(DeviceId device, Outbox& out, SimTime now);
    void transmit(DeviceId sender, Frame frame, SimTime start, SimTime now);
    void on_event(const sim::SimEvent& ev);
    void tx_end(const sim::SimEvent& ev);
    void record(const protocol::Report& r);
    void check_slot_use(DeviceId sender, const Frame& f, SimTime start, SimTime end);
    void trace_line(const PendingTx& tx, const char* outcome);
    FlowMetrics& flow(std::uint32_t id) { return flows_[id]; }
    void deliver_data(const Frame& f, SimTime now);

    const Scenario& s_;
    std::ostream* trace_;
    protocol::MacContext ctx_;
    ScheduleSetup setup_;
    sim::EventQueue queue_;
    sim::Medium medium_;
    std::unique_ptr<protocol::PanCoordinator> pan_;
    std::map<DeviceId, protocol::StarCoordinator> stars_;
    std::map<DeviceId, protocol::EndNode> nodes_;

    std::map<std::uint64_t, PendingTx> pending_;
    std::uint64_t next_tx_ = 1;
    std::map<AllocationId, Allocation> known_allocations_;
    std::map<std::uint32_t, FlowMetrics> flows_;
    std::map<std::uint32_t, int> flow_psdu_;
    std::map<std::pair<DeviceId, std::uint32_t>, GtsRequestRecord> requests_;
    std::map<std::uint32_t, double> latency_sum_;
    GlobalMetrics global_;
    SimTime window_start_{};
    SimTime end_{};
};

Runner::Runner(const Scenario& s, std::ostream* trace)
    : s_(s),
      trace_(trace),
      ctx_(s.mac),
      setup_(build_schedule(s, false)),
      medium_(s.max_device_id() + 1)
{
    const auto& grid = ctx_.grid();
    window_start_ = grid.beacon_interval * s.effective_warmup();
    end_ = grid.beacon_interval * s.effective_duration();

    // Radio links: every star is a fully connected cell, every coordinator
    // hears the PAN coordinator, plus the explicit extra links.
    std::map<StarId, std::vector<DeviceId>> cells;
    for (const auto& st : s.stars) {
        cells[st.id].push_back(coordinator_of(st.id));
        medium_.connect(coordinator_of(st.id), s.pan);
    }
    for (const auto& n : s.nodes)
        cells[n.star].push_back(n.id);
    for (const auto& [_, members] : cells) {
        for (std::size_t i = 0; i < members.size(); ++i)
            for (std::size_t j = i + 1; j < members.size(); ++j)
                medium_.connect(members[i], members[j]);
    }
    for (const auto& [a, b] : s.ranges)
        medium_.connect(a, b);

    for (const auto& a : setup_.cycle.allocations())
        known_allocations_[a.id] = a;

    schedule::LeaseBook leases;
    for (const auto& a : setup_.cycle.allocations()) {
        if (a.kind != schedule::Kind::Gbs)
            leases.open(a.id);
    }
    pan_ = std::make_unique<protocol::PanCoordinator>(s.pan, ctx_, setup_.cycle, leases,
                                                      s.schedule.inactivity_threshold);

    auto beacon_of = [&](StarId id) {
        protocol::BeaconSchedule b{1, schedule::ReservationLevel{0}, 0};
        if (auto it = setup_.gbs.find(id); it != setup_.gbs.end()) {
            const auto* a = setup_.cycle.find(it->second);
            b = protocol::BeaconSchedule{a->slot, a->level, a->phase};
        }
        return b;
    };

    for (const auto& st : s.stars) {
        protocol::StarConfig cfg;
        cfg.id = st.id;
        cfg.beacon = beacon_of(st.id);
        for (const auto& a : setup_.cycle.allocations()) {
            if (a.star == st.id && a.kind != schedule::Kind::Gbs)
                cfg.allocations.push_back(a);
        }
        for (const auto& n : s.nodes) {
            if (n.star == st.id && n.join == protocol::JoinMode::Associated)
                cfg.members.insert(n.id);
        }
        for (const auto& f : s.flows) {
            if (f.src == coordinator_of(st.id))
                cfg.downlink_flows.push_back(flow_config(s, f));
        }
        stars_.emplace(coordinator_of(st.id),
                       protocol::StarCoordinator(
                           std::move(cfg), ctx_,
                           sim::RngStream(s.seed, (std::uint64_t{1} << 32) | raw(st.id))));
    }

    std::map<AllocationId, std::uint32_t> alloc_flow;
    for (const auto& [flow, id] : setup_.flow_allocation)
        alloc_flow[id] = flow;
    for (const auto& n : s.nodes) {
        protocol::EndNodeConfig cfg;
        cfg.id = n.id;
        cfg.star = n.star;
        cfg.join = n.join;
        if (n.join != protocol::JoinMode::Contention)
            cfg.beacon = beacon_of(n.star);
        for (const auto& f : s.flows) {
            if (f.src == n.id)
                cfg.flows.push_back(flow_config(s, f));
        }
        for (const auto& a : setup_.cycle.allocations()) {
            if (a.owner != n.id)
                continue;
            std::optional<std::uint32_t> flow;
            if (auto it = alloc_flow.find(a.id); it != alloc_flow.end())
                flow = it->second;
            cfg.leases.emplace_back(a, flow);
        }
        nodes_.emplace(n.id, protocol::EndNode(std::move(cfg), ctx_, sim::RngStream(s.seed, raw(n.id))));
    }

    for (const auto& f : s.flows) {
        flows_[f.id].flow_id = f.id;
        flow_psdu_[f.id] = f.psdu;
    }
}

void Runner::apply(DeviceId device, Outbox& out, SimTime now)
{
    // Actions may append further actions (relay handling does not), so walk
    // by index over a local copy.
    Outbox actions;
    actions.swap(out);
    for (auto& action : actions) {
        std::visit(
            [&](auto& a) {
                using T = std::decay_t<decltype(a)>;
                if constexpr (std::is_same_v<T, protocol::Transmit>) {
                    transmit(device, std::move(a.frame), a.start, now);
                } else if constexpr (std::is_same_v<T, protocol::SetTimer>) {
                    queue_.schedule(a.at, device, sim::EventKind::Timer,
                                    static_cast<std::uint32_t>(a.tag), a.arg);
                } else if constexpr (std::is_same_v<T, protocol::RequestCca>) {
                    queue_.schedule(a.at, device, sim::EventKind::ScenarioAction, kCcaCode);
                } else if constexpr (std::is_same_v<T, protocol::RelayToPan>) {
                    pan_->on_relay(a.star, a.message, now);
                } else {
                    record(a);
                }
            },
            action);
    }
}

void Runner::transmit(DeviceId sender, Frame frame, SimTime start, SimTime now)
{
    const SimTime end = start + ctx_.airtime(frame.psdu_len);
    ++global_.transmissions;
    if (frame.kind == FrameKind::Superbeacon) {
        const auto& p = std::get<protocol::SuperbeaconPayload>(frame.payload);
        for (const auto& d : p.decisions) {
            if (d.entry.kind == protocol::EntryKind::GtsGrant)
                known_allocations_[d.entry.allocation.id] = d.entry.allocation;
        }
    }
    if (frame.kind == FrameKind::Data)
        check_slot_use(sender, frame, start, end);

    PendingTx tx{std::move(frame), start, std::nullopt};
    try {
        tx.medium_id = medium_.begin_tx(sender, start, end);
    } catch (const std::logic_error&) {
        ++global_.tx_conflicts;
    }
    const auto key = next_tx_++;
    pending_.emplace(key, std::move(tx));
    queue_.schedule(std::max(end, now), sender, sim::EventKind::TxEnd, 0, key);
}

void Runner::check_slot_use(DeviceId sender, const Frame& f, SimTime start, SimTime end)
{
    const auto& p = std::get<protocol::DataPayload>(f.payload);
    const auto sf = ctx_.superframe_of(start);
    const auto first = ctx_.slot_of(start);
    const auto last = ctx_.slot_of(end - kOneTick);
    bool ok = first && last && ctx_.superframe_of(end - kOneTick) == sf;
    if (ok && raw(p.allocation) != 0) {
        ok = *first == *last;
        auto it = known_allocations_.find(p.allocation);
        ok = ok && it != known_allocations_.end() && schedule::occurs_in(it->second, sf) &&
             it->second.slot == *first &&
             (it->second.owner == sender || coordinator_of(it->second.star) == sender);
    } else if (ok) {
        ok = *first >= 1 && *last < ctx_.grid().first_reservable_slot();
    }
    if (!ok)
        ++global_.slot_violations;
}

void Runner::trace_line(const PendingTx& tx, const char* outcome)
{
    if (!trace_)
        return;
    const auto& f = tx.frame;
    const auto slot = ctx_.slot_of(tx.start);
    *trace_ << tx.start.count() << ' ' << lower(protocol::to_string(f.kind)) << ' '
            << raw(f.src) << ' ';
    if (f.broadcast())
        *trace_ << '*';
    else
        *trace_ << raw(f.dst);
    *trace_ << ' ' << f.psdu_len << ' ';
    if (slot)
        *trace_ << *slot;
    else
        *trace_ << '-';
    *trace_ << ' ' << ctx_.superframe_of(tx.start) << ' ' << outcome << '\n';
}

void Runner::deliver_data(const Frame& f, SimTime now)
{
    const auto& p = std::get<protocol::DataPayload>(f.payload);
    auto& m = flow(p.flow);
    ++m.delivered;
    if (now >= window_start_) {
        ++m.measured_delivered;
        m.measured_bits += static_cast<std::uint64_t>(flow_psdu_[p.flow]) * 8;
        const auto lat = (now - p.enqueued).count();
        latency_sum_[p.flow] += static_cast<double>(lat);
        m.max_latency_us = std::max(m.max_latency_us, lat);
    }
}

void Runner::tx_end(const sim::SimEvent& ev)
{
    auto node = pending_.extract(ev.arg);
    PendingTx& tx = node.mapped();
    const Frame& f = tx.frame;
    const SimTime now = ev.time;

    std::vector<sim::Reception> receptions;
    if (tx.medium_id)
        receptions = medium_.end_tx(*tx.medium_id);

    const char* outcome = "ok";
    bool dst_ok = false;
    if (!tx.medium_id) {
        outcome = "dropped";
    } else if (f.broadcast()) {
        for (const auto& r : receptions) {
            if (r.outcome == sim::RxOutcome::Collision)
                outcome = "collision";
        }
    } else {
        outcome = "dropped";
        for (const auto& r : receptions) {
            if (r.receiver != f.dst)
                continue;
            if (r.outcome == sim::RxOutcome::Ok) {
                outcome = "ok";
                dst_ok = true;
            } else if (r.outcome == sim::RxOutcome::Collision) {
                outcome = "collision";
            }
        }
    }
    for (const auto& r : receptions) {
        if (r.outcome != sim::RxOutcome::Collision)
            continue;
        ++global_.collisions;
        if (f.kind == FrameKind::Beacon || f.kind == FrameKind::Superbeacon) {
            ++global_.beacon_collisions;
            ++global_.beacon_collisions_at[r.receiver];
        }
    }
    if (f.kind == FrameKind::Data) {
        const auto& p = std::get<protocol::DataPayload>(f.payload);
        const bool collided = std::string_view(outcome) == "collision";
        if (collided) {
            ++flow(p.flow).collisions;
            if (raw(p.allocation) != 0)
                ++global_.reserved_slot_collisions;
        }
        if (!p.acked) {
            if (dst_ok)
                deliver_data(f, now);
            else
                ++flow(p.flow).dropped;
        }
    }
    trace_line(tx, outcome);

    Outbox out;
    const DeviceId sender = ev.target;
    if (auto it = nodes_.find(sender); it != nodes_.end())
        it->second.on_tx_end(f, now, out);
    else if (auto st = stars_.find(sender); st != stars_.end())
        st->second.on_tx_end(f, now, out);
    apply(sender, out, now);

    for (const auto& r : receptions) {
        if (r.outcome != sim::RxOutcome::Ok)
            continue;
        if (auto it = nodes_.find(r.receiver); it != nodes_.end())
            it->second.on_receive(f, now, out);
        else if (auto st = stars_.find(r.receiver); st != stars_.end())
            st->second.on_receive(f, now, out);
        apply(r.receiver, out, now);
    }
}

void Runner::on_event(const sim::SimEvent& ev)
{
    ++global_.events;
    if (ev.kind == sim::EventKind::TxEnd) {
        tx_end(ev);
        return;
    }
    Outbox out;
    const DeviceId d = ev.target;
    if (ev.kind == sim::EventKind::ScenarioAction && ev.code == kCcaCode) {
        if (auto it = nodes_.find(d); it != nodes_.end())
            it->second.on_cca(medium_.cca(d, ev.time), ev.time, out);
    } else if (ev.kind == sim::EventKind::Timer) {
        const auto tag = static_cast<protocol::TimerTag>(ev.code);
        if (auto it = nodes_.find(d); it != nodes_.end())
            it->second.on_timer(tag, ev.arg, ev.time, out);
        else if (auto st = stars_.find(d); st != stars_.end())
            st->second.on_timer(tag, ev.arg, ev.time, out);
    }
    apply(d, out, ev.time);
}

void Runner::record(const protocol::Report& r)
{
    switch (r.kind) {
    case ReportKind::FrameSent: ++flow(r.flow).sent; break;
    case ReportKind::FrameDelivered: {
        auto& m = flow(r.flow);
        ++m.delivered;
        if (r.time >= window_start_) {
            ++m.measured_delivered;
            m.measured_bits += static_cast<std::uint64_t>(flow_psdu_[r.flow]) * 8;
            latency_sum_[r.flow] += static_cast<double>(r.latency.count());
            m.max_latency_us = std::max(m.max_latency_us, r.latency.count());
        }
        break;
    }
    case ReportKind::FrameDropped: ++flow(r.flow).dropped; break;
    case ReportKind::ChannelAccessFailure: ++global_.channel_access_failures; break;
    case ReportKind::GtsRequestAcked: {
        auto& q = requests_[{r.device, r.flow}];
        q.node = r.device;
        q.flow = r.flow;
        if (!q.acked)
            q.acked = r.time;
        break;
    }
    case ReportKind::GtsRequestFailed: {
        ++global_.gts_requests_failed;
        auto& q = requests_[{r.device, r.flow}];
        q.node = r.device;
        q.flow = r.flow;
        ++q.cap_failures;
        break;
    }
    case ReportKind::GtsGranted:
    case ReportKind::GtsRefused: {
        auto& q = requests_[{r.device, r.flow}];
        q.node = r.device;
        q.flow = r.flow;
        if (!q.decided) {
            q.decided = r.time;
            q.granted = r.kind == ReportKind::GtsGranted;
        }
        break;
    }
    case ReportKind::BeaconMissed: ++global_.missed_beacons; break;
    case ReportKind::StaleBeacon: ++global_.stale_beacons; break;
    case ReportKind::Associated:
    case ReportKind::AssocAttemptFailed:
    case ReportKind::AssocGaveUp:
    case ReportKind::LeaseRevoked:
        break;
    }
}

RunResult Runner::run()
{
    const auto& grid = ctx_.grid();
    const auto duration = s_.effective_duration();
    auto handler = [this](const sim::SimEvent& ev) { on_event(ev); };

    for (std::int64_t sf = 0; sf < duration; ++sf) {
        const SimTime t0 = grid.beacon_interval * sf;
        if (sf > 0)
            queue_.run_until(t0 - kOneTick, handler);
        Outbox out;
        pan_->on_superframe_start(sf, t0, out);
        apply(s_.pan, out, t0);
        for (auto& [id, st] : stars_) {
            st.on_superframe_start(sf, t0, out);
            apply(id, out, t0);
        }
        for (auto& [id, n] : nodes_) {
            n.on_superframe_start(sf, t0, out);
            apply(id, out, t0);
        }
    }
    queue_.run_until(end_ - kOneTick, handler);

    RunResult result;
    const double seconds =
        std::chrono::duration<double>(grid.beacon_interval * (duration - s_.effective_warmup()))
            .count();
    for (auto& [id, m] : flows_) {
        const auto* flow_spec = &*std::find_if(s_.flows.begin(), s_.flows.end(),
                                               [id](const auto& f) { return f.id == id; });
        if (auto it = nodes_.find(flow_spec->src); it != nodes_.end())
            m.in_flight = it->second.in_flight(id);
        else if (auto st = stars_.find(flow_spec->src); st != stars_.end())
            m.in_flight = st->second.in_flight(id);
        m.throughput_bps = static_cast<double>(m.measured_bits) / seconds;
        if (m.measured_delivered > 0)
            m.mean_latency_us = latency_sum_[id] / static_cast<double>(m.measured_delivered);
        result.flows.push_back(m);
    }
    for (const auto& [id, n] : nodes_) {
        const auto& a = n.association();
        AssociationRecord rec;
        rec.node = id;
        rec.join = s_.find_node(id)->join;
        rec.associated = a.associated;
        rec.gave_up = a.gave_up;
        rec.attempts = a.attempts;
        rec.failures = a.failures;
        rec.first_attempt = a.first_attempt;
        rec.access_time = a.associated ? a.access_time : std::nullopt;
        rec.completed = a.completed;
        result.associations.push_back(rec);
    }
    for (const auto& [_, q] : requests_)
        result.requests.push_back(q);

    global_.superframes = duration;
    global_.measured_superframes = duration - s_.effective_warmup();
    global_.revocations = pan_->revocations();
    result.global = global_;
    result.initial_allocations = setup_.cycle.allocations();
    result.final_allocations = pan_->cycle().allocations();
    result.setup_refusals = setup_.refusals;
    return result;
}

} // namespace

// ---------------------------------------------------------------------------

ScheduleSetup build_schedule(const Scenario& s, bool include_requested)
{
    ScheduleSetup out{schedule::ScheduleCycle(s.mac.superframe, s.schedule), {}, {}, {}, {}};
    auto& cycle = out.cycle;

    std::vector<StarSpec> stars = s.stars;
    std::sort(stars.begin(), stars.end(),
              [](const auto& a, const auto& b) { return raw(a.id) < raw(b.id); });
    for (const auto& st : stars)
        cycle.register_star(st.id);
    for (const auto& n : s.nodes) {
        if (cycle.knows_star(n.star))
            cycle.register_node(n.id, n.star);
    }
    for (const auto& [a, b] : s.interference)
        cycle.add_interference(a, b);

    if (s.mac.gbs_enabled) {
        for (const auto& st : stars) {
            const auto r = cycle.admit_gbs(st.id, schedule::ReservationLevel{st.gbs_level});
            if (const auto* a = std::get_if<Allocation>(&r))
                out.gbs[st.id] = a->id;
            else
                out.refusals.push_back(refusal_text("star " + std::to_string(raw(st.id)) + " gbs",
                                                    std::get<schedule::Refusal>(r)));
        }
    }

    std::vector<NodeSpec> nodes = s.nodes;
    std::sort(nodes.begin(), nodes.end(),
              [](const auto& a, const auto& b) { return raw(a.id) < raw(b.id); });
    for (const auto& n : nodes) {
        if (n.join != protocol::JoinMode::Pds || !n.pds_level)
            continue;
        const auto r = cycle.admit_pds(n.id, n.star, schedule::ReservationLevel{*n.pds_level});
        if (const auto* a = std::get_if<Allocation>(&r))
            out.pds_join[n.id] = a->id;
        else
            out.refusals.push_back(refusal_text("node " + std::to_string(raw(n.id)) + " pds",
                                                std::get<schedule::Refusal>(r)));
    }

    std::vector<FlowSpec> flows = s.flows;
    std::sort(flows.begin(), flows.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (const auto& f : flows) {
        if (f.mode == protocol::FlowMode::Cap || (f.dynamic_request && !include_requested))
            continue;
        const auto dir = s.direction_of(f);
        const DeviceId owner = dir == schedule::Direction::Downlink ? f.dst : f.src;
        const auto* node = s.find_node(owner);
        if (!node)
            continue;
        const schedule::ReservationLevel level{f.level};
        const auto r = f.mode == protocol::FlowMode::Pds
                           ? cycle.admit_pds(owner, node->star, level, dir)
                           : cycle.admit(schedule::AdmissionRequest{schedule::Kind::Gts, owner,
                                                                    node->star, level, dir});
        if (const auto* a = std::get_if<Allocation>(&r))
            out.flow_allocation[f.id] = a->id;
        else
            out.refusals.push_back(refusal_text("flow " + std::to_string(f.id),
                                                std::get<schedule::Refusal>(r)));
    }
    return out;
}

const FlowMetrics* RunResult::flow(std::uint32_t id) const
{
    auto it = std::find_if(flows.begin(), flows.end(), [id](const auto& f) { return f.flow_id == id; });
    return it == flows.end() ? nullptr : &*it;
}

const AssociationRecord* RunResult::association(DeviceId node) const
{
    auto it = std::find_if(associations.begin(), associations.end(),
                           [node](const auto& a) { return a.node == node; });
    return it == associations.end() ? nullptr : &*it;
}

RunResult run_scenario(const Scenario& scenario, std::ostream* trace)
{
    auto violations = validate(scenario);
    if (!violations.empty())
        throw ScenarioError(std::move(violations));
    Runner runner(scenario, trace);
    return runner.run();
}

} // namespace detmac::harness
