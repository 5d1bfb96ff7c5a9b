#include "detmac/protocol.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace detmac::protocol {

namespace {

template <class... Ts>
struct overloaded : Ts...
{
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr Duration kOneTick{1};

Frame make_ack(DeviceId self, const Frame& to, const MacContext& ctx)
{
    return make_frame(self, to.src, to.seq, AckPayload{ctx.phy().ack_psdu_bytes},
                      ctx.phy().max_psdu_bytes);
}

/// Entries a beacon may carry so that it still fits in one slot.
int beacon_entry_limit(const MacContext& ctx, int fixed_bytes)
{
    const int psdu = ctx.max_psdu_within(ctx.grid().slot_duration);
    return std::max(0, (psdu - fixed_bytes) / kBeaconEntryBytes);
}

} // namespace

void validate(const CsmaParams& c)
{
    if (c.min_be < 0 || c.min_be > c.max_be)
        throw std::domain_error("csma: need 0 <= min_be <= max_be");
    if (c.max_be > 8)
        throw std::domain_error("csma: max_be above 8");
    if (c.max_backoffs < 0)
        throw std::domain_error("csma: max_backoffs negative");
    if (c.backoff_unit <= Duration::zero())
        throw std::domain_error("csma: backoff unit must be positive");
}

// ---------------------------------------------------------------------------

MacContext::MacContext(MacParams params) : params_(std::move(params))
{
    timing::validate(params_.superframe);
    timing::validate(params_.phy);
    validate(params_.csma);
    if (params_.retry_limit < 0)
        throw std::domain_error("retry limit negative");
    if (params_.n_max < 0 || params_.n_max > 14)
        throw std::domain_error("n_max outside [0, 14]");
    if (params_.assoc_max_attempts < 1)
        throw std::domain_error("association attempts must be at least 1");
    grid_ = timing::build_grid(params_.superframe);
}

std::optional<int> MacContext::slot_of(SimTime t) const
{
    const auto off = t % grid_.beacon_interval;
    if (off >= grid_.active_portion)
        return std::nullopt;
    return static_cast<int>(off / grid_.slot_duration);
}

int MacContext::max_psdu_within(Duration d) const
{
    int lo = 0;
    for (int p = 1; p <= params_.phy.max_psdu_bytes; ++p) {
        if (airtime(p) > d)
            break;
        lo = p;
    }
    return lo;
}

const char* to_string(FlowMode m) noexcept
{
    switch (m) {
    case FlowMode::Gts: return "gts";
    case FlowMode::Pds: return "pds";
    case FlowMode::Cap: return "cap";
    }
    return "?";
}

const char* to_string(JoinMode m) noexcept
{
    switch (m) {
    case JoinMode::Associated: return "associated";
    case JoinMode::Contention: return "contention";
    case JoinMode::Pds: return "pds";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// CSMA/CA

SimTime backoff_boundary(SimTime t, SimTime cap_start, Duration unit)
{
    if (t <= cap_start)
        return cap_start;
    const auto elapsed = t - cap_start;
    const auto periods = (elapsed + unit - kOneTick) / unit;
    return cap_start + unit * periods;
}

CsmaProcedure::CsmaProcedure(CsmaParams params) : params_(params), be_(params.min_be) {}

CsmaProcedure::Step CsmaProcedure::start(SimTime now, CapWindow window, Duration tx_span,
                                         sim::RngStream& rng)
{
    nb_ = 0;
    be_ = params_.min_be;
    return draw(now, window, tx_span, rng);
}

CsmaProcedure::Step CsmaProcedure::resume(SimTime now, CapWindow window, Duration tx_span,
                                          sim::RngStream& rng)
{
    return draw(now, window, tx_span, rng);
}

CsmaProcedure::Step CsmaProcedure::on_cca(bool idle, SimTime now, CapWindow window,
                                          Duration tx_span, Duration turnaround,
                                          sim::RngStream& rng)
{
    if (idle)
        return {StepKind::TransmitAt, now + turnaround};
    ++nb_;
    be_ = std::min(be_ + 1, params_.max_be);
    if (nb_ > params_.max_backoffs)
        return {StepKind::ChannelAccessFailure, now};
    return draw(now, window, tx_span, rng);
}

CsmaProcedure::Step CsmaProcedure::draw(SimTime now, CapWindow window, Duration tx_span,
                                        sim::RngStream& rng)
{
    const auto periods = rng.uniform(0, (std::uint64_t{1} << be_) - 1);
    const SimTime boundary = backoff_boundary(std::max(now, window.start), window.start,
                                              params_.backoff_unit);
    const SimTime cca_at = boundary + params_.backoff_unit * static_cast<std::int64_t>(periods);
    if (cca_at + tx_span > window.end)
        return {StepKind::Deferred, window.end};
    return {StepKind::CcaAt, cca_at};
}

// ---------------------------------------------------------------------------
// FlowSender

FlowSender::FlowSender(DeviceId self, const MacContext& ctx) : self_(self), ctx_(&ctx) {}

void FlowSender::add_flow(const FlowConfig& flow)
{
    flows_[flow.index] = FlowState{flow, {}, 0};
}

FlowState& FlowSender::flow(std::uint32_t index)
{
    auto it = flows_.find(index);
    if (it == flows_.end())
        throw std::out_of_range("unknown flow " + std::to_string(index));
    return it->second;
}

void FlowSender::generate(std::int64_t sf, SimTime now)
{
    current_sf_ = sf;
    for (auto& [_, fs] : flows_) {
        if (!fs.config.active_in(sf))
            continue;
        if (fs.config.frames_per_superframe == kSaturating) {
            refill(fs, now);
            continue;
        }
        for (int i = 0; i < fs.config.frames_per_superframe; ++i)
            fs.queue.push_back(QueuedFrame{fs.generated++, now, 0});
    }
}

void FlowSender::refill(FlowState& fs, SimTime now)
{
    if (fs.config.frames_per_superframe == kSaturating && fs.queue.empty() &&
        fs.config.active_in(current_sf_))
        fs.queue.push_back(QueuedFrame{fs.generated++, now, 0});
}

Frame FlowSender::make_data(std::uint32_t index, AllocationId alloc, std::uint32_t seq) const
{
    const auto& fs = flows_.at(index);
    const auto& head = fs.queue.front();
    DataPayload p{index,
                  head.number,
                  head.enqueued,
                  fs.config.acked,
                  alloc,
                  fs.config.psdu - kMacHeaderBytes};
    return make_frame(self_, fs.config.dst, seq, p, ctx_->phy().max_psdu_bytes);
}

QueuedFrame* FlowSender::head(std::uint32_t index)
{
    auto it = flows_.find(index);
    if (it == flows_.end() || it->second.queue.empty())
        return nullptr;
    return &it->second.queue.front();
}

void FlowSender::mark_attempt(std::uint32_t index, SimTime now, Outbox& out)
{
    auto& head = flow(index).queue.front();
    if (head.attempts++ == 0)
        out.emplace_back(Report{ReportKind::FrameSent, self_, index, now});
}

void FlowSender::complete_head(std::uint32_t index, Completion how, SimTime now, Outbox& out)
{
    auto& fs = flow(index);
    const auto head = fs.queue.front();
    fs.queue.pop_front();
    if (how == Completion::Delivered) {
        Report r{ReportKind::FrameDelivered, self_, index, now};
        r.latency = now - head.enqueued;
        r.attempts = head.attempts;
        out.emplace_back(r);
    } else if (how == Completion::Dropped) {
        Report r{ReportKind::FrameDropped, self_, index, now};
        r.attempts = head.attempts;
        out.emplace_back(r);
    }
    refill(fs, now);
}

std::uint64_t FlowSender::in_flight(std::uint32_t index) const
{
    auto it = flows_.find(index);
    if (it == flows_.end())
        return 0;
    return static_cast<std::uint64_t>(std::count_if(
        it->second.queue.begin(), it->second.queue.end(),
        [](const QueuedFrame& f) { return f.attempts > 0; }));
}

bool FlowSender::start_gts(std::uint32_t index, AllocationId alloc, SimTime slot_start,
                           SimTime slot_end, SimTime now, std::uint32_t& seq_counter, Outbox& out)
{
    if (session_ || !has_flow(index))
        return false;
    session_ = Session{index, alloc, slot_start, slot_end, 0, 0, false};
    return send_next(now, seq_counter, out);
}

bool FlowSender::send_next(SimTime now, std::uint32_t& seq_counter, Outbox& out)
{
    auto& s = *session_;
    auto& fs = flows_.at(s.flow);
    if (fs.queue.empty()) {
        session_.reset();
        return false;
    }
    const auto& phy = ctx_->phy();
    const Duration cycle = timing::exchange_duration(fs.config.psdu, fs.config.acked, phy);
    const SimTime begin = s.slot_start + cycle * s.index;
    if (begin + cycle > s.slot_end - phy.gts_guard) {
        session_.reset();
        return false;
    }
    const SimTime tx = std::max(begin + phy.host_delay, now);
    s.seq = seq_counter++;
    s.awaiting_ack = fs.config.acked;
    Frame f = make_data(s.flow, s.alloc, s.seq);
    mark_attempt(s.flow, now, out);
    out.emplace_back(Transmit{std::move(f), tx});
    return true;
}

bool FlowSender::on_tx_end(const Frame& frame, SimTime now, std::uint32_t& seq_counter,
                           Outbox& out)
{
    if (!session_ || frame.kind != FrameKind::Data || frame.seq != session_->seq)
        return false;
    if (session_->awaiting_ack) {
        const auto& phy = ctx_->phy();
        out.emplace_back(SetTimer{now + phy.turnaround_time + ctx_->ack_airtime() + kOneTick,
                                  TimerTag::AckTimeout, frame.seq});
        return true;
    }
    complete_head(session_->flow, Completion::Unconfirmed, now, out);
    ++session_->index;
    send_next(now, seq_counter, out);
    return true;
}

bool FlowSender::on_ack(std::uint32_t seq, SimTime now, std::uint32_t& seq_counter, Outbox& out)
{
    if (!session_ || !session_->awaiting_ack || seq != session_->seq)
        return false;
    session_->awaiting_ack = false;
    complete_head(session_->flow, Completion::Delivered, now, out);
    ++session_->index;
    send_next(now, seq_counter, out);
    return true;
}

bool FlowSender::on_ack_timeout(std::uint32_t seq, SimTime now, Outbox& out)
{
    if (!session_ || !session_->awaiting_ack || seq != session_->seq)
        return false;
    const auto index = session_->flow;
    session_.reset();
    const auto& head = flows_.at(index).queue.front();
    if (head.attempts > ctx_->params().retry_limit)
        complete_head(index, Completion::Dropped, now, out);
    return true;
}

// ---------------------------------------------------------------------------
// EndNode

EndNode::EndNode(EndNodeConfig config, const MacContext& ctx, sim::RngStream rng)
    : id_(config.id),
      star_(config.star),
      coordinator_(coordinator_of(config.star)),
      join_(config.join),
      ctx_(&ctx),
      rng_(std::move(rng)),
      flows_(config.id, ctx),
      csma_(ctx.params().csma)
{
    for (const auto& f : config.flows) {
        flows_.add_flow(f);
        if (f.dynamic_request && f.mode != FlowMode::Cap)
            requests_[f.index] = RequestState::None;
    }
    for (const auto& [a, flow] : config.leases) {
        leases_[a.id] = a;
        if (flow) {
            lease_flow_[a.id] = *flow;
            if (requests_.contains(*flow))
                requests_[*flow] = RequestState::Granted;
        }
    }
    if (join_ == JoinMode::Associated) {
        assoc_.associated = true;
        synced_ = true;
        beacon_ = config.beacon;
    }
}

std::uint64_t EndNode::in_flight(std::uint32_t flow) const { return flows_.in_flight(flow); }

void EndNode::report(Outbox& out, ReportKind kind, SimTime now, std::uint32_t flow) const
{
    out.emplace_back(Report{kind, id_, flow, now});
}

CapWindow EndNode::cap_window() const { return {ctx_->cap_start(sf_), ctx_->cap_end(sf_)}; }

void EndNode::on_superframe_start(std::int64_t sf, SimTime now, Outbox& out)
{
    sf_ = sf;
    scheduled_.clear();
    if (assoc_.associated) {
        flows_.generate(sf, now);
        for (auto& [flow, state] : requests_) {
            if (state == RequestState::None && flows_.flows().at(flow).config.active_in(sf)) {
                state = RequestState::Queued;
                cap_mgmt_.push_back(CapItem{CapItem::Type::GtsRequest, flow});
            }
        }
    }
    if (assoc_.awaiting_response && beacon_ &&
        sf > assoc_.awaiting_since + 2 * beacon_->level.period()) {
        assoc_.awaiting_response = false;
        assoc_failed(now, out);
    }
    maybe_queue_association(out, now);

    for (const auto& [_, a] : leases_)
        schedule_lease(a, now, out);

    if (beacon_) {
        const bool legacy = !ctx_->params().gbs_enabled;
        if (legacy || beacon_->occurs_in(sf)) {
            const SimTime check =
                legacy ? ctx_->superframe_start(sf) + ctx_->grid().active_portion - kOneTick
                       : ctx_->slot_end(sf, beacon_->slot) - kOneTick;
            out.emplace_back(SetTimer{check, TimerTag::BeaconCheck, static_cast<std::uint64_t>(sf)});
        }
    }
    if (synced_ && (cap_phase_ == CapPhase::Idle || cap_phase_ == CapPhase::Deferred) &&
        (cap_current_ || next_cap_item()))
        out.emplace_back(SetTimer{ctx_->cap_start(sf), TimerTag::CapStart, 0});
}

bool EndNode::assoc_pending_in_cap() const
{
    const auto is_assoc = [](const CapItem& c) { return c.type == CapItem::Type::AssocRequest; };
    return (cap_current_ && is_assoc(*cap_current_)) ||
           std::any_of(cap_mgmt_.begin(), cap_mgmt_.end(), is_assoc);
}

void EndNode::maybe_queue_association(Outbox& out, SimTime now)
{
    if (join_ != JoinMode::Contention || assoc_.associated || assoc_.gave_up || !synced_ ||
        assoc_.awaiting_response || assoc_pending_in_cap())
        return;
    if (assoc_.attempts >= ctx_->params().assoc_max_attempts) {
        assoc_.gave_up = true;
        report(out, ReportKind::AssocGaveUp, now);
        return;
    }
    if (!assoc_.first_attempt)
        assoc_.first_attempt = now;
    cap_mgmt_.push_back(CapItem{CapItem::Type::AssocRequest, 0});
}

void EndNode::assoc_failed(SimTime now, Outbox& out)
{
    ++assoc_.failures;
    Report r{ReportKind::AssocAttemptFailed, id_, 0, now};
    r.attempts = assoc_.attempts;
    out.emplace_back(r);
    if (assoc_.attempts >= ctx_->params().assoc_max_attempts && !assoc_.gave_up) {
        assoc_.gave_up = true;
        report(out, ReportKind::AssocGaveUp, now);
    }
}

void EndNode::schedule_lease(const schedule::Allocation& a, SimTime now, Outbox& out)
{
    if (!schedule::occurs_in(a, sf_))
        return;
    const SimTime t = ctx_->slot_start(sf_, a.slot);
    if (t < now)
        return;
    if (scheduled_.insert(a.id).second)
        out.emplace_back(SetTimer{t, TimerTag::GtsSlot, raw(a.id)});
}

void EndNode::on_timer(TimerTag tag, std::uint64_t arg, SimTime now, Outbox& out)
{
    switch (tag) {
    case TimerTag::CapStart:
        maybe_start_cap(now, out);
        break;
    case TimerTag::GtsSlot:
        gts_slot(AllocationId{static_cast<std::uint32_t>(arg)}, now, out);
        break;
    case TimerTag::BeaconCheck:
        if (last_beacon_sf_ < static_cast<std::int64_t>(arg)) {
            synced_ = false;
            report(out, ReportKind::BeaconMissed, now);
        }
        break;
    case TimerTag::AckTimeout: {
        const auto seq = static_cast<std::uint32_t>(arg);
        if (cap_phase_ == CapPhase::AwaitingAck && seq == cap_seq_) {
            cap_failure(false, now, out);
        } else if (pds_assoc_seq_ && *pds_assoc_seq_ == seq) {
            pds_assoc_seq_.reset();
            assoc_failed(now, out);
        } else {
            flows_.on_ack_timeout(seq, now, out);
        }
        break;
    }
    case TimerTag::SlotEnd:
    case TimerTag::BeaconSlot:
        break;
    }
}

void EndNode::gts_slot(AllocationId id, SimTime now, Outbox& out)
{
    auto it = leases_.find(id);
    if (it == leases_.end() || !synced_)
        return;
    const auto& a = it->second;
    const SimTime slot_start = ctx_->slot_start(sf_, a.slot);
    const SimTime slot_end = ctx_->slot_end(sf_, a.slot);

    if (!assoc_.associated) {
        if (join_ != JoinMode::Pds || a.kind != schedule::Kind::Pds || a.owner != id_ ||
            pds_assoc_seq_ || assoc_.gave_up)
            return;
        const auto& phy = ctx_->phy();
        Frame f = make_frame(id_, coordinator_, next_seq_++, AssocRequestPayload{id},
                             phy.max_psdu_bytes);
        const Duration cycle = timing::exchange_duration(f.psdu_len, true, phy);
        if (slot_start + cycle > slot_end - phy.gts_guard)
            return;
        const SimTime tx = slot_start + phy.host_delay;
        if (!assoc_.first_attempt)
            assoc_.first_attempt = tx;
        ++assoc_.attempts;
        pds_assoc_seq_ = f.seq;
        pds_assoc_start_ = tx;
        out.emplace_back(Transmit{std::move(f), tx});
        return;
    }
    if (a.direction != schedule::Direction::Uplink)
        return;
    auto lf = lease_flow_.find(id);
    if (lf == lease_flow_.end())
        return;
    flows_.start_gts(lf->second, id, slot_start, slot_end, now, next_seq_, out);
}

std::optional<EndNode::CapItem> EndNode::next_cap_item() const
{
    if (!cap_mgmt_.empty())
        return cap_mgmt_.front();
    if (!assoc_.associated)
        return std::nullopt;
    for (const auto& [index, fs] : flows_.flows()) {
        if (fs.config.mode == FlowMode::Cap && !fs.queue.empty())
            return CapItem{CapItem::Type::Data, index};
    }
    return std::nullopt;
}

Frame EndNode::cap_frame(const CapItem& item, std::uint32_t seq) const
{
    const int max = ctx_->phy().max_psdu_bytes;
    switch (item.type) {
    case CapItem::Type::Data:
        return flows_.make_data(item.flow, AllocationId{0}, seq);
    case CapItem::Type::GtsRequest: {
        const auto& cfg = flows_.flows().at(item.flow).config;
        return make_frame(id_, coordinator_, seq,
                          GtsRequestPayload{item.flow, cfg.level, cfg.direction}, max);
    }
    case CapItem::Type::AssocRequest:
        break;
    }
    return make_frame(id_, coordinator_, seq, AssocRequestPayload{AllocationId{0}}, max);
}

Duration EndNode::cap_span(const CapItem& item) const
{
    const auto& phy = ctx_->phy();
    const Frame f = cap_frame(item, 0);
    Duration span = phy.turnaround_time + ctx_->airtime(f.psdu_len);
    const bool acked = item.type != CapItem::Type::Data ||
                       flows_.flows().at(item.flow).config.acked;
    if (acked)
        span += phy.turnaround_time + ctx_->ack_airtime();
    return span;
}

void EndNode::maybe_start_cap(SimTime now, Outbox& out)
{
    if (cap_phase_ != CapPhase::Idle && cap_phase_ != CapPhase::Deferred)
        return;
    if (!synced_)
        return;
    const CapWindow w = cap_window();
    if (now >= w.end)
        return;
    if (now < w.start) {
        if (cap_current_ || next_cap_item())
            out.emplace_back(SetTimer{w.start, TimerTag::CapStart, 0});
        return;
    }
    if (cap_phase_ == CapPhase::Deferred && cap_current_) {
        handle_csma_step(csma_.resume(now, w, cap_span(*cap_current_), rng_), now, out);
        return;
    }
    auto item = next_cap_item();
    if (!item)
        return;
    if (item->type != CapItem::Type::Data)
        cap_mgmt_.pop_front();
    cap_current_ = item;
    cap_retries_ = 0;
    if (item->type == CapItem::Type::Data)
        flows_.mark_attempt(item->flow, now, out);
    handle_csma_step(csma_.start(now + ctx_->phy().host_delay, w, cap_span(*item), rng_), now,
                     out);
}

void EndNode::handle_csma_step(CsmaProcedure::Step step, SimTime now, Outbox& out)
{
    switch (step.kind) {
    case CsmaProcedure::StepKind::CcaAt:
        cap_phase_ = CapPhase::Backoff;
        out.emplace_back(RequestCca{step.at});
        break;
    case CsmaProcedure::StepKind::Deferred:
        cap_phase_ = CapPhase::Deferred;
        break;
    case CsmaProcedure::StepKind::TransmitAt: {
        cap_seq_ = next_seq_++;
        Frame f = cap_frame(*cap_current_, cap_seq_);
        cap_tx_start_ = step.at;
        if (cap_current_->type == CapItem::Type::AssocRequest)
            ++assoc_.attempts;
        cap_phase_ = CapPhase::Transmitting;
        out.emplace_back(Transmit{std::move(f), step.at});
        break;
    }
    case CsmaProcedure::StepKind::ChannelAccessFailure:
        cap_failure(true, now, out);
        break;
    }
}

void EndNode::on_cca(sim::ChannelState state, SimTime now, Outbox& out)
{
    if (cap_phase_ != CapPhase::Backoff || !cap_current_)
        return;
    handle_csma_step(csma_.on_cca(state == sim::ChannelState::Idle, now, cap_window(),
                                  cap_span(*cap_current_), ctx_->phy().turnaround_time, rng_),
                     now, out);
}

void EndNode::cap_success(SimTime now, Outbox& out)
{
    const CapItem item = *cap_current_;
    switch (item.type) {
    case CapItem::Type::Data:
        flows_.complete_head(item.flow, Completion::Delivered, now, out);
        break;
    case CapItem::Type::GtsRequest:
        if (requests_[item.flow] == RequestState::Queued)
            requests_[item.flow] = RequestState::AwaitingGrant;
        report(out, ReportKind::GtsRequestAcked, now, item.flow);
        break;
    case CapItem::Type::AssocRequest:
        assoc_.awaiting_response = true;
        assoc_.awaiting_since = sf_;
        assoc_.access_time = cap_tx_start_;
        break;
    }
    finish_cap_item(now, out);
}

void EndNode::cap_failure(bool channel_access, SimTime now, Outbox& out)
{
    const CapItem item = *cap_current_;
    if (channel_access) {
        report(out, ReportKind::ChannelAccessFailure, now, item.flow);
    } else {
        if (item.type == CapItem::Type::AssocRequest)
            ++assoc_.failures;
        ++cap_retries_;
        const bool attempts_left =
            item.type != CapItem::Type::AssocRequest ||
            assoc_.attempts < ctx_->params().assoc_max_attempts;
        if (cap_retries_ <= ctx_->params().retry_limit && attempts_left) {
            handle_csma_step(csma_.start(now, cap_window(), cap_span(item), rng_), now, out);
            return;
        }
    }
    switch (item.type) {
    case CapItem::Type::Data:
        flows_.complete_head(item.flow, Completion::Dropped, now, out);
        break;
    case CapItem::Type::GtsRequest:
        requests_[item.flow] = RequestState::None;
        report(out, ReportKind::GtsRequestFailed, now, item.flow);
        break;
    case CapItem::Type::AssocRequest:
        if (channel_access) {
            assoc_failed(now, out);
        } else {
            Report r{ReportKind::AssocAttemptFailed, id_, 0, now};
            r.attempts = assoc_.attempts;
            out.emplace_back(r);
            if (assoc_.attempts >= ctx_->params().assoc_max_attempts && !assoc_.gave_up) {
                assoc_.gave_up = true;
                report(out, ReportKind::AssocGaveUp, now);
            }
        }
        break;
    }
    finish_cap_item(now, out);
}

void EndNode::finish_cap_item(SimTime now, Outbox& out)
{
    cap_current_.reset();
    cap_phase_ = CapPhase::Idle;
    cap_retries_ = 0;
    maybe_start_cap(now, out);
}

void EndNode::on_tx_end(const Frame& frame, SimTime now, Outbox& out)
{
    const auto& phy = ctx_->phy();
    const SimTime ack_deadline = now + phy.turnaround_time + ctx_->ack_airtime() + kOneTick;
    if (cap_phase_ == CapPhase::Transmitting && frame.seq == cap_seq_) {
        const bool acked = cap_current_->type != CapItem::Type::Data ||
                           flows_.flows().at(cap_current_->flow).config.acked;
        if (acked) {
            cap_phase_ = CapPhase::AwaitingAck;
            out.emplace_back(SetTimer{ack_deadline, TimerTag::AckTimeout, frame.seq});
        } else {
            flows_.complete_head(cap_current_->flow, Completion::Unconfirmed, now, out);
            finish_cap_item(now, out);
        }
        return;
    }
    if (pds_assoc_seq_ && *pds_assoc_seq_ == frame.seq) {
        out.emplace_back(SetTimer{ack_deadline, TimerTag::AckTimeout, frame.seq});
        return;
    }
    flows_.on_tx_end(frame, now, next_seq_, out);
}

void EndNode::on_receive(const Frame& frame, SimTime now, Outbox& out)
{
    if (frame.kind == FrameKind::Beacon) {
        on_beacon(frame, now, out);
        return;
    }
    if (frame.dst != id_)
        return;
    switch (frame.kind) {
    case FrameKind::Ack:
        if (cap_phase_ == CapPhase::AwaitingAck && frame.seq == cap_seq_) {
            cap_success(now, out);
        } else if (pds_assoc_seq_ && *pds_assoc_seq_ == frame.seq) {
            pds_assoc_seq_.reset();
            assoc_.associated = true;
            assoc_.access_time = pds_assoc_start_;
            assoc_.completed = now;
            Report r{ReportKind::Associated, id_, 0, now};
            r.access_time = pds_assoc_start_;
            r.attempts = assoc_.attempts;
            r.via_pds = true;
            out.emplace_back(r);
        } else {
            flows_.on_ack(frame.seq, now, next_seq_, out);
        }
        break;
    case FrameKind::Data: {
        const auto& p = std::get<DataPayload>(frame.payload);
        if (p.acked)
            out.emplace_back(Transmit{make_ack(id_, frame, *ctx_), now + ctx_->phy().turnaround_time});
        break;
    }
    default:
        break;
    }
}

void EndNode::on_beacon(const Frame& beacon, SimTime now, Outbox& out)
{
    if (beacon.src != coordinator_)
        return;
    const auto& p = std::get<BeaconPayload>(beacon.payload);
    if (p.superframe < last_beacon_sf_) {
        report(out, ReportKind::StaleBeacon, now);
        return;
    }
    synced_ = true;
    last_beacon_sf_ = p.superframe;
    beacon_ = p.schedule;

    for (const auto& e : p.entries) {
        switch (e.kind) {
        case EntryKind::Slot:
            if (e.allocation.owner == id_ && !leases_.contains(e.allocation.id))
                leases_[e.allocation.id] = e.allocation;
            break;
        case EntryKind::GtsGrant:
            if (e.node != id_ || lease_flow_.contains(e.allocation.id))
                break;
            leases_[e.allocation.id] = e.allocation;
            lease_flow_[e.allocation.id] = e.flow;
            requests_[e.flow] = RequestState::Granted;
            report(out, ReportKind::GtsGranted, now, e.flow);
            break;
        case EntryKind::GtsRefuse:
            if (e.node != id_ || !requests_.contains(e.flow) ||
                requests_[e.flow] == RequestState::Granted)
                break;
            requests_[e.flow] = RequestState::Refused;
            report(out, ReportKind::GtsRefused, now, e.flow);
            break;
        case EntryKind::AssocResponse:
            if (e.node == id_ && assoc_.awaiting_response && !assoc_.associated) {
                assoc_.associated = true;
                assoc_.awaiting_response = false;
                assoc_.completed = now;
                Report r{ReportKind::Associated, id_, 0, now};
                r.access_time = assoc_.access_time.value_or(now);
                r.attempts = assoc_.attempts;
                out.emplace_back(r);
            }
            break;
        case EntryKind::ReleaseNotice: {
            auto it = leases_.find(e.allocation.id);
            if (it == leases_.end())
                break;
            std::uint32_t flow = 0;
            if (auto lf = lease_flow_.find(it->first); lf != lease_flow_.end()) {
                flow = lf->second;
                if (requests_.contains(flow))
                    requests_[flow] = RequestState::None;
                lease_flow_.erase(lf);
            }
            leases_.erase(it);
            report(out, ReportKind::LeaseRevoked, now, flow);
            break;
        }
        }
    }
    for (const auto& [_, a] : leases_) {
        if (ctx_->slot_start(sf_, a.slot) > now)
            schedule_lease(a, now, out);
    }
    maybe_queue_association(out, now);
    maybe_start_cap(now, out);
}

// ---------------------------------------------------------------------------
// StarCoordinator

StarCoordinator::StarCoordinator(StarConfig config, const MacContext& ctx, sim::RngStream rng)
    : id_(config.id),
      ctx_(&ctx),
      rng_(std::move(rng)),
      beacon_(config.beacon),
      allocations_(std::move(config.allocations)),
      members_(std::move(config.members)),
      announcements_(config.announcements.begin(), config.announcements.end()),
      flows_(coordinator_of(config.id), ctx)
{
    for (const auto& f : config.downlink_flows) {
        flows_.add_flow(f);
        for (const auto& a : allocations_) {
            if (a.owner == f.dst && a.direction == schedule::Direction::Downlink &&
                !downlink_flow_.contains(a.id)) {
                downlink_flow_[a.id] = f.index;
                break;
            }
        }
    }
}

bool StarCoordinator::reserve_air(SimTime start, SimTime end)
{
    std::erase_if(committed_, [start](const auto& w) { return w.second <= start; });
    for (const auto& [s, e] : committed_) {
        if (start < e && s < end)
            return false;
    }
    committed_.emplace_back(start, end);
    return true;
}

void StarCoordinator::send_ack(const Frame& to, SimTime now, Outbox& out)
{
    const SimTime t = now + ctx_->phy().turnaround_time;
    if (reserve_air(t, t + ctx_->ack_airtime()))
        out.emplace_back(Transmit{make_ack(device(), to, *ctx_), t});
}

void StarCoordinator::on_superframe_start(std::int64_t sf, SimTime now, Outbox& out)
{
    sf_ = sf;
    if (ctx_->params().gbs_enabled) {
        if (sf - last_superbeacon_sf_ > ctx_->horizon())
            suspended_ = true;
    } else {
        beacon_.slot = static_cast<int>(
            rng_.uniform(1, static_cast<std::uint64_t>(ctx_->grid().slot_count() - 1)));
    }
    flows_.generate(sf, now);
    if (!suspended_ && beacon_.occurs_in(sf))
        out.emplace_back(SetTimer{ctx_->slot_start(sf, beacon_.slot), TimerTag::BeaconSlot, 0});
    for (const auto& a : allocations_) {
        if (a.kind == schedule::Kind::Gbs || !schedule::occurs_in(a, sf))
            continue;
        used_[a.id] = false;
        out.emplace_back(SetTimer{ctx_->slot_end(sf, a.slot) - kOneTick, TimerTag::SlotEnd, raw(a.id)});
        if (a.direction == schedule::Direction::Downlink && downlink_flow_.contains(a.id))
            out.emplace_back(SetTimer{ctx_->slot_start(sf, a.slot), TimerTag::GtsSlot, raw(a.id)});
    }
}

Frame StarCoordinator::build_beacon(std::int64_t sf)
{
    const int limit = beacon_entry_limit(*ctx_, kMacHeaderBytes);
    BeaconPayload p{id_, sf, ctx_->params().superframe.bo, ctx_->params().superframe.so, beacon_, {}};
    for (const auto& a : allocations_) {
        if (static_cast<int>(p.entries.size()) >= limit)
            break;
        if (a.kind != schedule::Kind::Gbs && schedule::occurs_in(a, sf))
            p.entries.push_back(BeaconEntry{EntryKind::Slot, a.owner, 0, a, {}});
    }
    while (!announcements_.empty() && static_cast<int>(p.entries.size()) < limit) {
        p.entries.push_back(announcements_.front());
        announcements_.pop_front();
    }
    return make_frame(device(), kBroadcast, next_seq_++, std::move(p), ctx_->phy().max_psdu_bytes);
}

void StarCoordinator::on_timer(TimerTag tag, std::uint64_t arg, SimTime now, Outbox& out)
{
    const AllocationId id{static_cast<std::uint32_t>(arg)};
    switch (tag) {
    case TimerTag::BeaconSlot: {
        if (suspended_)
            break;
        Frame f = build_beacon(sf_);
        if (reserve_air(now, now + ctx_->airtime(f.psdu_len)))
            out.emplace_back(Transmit{std::move(f), now});
        break;
    }
    case TimerTag::GtsSlot: {
        auto it = std::find_if(allocations_.begin(), allocations_.end(),
                               [id](const auto& a) { return a.id == id; });
        auto lf = downlink_flow_.find(id);
        if (it == allocations_.end() || lf == downlink_flow_.end())
            break;
        if (flows_.start_gts(lf->second, id, now, ctx_->slot_end(sf_, it->slot), now, next_seq_,
                             out))
            used_[id] = true;
        break;
    }
    case TimerTag::SlotEnd: {
        const bool present = std::any_of(allocations_.begin(), allocations_.end(),
                                         [id](const auto& a) { return a.id == id; });
        if (present)
            out.emplace_back(RelayToPan{id_, UsageReport{id, used_[id]}});
        break;
    }
    case TimerTag::AckTimeout:
        flows_.on_ack_timeout(static_cast<std::uint32_t>(arg), now, out);
        break;
    case TimerTag::BeaconCheck:
    case TimerTag::CapStart:
        break;
    }
}

void StarCoordinator::apply_decision(const BeaconEntry& entry)
{
    switch (entry.kind) {
    case EntryKind::GtsGrant: {
        const auto& a = entry.allocation;
        allocations_.push_back(a);
        if (a.direction == schedule::Direction::Downlink && flows_.has_flow(entry.flow))
            downlink_flow_[a.id] = entry.flow;
        relayed_.erase({entry.node, entry.flow});
        break;
    }
    case EntryKind::GtsRefuse:
        relayed_.erase({entry.node, entry.flow});
        break;
    case EntryKind::ReleaseNotice:
        std::erase_if(allocations_, [&](const auto& a) { return a.id == entry.allocation.id; });
        downlink_flow_.erase(entry.allocation.id);
        used_.erase(entry.allocation.id);
        break;
    default:
        break;
    }
    announcements_.push_back(entry);
}

void StarCoordinator::on_receive(const Frame& frame, SimTime now, Outbox& out)
{
    if (frame.kind == FrameKind::Superbeacon) {
        const auto& p = std::get<SuperbeaconPayload>(frame.payload);
        const bool was_suspended = suspended_;
        last_superbeacon_sf_ = p.superframe;
        suspended_ = false;
        for (const auto& g : p.gbs_table) {
            if (g.star == id_)
                beacon_ = BeaconSchedule{g.slot, g.level, g.phase};
        }
        for (const auto& d : p.decisions) {
            if (d.star == id_)
                apply_decision(d.entry);
        }
        if (was_suspended && beacon_.occurs_in(sf_) && ctx_->slot_start(sf_, beacon_.slot) > now)
            out.emplace_back(SetTimer{ctx_->slot_start(sf_, beacon_.slot), TimerTag::BeaconSlot, 0});
        return;
    }
    if (frame.kind == FrameKind::Beacon || frame.dst != device())
        return;
    switch (frame.kind) {
    case FrameKind::Data: {
        const auto& p = std::get<DataPayload>(frame.payload);
        if (p.acked)
            send_ack(frame, now, out);
        if (raw(p.allocation) != 0 && used_.contains(p.allocation))
            used_[p.allocation] = true;
        break;
    }
    case FrameKind::GtsRequest: {
        if (!members_.contains(frame.src))
            break;
        send_ack(frame, now, out);
        const auto& p = std::get<GtsRequestPayload>(frame.payload);
        if (relayed_.insert({frame.src, p.flow}).second)
            out.emplace_back(
                RelayToPan{id_, GtsRequestRelay{frame.src, p.flow, p.level, p.direction}});
        break;
    }
    case FrameKind::AssocRequest: {
        send_ack(frame, now, out);
        const auto& p = std::get<AssocRequestPayload>(frame.payload);
        const bool fresh = members_.insert(frame.src).second;
        if (raw(p.via) != 0) {
            if (used_.contains(p.via))
                used_[p.via] = true;
        } else if (fresh || std::none_of(announcements_.begin(), announcements_.end(),
                                         [&](const BeaconEntry& e) {
                                             return e.kind == EntryKind::AssocResponse &&
                                                    e.node == frame.src;
                                         })) {
            announcements_.push_back(BeaconEntry{EntryKind::AssocResponse, frame.src, 0, {}, {}});
        }
        break;
    }
    case FrameKind::Ack:
        flows_.on_ack(frame.seq, now, next_seq_, out);
        break;
    default:
        break;
    }
}

void StarCoordinator::on_tx_end(const Frame& frame, SimTime now, Outbox& out)
{
    flows_.on_tx_end(frame, now, next_seq_, out);
}

// ---------------------------------------------------------------------------
// PanCoordinator

PanCoordinator::PanCoordinator(DeviceId id, const MacContext& ctx, schedule::ScheduleCycle cycle,
                               schedule::LeaseBook leases, int inactivity_threshold)
    : id_(id),
      ctx_(&ctx),
      cycle_(std::move(cycle)),
      leases_(std::move(leases)),
      inactivity_threshold_(inactivity_threshold)
{
}

void PanCoordinator::on_relay(StarId from, const RelayMessage& message, SimTime now)
{
    std::visit(overloaded{
                   [&](const GtsRequestRelay& r) {
                       inbox_.push_back(Pending{now, r.node, from, r});
                   },
                   [&](const UsageReport& u) { leases_.record_occurrence(u.allocation, u.used); },
               },
               message);
}

void PanCoordinator::on_superframe_start(std::int64_t sf, SimTime now, Outbox& out)
{
    std::stable_sort(inbox_.begin(), inbox_.end(), [](const Pending& a, const Pending& b) {
        if (a.arrival != b.arrival)
            return a.arrival < b.arrival;
        return raw(a.requester) < raw(b.requester);
    });
    std::vector<Pending> later;
    for (const auto& p : inbox_) {
        if (p.arrival > now) {
            later.push_back(p);
            continue;
        }
        BeaconEntry entry{EntryKind::GtsRefuse, p.request.node, p.request.flow, {}, {}};
        try {
            if (cycle_.knows_star(p.star) && !cycle_.knows_node(p.request.node, p.star))
                cycle_.register_node(p.request.node, p.star);
            const auto result = cycle_.admit(
                schedule::AdmissionRequest{schedule::Kind::Gts, p.request.node, p.star,
                                           p.request.level, p.request.direction},
                sf);
            if (const auto* a = std::get_if<schedule::Allocation>(&result)) {
                leases_.open(a->id);
                entry.kind = EntryKind::GtsGrant;
                entry.allocation = *a;
            } else {
                entry.refusal = std::get<schedule::Refusal>(result).reason;
            }
        } catch (const std::domain_error&) {
            entry.refusal = schedule::RefusalReason::NoFreeSlot;
        }
        decisions_.push_back(PanDecision{p.star, entry});
    }
    inbox_ = std::move(later);

    if (sf > 0 && sf % ctx_->horizon() == 0) {
        const auto revoked = schedule::inactivity_sweep(cycle_, leases_, inactivity_threshold_, sf);
        for (const auto& a : revoked)
            decisions_.push_back(
                PanDecision{a.star, BeaconEntry{EntryKind::ReleaseNotice, a.owner, 0, a, {}}});
        revocations_ += revoked.size();
    }

    SuperbeaconPayload p;
    p.superframe = sf;
    p.bo = ctx_->params().superframe.bo;
    p.so = ctx_->params().superframe.so;
    for (const auto& a : cycle_.allocations()) {
        if (a.kind == schedule::Kind::Gbs)
            p.gbs_table.push_back(a);
    }
    const int limit =
        std::min(beacon_entry_capacity(ctx_->phy().max_psdu_bytes),
                 beacon_entry_limit(*ctx_, kMacHeaderBytes + kAllocationDigestBytes));
    const int room = std::max(0, limit - static_cast<int>(p.gbs_table.size()));
    while (!decisions_.empty() && static_cast<int>(p.decisions.size()) < room) {
        p.decisions.push_back(decisions_.front());
        decisions_.pop_front();
    }
    p.digest = allocation_digest(cycle_.allocations());
    if (p.gbs_table.size() > static_cast<std::size_t>(limit))
        p.gbs_table.resize(static_cast<std::size_t>(limit));
    out.emplace_back(Transmit{
        make_frame(id_, kBroadcast, next_seq_++, std::move(p), ctx_->phy().max_psdu_bytes), now});
}

} // namespace detmac::protocol
