#include "detmac/simcore.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

namespace detmac::sim {

std::uint64_t EventQueue::schedule(SimTime time, DeviceId target, EventKind kind,
                                   std::uint32_t code, std::uint64_t arg)
{
    if (time < now_) {
        throw std::logic_error("event scheduled at " + std::to_string(time.count()) +
                               " us, before current time " + std::to_string(now_.count()) + " us");
    }
    const auto ordinal = next_ordinal_++;
    const SimEvent ev{time, ordinal, target, kind, code, arg};
    std::uint32_t slot;
    if (free_.empty()) {
        slot = static_cast<std::uint32_t>(events_.size());
        events_.push_back(ev);
    } else {
        slot = free_.back();
        free_.pop_back();
        events_[slot] = ev;
    }
    push(Key{time, ordinal, slot});
    return ordinal;
}

void EventQueue::push(Key k)
{
    std::size_t i = heap_.size();
    heap_.push_back(k);
    while (i > 0) {
        const std::size_t parent = (i - 1) / 4;
        if (!k.before(heap_[parent]))
            break;
        heap_[i] = heap_[parent];
        i = parent;
    }
    heap_[i] = k;
}

std::uint32_t EventQueue::pop_min()
{
    const std::uint32_t slot = heap_.front().slot;
    const Key last = heap_.back();
    heap_.pop_back();
    const std::size_t n = heap_.size();
    if (n == 0)
        return slot;
    std::size_t i = 0;
    while (true) {
        const std::size_t first = 4 * i + 1;
        if (first >= n)
            break;
        std::size_t best = first;
        const std::size_t end = std::min(first + 4, n);
        for (std::size_t c = first + 1; c < end; ++c)
            if (heap_[c].before(heap_[best]))
                best = c;
        if (!heap_[best].before(last))
            break;
        heap_[i] = heap_[best];
        i = best;
    }
    heap_[i] = last;
    return slot;
}

void EventQueue::throw_backwards(SimTime t_end) const
{
    throw std::logic_error("run_until(" + std::to_string(t_end.count()) +
                           ") is before current time " + std::to_string(now_.count()));
}

Medium::Medium(std::size_t device_count)
    : range_(device_count, std::vector<char>(device_count, 0))
    , adjacency_(device_count)
{
}

std::size_t Medium::index(DeviceId d) const
{
    const auto i = static_cast<std::size_t>(raw(d));
    if (i >= range_.size())
        throw std::out_of_range("device " + std::to_string(raw(d)) + " not on the medium");
    return i;
}

void Medium::connect(DeviceId a, DeviceId b)
{
    const auto i = index(a);
    const auto j = index(b);
    if (i == j || range_[i][j])
        return;
    range_[i][j] = range_[j][i] = 1;
    auto insert_sorted = [](std::vector<DeviceId>& v, DeviceId d) {
        v.insert(std::upper_bound(v.begin(), v.end(), d), d);
    };
    insert_sorted(adjacency_[i], b);
    insert_sorted(adjacency_[j], a);
}

bool Medium::in_range(DeviceId a, DeviceId b) const { return range_[index(a)][index(b)] != 0; }

const std::vector<DeviceId>& Medium::neighbours(DeviceId d) const { return adjacency_[index(d)]; }

TxId Medium::begin_tx(DeviceId sender, SimTime start, SimTime end)
{
    index(sender);
    if (end <= start)
        throw std::logic_error("transmission with non-positive duration");
    for (const auto& t : txs_) {
        if (t.sender == sender && t.start < end && start < t.end) {
            throw std::logic_error("device " + std::to_string(raw(sender)) +
                                   " starts a transmission while already transmitting");
        }
    }
    const TxId id = next_id_++;
    txs_.push_back({id, sender, start, end, false});
    return id;
}

std::vector<Reception> Medium::end_tx(TxId id)
{
    auto it = std::find_if(txs_.begin(), txs_.end(), [id](const Transmission& t) { return t.id == id; });
    if (it == txs_.end() || it->finished)
        throw std::logic_error("end_tx on unknown transmission");
    it->finished = true;
    const Transmission tx = *it;

    std::vector<Reception> out;
    for (DeviceId rx : adjacency_[index(tx.sender)]) {
        RxOutcome outcome = RxOutcome::Ok;
        for (const auto& other : txs_) {
            if (other.id == tx.id || !(other.start < tx.end && tx.start < other.end))
                continue;
            if (other.sender == rx) {
                outcome = RxOutcome::HalfDuplex;
                break;
            }
            if (in_range(other.sender, rx))
                outcome = RxOutcome::Collision;
        }
        out.push_back({rx, outcome});
    }
    prune();
    return out;
}

void Medium::prune()
{
    SimTime horizon = SimTime::max();
    for (const auto& t : txs_)
        if (!t.finished)
            horizon = std::min(horizon, t.start);
    std::erase_if(txs_, [&](const Transmission& t) { return t.finished && t.end <= horizon; });
}

ChannelState Medium::cca(DeviceId device, SimTime t) const
{
    for (const auto& tx : txs_) {
        if (tx.start <= t && t < tx.end && tx.sender != device && in_range(tx.sender, device))
            return ChannelState::Busy;
    }
    return ChannelState::Idle;
}

bool Medium::transmitting(DeviceId device, SimTime t) const
{
    return std::any_of(txs_.begin(), txs_.end(), [&](const Transmission& tx) {
        return tx.sender == device && tx.start <= t && t < tx.end;
    });
}

std::size_t Medium::active_count() const
{
    return static_cast<std::size_t>(
        std::count_if(txs_.begin(), txs_.end(), [](const Transmission& t) { return !t.finished; }));
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x9E3779B9u};
    engine_.seed(seq);
}

std::uint64_t RngStream::uniform(std::uint64_t lo, std::uint64_t hi)
{
    if (hi < lo)
        throw std::invalid_argument("uniform: empty range");
    const std::uint64_t span = hi - lo;
    if (span == std::numeric_limits<std::uint64_t>::max())
        return engine_();
    const std::uint64_t n = span + 1;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                (std::numeric_limits<std::uint64_t>::max() % n);
    std::uint64_t v;
    do {
        v = engine_();
    } while (v >= limit);
    return lo + v % n;
}

} // namespace detmac::sim
