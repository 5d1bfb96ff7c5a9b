#include "detmac/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "detmac/timing.hpp"

namespace detmac::harness {

namespace {

using Error = std::optional<std::string>;

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> words(const std::string& s)
{
    std::istringstream is(s);
    std::vector<std::string> out;
    for (std::string w; is >> w;)
        out.push_back(w);
    return out;
}

template <typename T>
std::optional<T> to_number(const std::string& s)
{
    T v{};
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || p != end)
        return std::nullopt;
    return v;
}

template <typename T>
Error set_int(T& field, const std::string& key, const std::string& value, std::int64_t lo,
              std::int64_t hi)
{
    const auto v = to_number<std::int64_t>(value);
    if (!v || *v < lo || *v > hi) {
        return key + ": expected an integer in [" + std::to_string(lo) + ", " +
               std::to_string(hi) + "], got '" + value + "'";
    }
    field = static_cast<T>(*v);
    return std::nullopt;
}

Error set_bool(bool& field, const std::string& key, const std::string& value)
{
    static const std::map<std::string, bool> names{{"true", true},  {"yes", true}, {"on", true},
                                                   {"1", true},     {"false", false},
                                                   {"no", false},   {"off", false},
                                                   {"0", false}};
    auto it = names.find(value);
    if (it == names.end())
        return key + ": expected a boolean, got '" + value + "'";
    field = it->second;
    return std::nullopt;
}

Error set_us(Duration& field, const std::string& key, const std::string& value, std::int64_t lo,
             std::int64_t hi)
{
    std::int64_t v = 0;
    if (auto e = set_int(v, key, value, lo, hi))
        return e;
    field = Duration{v};
    return std::nullopt;
}

constexpr std::int64_t kBig = 1'000'000'000;

Error apply_pan(Scenario& s, const std::string& key, const std::string& value)
{
    auto& sf = s.mac.superframe;
    auto& phy = s.mac.phy;
    auto& csma = s.mac.csma;
    if (key == "id")
        return set_int(s.pan, key, value, 0, kMaxDeviceId);
    if (key == "name") {
        if (value.empty() || value.find_first_of(", \t\"") != std::string::npos)
            return "name: must be a non-empty word without commas or quotes";
        s.name = value;
        return std::nullopt;
    }
    if (key == "bo")
        return set_int(sf.bo, key, value, 0, timing::kMaxOrder);
    if (key == "so")
        return set_int(sf.so, key, value, 0, timing::kMaxOrder);
    if (key == "slots")
        return set_int(sf.slots_per_superframe, key, value, 1, 15360);
    if (key == "min_cap_slots")
        return set_int(sf.min_cap_slots, key, value, 0, 15360);
    if (key == "n_max") {
        int n = 0;
        if (auto e = set_int(n, key, value, 0, 14))
            return e;
        s.set_n_max(n);
        return std::nullopt;
    }
    if (key == "max_gts")
        return set_int(s.schedule.max_gts_per_superframe, key, value, 0, 15360);
    if (key == "inactivity_threshold")
        return set_int(s.schedule.inactivity_threshold, key, value, 1, kBig);
    if (key == "phase_order") {
        if (value == "lowest")
            s.schedule.phase_order = schedule::PhaseOrder::Lowest;
        else if (value == "bit-reversed")
            s.schedule.phase_order = schedule::PhaseOrder::BitReversed;
        else
            return "phase_order: expected lowest or bit-reversed, got '" + value + "'";
        return std::nullopt;
    }
    if (key == "gbs")
        return set_bool(s.mac.gbs_enabled, key, value);
    if (key == "duration")
        return set_int(s.duration, key, value, 1, kBig);
    if (key == "warmup")
        return set_int(s.warmup, key, value, 0, kBig);
    if (key == "seed") {
        const auto v = to_number<std::uint64_t>(value);
        if (!v)
            return "seed: expected an unsigned integer, got '" + value + "'";
        s.seed = *v;
        return std::nullopt;
    }
    if (key == "host_delay_us")
        return set_us(phy.host_delay, key, value, 0, kBig);
    if (key == "guard_us")
        return set_us(phy.gts_guard, key, value, 0, kBig);
    if (key == "turnaround_us")
        return set_us(phy.turnaround_time, key, value, 0, kBig);
    if (key == "data_rate")
        return set_int(phy.data_rate_bps, key, value, 1, kBig);
    if (key == "phy_overhead")
        return set_int(phy.phy_overhead_bytes, key, value, 0, 1024);
    if (key == "max_psdu")
        return set_int(phy.max_psdu_bytes, key, value, 1, 65535);
    if (key == "ack_psdu")
        return set_int(phy.ack_psdu_bytes, key, value, 1, 65535);
    if (key == "min_be")
        return set_int(csma.min_be, key, value, 0, 8);
    if (key == "max_be")
        return set_int(csma.max_be, key, value, 0, 8);
    if (key == "max_backoffs")
        return set_int(csma.max_backoffs, key, value, 0, 64);
    if (key == "backoff_unit_us")
        return set_us(csma.backoff_unit, key, value, 1, kBig);
    if (key == "retry_limit")
        return set_int(s.mac.retry_limit, key, value, 0, 64);
    if (key == "assoc_attempts")
        return set_int(s.mac.assoc_max_attempts, key, value, 1, 1024);
    return "unknown key '" + key + "' in [pan]";
}

Error apply_star(StarSpec& star, const std::string& key, const std::string& value)
{
    if (key == "gbs_level")
        return set_int(star.gbs_level, key, value, 0, 14);
    return "unknown key '" + key + "' in [star]";
}

Error apply_node(NodeSpec& node, const std::string& key, const std::string& value)
{
    if (key == "star")
        return set_int(node.star, key, value, 0, kMaxDeviceId);
    if (key == "join") {
        if (value == "associated")
            node.join = protocol::JoinMode::Associated;
        else if (value == "contention")
            node.join = protocol::JoinMode::Contention;
        else if (value == "pds")
            node.join = protocol::JoinMode::Pds;
        else
            return "join: expected associated, contention or pds, got '" + value + "'";
        return std::nullopt;
    }
    if (key == "pds_level") {
        int n = 0;
        if (auto e = set_int(n, key, value, 0, 14))
            return e;
        node.pds_level = n;
        return std::nullopt;
    }
    return "unknown key '" + key + "' in [node]";
}

Error apply_flow(FlowSpec& flow, const std::string& key, const std::string& value)
{
    if (key == "src")
        return set_int(flow.src, key, value, 0, kMaxDeviceId);
    if (key == "dst")
        return set_int(flow.dst, key, value, 0, kMaxDeviceId);
    if (key == "psdu")
        return set_int(flow.psdu, key, value, 1, 65535);
    if (key == "acked")
        return set_bool(flow.acked, key, value);
    if (key == "mode") {
        if (value == "gts")
            flow.mode = protocol::FlowMode::Gts;
        else if (value == "pds")
            flow.mode = protocol::FlowMode::Pds;
        else if (value == "cap")
            flow.mode = protocol::FlowMode::Cap;
        else
            return "mode: expected gts, pds or cap, got '" + value + "'";
        return std::nullopt;
    }
    if (key == "level")
        return set_int(flow.level, key, value, 0, 14);
    if (key == "setup") {
        if (value == "static")
            flow.dynamic_request = false;
        else if (value == "request")
            flow.dynamic_request = true;
        else
            return "setup: expected static or request, got '" + value + "'";
        return std::nullopt;
    }
    if (key == "load") {
        if (value == "saturate") {
            flow.load = protocol::kSaturating;
            return std::nullopt;
        }
        return set_int(flow.load, key, value, 1, 100000);
    }
    if (key == "start")
        return set_int(flow.start, key, value, 0, kBig);
    if (key == "stop")
        return set_int(flow.stop, key, value, 1, kBig);
    return "unknown key '" + key + "' in [flow]";
}

Error apply_link(Scenario& s, const std::string& line)
{
    const auto w = words(line);
    if (w.size() != 3 || (w[0] != "range" && w[0] != "interfere"))
        return "expected 'range A B' or 'interfere S1 S2', got '" + line + "'";
    const auto a = to_number<std::uint32_t>(w[1]);
    const auto b = to_number<std::uint32_t>(w[2]);
    if (!a || !b || *a > kMaxDeviceId || *b > kMaxDeviceId)
        return "link endpoints must be device ids in [0, " + std::to_string(kMaxDeviceId) + "]";
    if (w[0] == "range")
        s.ranges.emplace_back(DeviceId{*a}, DeviceId{*b});
    else
        s.interference.emplace_back(StarId{*a}, StarId{*b});
    return std::nullopt;
}

} // namespace

// ---------------------------------------------------------------------------

std::int64_t Scenario::effective_duration() const
{
    return duration > 0 ? duration : std::int64_t{1} << (schedule.n_max + 4);
}

std::int64_t Scenario::effective_warmup() const
{
    return warmup >= 0 ? warmup : std::int64_t{1} << schedule.n_max;
}

const StarSpec* Scenario::find_star(StarId id) const
{
    auto it = std::find_if(stars.begin(), stars.end(), [id](const auto& s) { return s.id == id; });
    return it == stars.end() ? nullptr : &*it;
}

const NodeSpec* Scenario::find_node(DeviceId id) const
{
    auto it = std::find_if(nodes.begin(), nodes.end(), [id](const auto& n) { return n.id == id; });
    return it == nodes.end() ? nullptr : &*it;
}

std::uint32_t Scenario::max_device_id() const
{
    std::uint32_t m = raw(pan);
    for (const auto& s : stars)
        m = std::max(m, raw(s.id));
    for (const auto& n : nodes)
        m = std::max(m, raw(n.id));
    return m;
}

schedule::Direction Scenario::direction_of(const FlowSpec& flow) const
{
    return find_star(StarId{raw(flow.src)}) ? schedule::Direction::Downlink
                                           : schedule::Direction::Uplink;
}

void Scenario::set_n_max(int n)
{
    mac.n_max = n;
    schedule.n_max = n;
}

ScenarioError::ScenarioError(std::vector<std::string> violations)
    : std::runtime_error(violations.empty() ? "invalid scenario"
                                            : "invalid scenario: " + violations.front()),
      violations_(std::move(violations))
{
}

// ---------------------------------------------------------------------------

ParseResult parse_scenario(std::istream& in)
{
    enum class Section { None, Skip, Pan, Star, Node, Flow, Links };

    ParseResult r;
    Scenario& s = r.scenario;
    Section section = Section::None;
    bool pan_seen = false;
    std::set<std::uint32_t> star_ids, node_ids, flow_ids;
    auto error = [&r](int line, std::string msg) { r.errors.push_back({line, std::move(msg)}); };

    int lineno = 0;
    for (std::string raw_line; std::getline(in, raw_line);) {
        ++lineno;
        const auto hash = raw_line.find('#');
        const std::string line = trim(std::string_view(raw_line).substr(0, hash));
        if (line.empty())
            continue;

        if (line.front() == '[') {
            if (line.back() != ']') {
                error(lineno, "unterminated section header");
                section = Section::Skip;
                continue;
            }
            const auto w = words(line.substr(1, line.size() - 2));
            const std::string head = w.empty() ? "" : w[0];
            if ((head == "pan" || head == "links") && w.size() == 1) {
                if (head == "pan") {
                    if (pan_seen)
                        error(lineno, "duplicate [pan] section");
                    pan_seen = true;
                    section = Section::Pan;
                } else {
                    section = Section::Links;
                }
                continue;
            }
            if ((head == "star" || head == "node" || head == "flow") && w.size() == 2) {
                const auto id = to_number<std::uint32_t>(w[1]);
                if (!id || (head != "flow" && *id > kMaxDeviceId)) {
                    error(lineno, "invalid " + head + " id '" + w[1] + "'");
                    section = Section::Skip;
                    continue;
                }
                auto& seen = head == "star" ? star_ids : head == "node" ? node_ids : flow_ids;
                if (!seen.insert(*id).second) {
                    error(lineno, "duplicate [" + head + " " + w[1] + "]");
                    section = Section::Skip;
                    continue;
                }
                if (head == "star") {
                    s.stars.push_back(StarSpec{StarId{*id}, 0, lineno});
                    section = Section::Star;
                } else if (head == "node") {
                    NodeSpec n;
                    n.id = DeviceId{*id};
                    n.line = lineno;
                    s.nodes.push_back(n);
                    section = Section::Node;
                } else {
                    FlowSpec f;
                    f.id = *id;
                    f.line = lineno;
                    s.flows.push_back(f);
                    section = Section::Flow;
                }
                continue;
            }
            error(lineno, "unknown section '" + line + "'");
            section = Section::Skip;
            continue;
        }

        if (section == Section::Skip)
            continue;
        if (section == Section::None) {
            error(lineno, "content outside of any section");
            continue;
        }
        if (section == Section::Links) {
            if (auto e = apply_link(s, line))
                error(lineno, *e);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            error(lineno, "expected 'key = value'");
            continue;
        }
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        Error e;
        switch (section) {
        case Section::Pan: e = apply_pan(s, key, value); break;
        case Section::Star: e = apply_star(s.stars.back(), key, value); break;
        case Section::Node: e = apply_node(s.nodes.back(), key, value); break;
        case Section::Flow: e = apply_flow(s.flows.back(), key, value); break;
        default: break;
        }
        if (e)
            error(lineno, *e);
    }
    if (!pan_seen)
        error(0, "missing [pan] section");
    return r;
}

ParseResult parse_scenario_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        ParseResult r;
        r.errors.push_back({0, "cannot open '" + path + "'"});
        return r;
    }
    return parse_scenario(in);
}

// ---------------------------------------------------------------------------

std::vector<std::string> validate(const Scenario& s)
{
    std::vector<std::string> v;
    auto add = [&v](std::string m) { v.push_back(std::move(m)); };

    try {
        timing::validate(s.mac.superframe);
    } catch (const std::exception& e) {
        add(std::string("superframe: ") + e.what());
    }
    try {
        timing::validate(s.mac.phy);
    } catch (const std::exception& e) {
        add(std::string("phy: ") + e.what());
    }
    try {
        protocol::validate(s.mac.csma);
    } catch (const std::exception& e) {
        add(e.what());
    }
    if (s.mac.n_max != s.schedule.n_max)
        add("n_max differs between MAC and schedule configuration");
    if (s.effective_warmup() >= s.effective_duration())
        add("warmup (" + std::to_string(s.effective_warmup()) +
            " superframes) must be shorter than the duration (" +
            std::to_string(s.effective_duration()) + ")");

    std::map<std::uint32_t, std::string> owners;
    auto claim = [&](std::uint32_t id, const std::string& what) {
        auto [it, fresh] = owners.emplace(id, what);
        if (!fresh)
            add("device " + std::to_string(id) + " is declared as both " + it->second + " and " + what);
    };
    claim(raw(s.pan), "pan coordinator");
    for (const auto& st : s.stars)
        claim(raw(st.id), "star coordinator");
    for (const auto& n : s.nodes)
        claim(raw(n.id), "end node");

    const int n_max = s.schedule.n_max;
    for (const auto& st : s.stars) {
        if (st.gbs_level > n_max)
            add("star " + std::to_string(raw(st.id)) + ": gbs_level above n_max");
    }
    for (const auto& n : s.nodes) {
        const std::string who = "node " + std::to_string(raw(n.id));
        if (!s.find_star(n.star))
            add(who + ": references unknown star " + std::to_string(raw(n.star)));
        if (n.join == protocol::JoinMode::Pds && !n.pds_level)
            add(who + ": join = pds needs pds_level");
        if (n.pds_level && *n.pds_level > n_max)
            add(who + ": pds_level above n_max");
        if (n.pds_level && n.join != protocol::JoinMode::Pds)
            add(who + ": pds_level is only meaningful with join = pds");
    }

    for (const auto& f : s.flows) {
        const std::string who = "flow " + std::to_string(f.id);
        const auto* src_node = s.find_node(f.src);
        const auto* dst_node = s.find_node(f.dst);
        const bool uplink = src_node && coordinator_of(src_node->star) == f.dst &&
                            s.find_star(src_node->star);
        const bool downlink = dst_node && coordinator_of(dst_node->star) == f.src &&
                              s.find_star(dst_node->star);
        if (!uplink && !downlink)
            add(who + ": endpoints must be an end node and the coordinator of its star");
        if (f.psdu <= protocol::kMacHeaderBytes || f.psdu > s.mac.phy.max_psdu_bytes)
            add(who + ": psdu must be in [" + std::to_string(protocol::kMacHeaderBytes + 1) + ", " +
                std::to_string(s.mac.phy.max_psdu_bytes) + "]");
        if (f.level > n_max)
            add(who + ": level above n_max");
        if (f.dynamic_request && f.mode != protocol::FlowMode::Gts)
            add(who + ": setup = request is only available for gts flows");
        if (f.dynamic_request && downlink)
            add(who + ": setup = request needs an end node as source");
        if (f.mode == protocol::FlowMode::Cap && downlink)
            add(who + ": contention flows must originate at an end node");
        if (f.stop >= 0 && f.stop <= f.start)
            add(who + ": stop must be after start");
        if (src_node && src_node->join != protocol::JoinMode::Associated &&
            f.mode != protocol::FlowMode::Cap && !f.dynamic_request)
            add(who + ": static reservations need a pre-associated node");
    }

    for (const auto& [a, b] : s.ranges) {
        if (!owners.contains(raw(a)) || !owners.contains(raw(b)))
            add("range " + std::to_string(raw(a)) + " " + std::to_string(raw(b)) +
                ": unknown device");
        else if (a == b)
            add("range " + std::to_string(raw(a)) + " " + std::to_string(raw(b)) +
                ": a device is always in range of itself");
    }
    for (const auto& [a, b] : s.interference) {
        if (!s.find_star(a) || !s.find_star(b))
            add("interfere " + std::to_string(raw(a)) + " " + std::to_string(raw(b)) +
                ": unknown star");
    }
    return v;
}

} // namespace detmac::harness
