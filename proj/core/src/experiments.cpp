#include "detmac/experiments.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "detmac/schedule.hpp"

namespace detmac::harness {

namespace {

std::ofstream open_out(const std::filesystem::path& p)
{
    std::ofstream os(p, std::ios::binary);
    if (!os)
        throw std::runtime_error("cannot write '" + p.string() + "'");
    return os;
}

} // namespace

// ---------------------------------------------------------------------------

std::vector<int> fig4_psdus()
{
    std::vector<int> v;
    for (int p = 8; p <= 120; p += 8)
        v.push_back(p);
    v.push_back(127);
    return v;
}

Duration fig4_calibrated_delay(const timing::PhyParams& phy)
{
    return timing::calibrate_host_delay(kFig4TargetBps, phy.max_psdu_bytes, phy);
}

std::vector<Fig4Point> experiment_fig4(const timing::PhyParams& phy)
{
    timing::PhyParams ideal = phy;
    ideal.host_delay = Duration::zero();
    timing::PhyParams calibrated = phy;
    calibrated.host_delay = fig4_calibrated_delay(ideal);

    std::vector<Fig4Point> out;
    for (int p : fig4_psdus()) {
        out.push_back(Fig4Point{p, calibrated.host_delay,
                                timing::unconstrained_throughput(p, calibrated),
                                timing::unconstrained_throughput(p, ideal)});
    }
    return out;
}

void write_fig4(std::ostream& os, const std::vector<Fig4Point>& points)
{
    os << "psdu,host_delay_us,throughput_bps,ideal_throughput_bps\n";
    for (const auto& p : points) {
        os << p.psdu << ',' << p.host_delay.count() << ',' << format_fixed(p.throughput_bps) << ','
           << format_fixed(p.ideal_bps) << '\n';
    }
}

// ---------------------------------------------------------------------------

timing::PhyParams fig6_phy()
{
    timing::PhyParams phy;
    phy.gts_guard = kFig6Guard;
    return phy;
}

double analytic_gts_bps(int psdu, bool acked, const timing::SuperframeConfig& sf,
                        const timing::PhyParams& phy, int level)
{
    const int k = timing::frames_per_slot(psdu, acked, sf, phy);
    const auto bi = timing::beacon_interval(sf.bo);
    return static_cast<double>(k) * psdu * 8.0 * 1e6 / static_cast<double>(bi.count()) /
           static_cast<double>(std::int64_t{1} << level);
}

int fig6_best_psdu(int bo, bool acked, const timing::PhyParams& phy)
{
    timing::SuperframeConfig sf;
    sf.bo = sf.so = bo;
    int best = phy.max_psdu_bytes;
    long best_bytes = 0;
    for (int p = protocol::kMacHeaderBytes + 1; p <= phy.max_psdu_bytes; ++p) {
        const long bytes = static_cast<long>(timing::frames_per_slot(p, acked, sf, phy)) * p;
        if (bytes > 0 && bytes >= best_bytes) {
            best_bytes = bytes;
            best = p;
        }
    }
    return best;
}

Scenario fig6_scenario(int bo, bool acked, int psdu, std::uint64_t seed)
{
    Scenario s;
    s.name = acked ? "fig6-acked" : "fig6-unacked";
    s.mac.superframe.bo = bo;
    s.mac.superframe.so = bo;
    s.mac.phy = fig6_phy();
    s.set_n_max(4);
    s.duration = kFig6Duration;
    s.seed = seed;
    s.pan = DeviceId{0};
    s.stars.push_back(StarSpec{StarId{1}, 0, 0});
    NodeSpec n;
    n.id = DeviceId{2};
    n.star = StarId{1};
    s.nodes.push_back(n);
    FlowSpec f;
    f.id = 1;
    f.src = DeviceId{2};
    f.dst = DeviceId{1};
    f.psdu = psdu;
    f.acked = acked;
    f.mode = protocol::FlowMode::Gts;
    f.level = 0;
    s.flows.push_back(f);
    return s;
}

std::vector<Fig6Point> experiment_fig6(std::uint64_t seed)
{
    std::vector<Fig6Point> out;
    const auto phy = fig6_phy();
    for (bool acked : {true, false}) {
        for (int bo = 0; bo <= kFig6MaxBo; ++bo) {
            Fig6Point p;
            p.bo = bo;
            p.acked = acked;
            p.psdu = fig6_best_psdu(bo, acked, phy);
            const auto s = fig6_scenario(bo, acked, p.psdu, seed);
            p.frames_per_slot = timing::frames_per_slot(p.psdu, acked, s.mac.superframe, phy);
            p.analytic_bps = analytic_gts_bps(p.psdu, acked, s.mac.superframe, phy);
            const auto result = run_scenario(s);
            p.measured = *result.flow(1);
            p.row = csv_rows(s, result).front();
            out.push_back(std::move(p));
        }
    }
    return out;
}

void write_fig6_analytic(std::ostream& os, const std::vector<Fig6Point>& points)
{
    os << "bo,acked,psdu,frames_per_slot,analytic_bps,simulated_bps\n";
    for (const auto& p : points) {
        os << p.bo << ',' << (p.acked ? 1 : 0) << ',' << p.psdu << ',' << p.frames_per_slot << ','
           << format_fixed(p.analytic_bps) << ',' << format_fixed(p.measured.throughput_bps)
           << '\n';
    }
}

// ---------------------------------------------------------------------------

Scenario fig7_scenario(int contenders, std::uint64_t seed)
{
    Scenario s;
    s.name = "fig7";
    s.mac.superframe.bo = kFig7Order;
    s.mac.superframe.so = kFig7Order;
    s.set_n_max(4);
    s.seed = seed;
    s.pan = DeviceId{0};
    s.stars.push_back(StarSpec{StarId{1}, 0, 0});

    NodeSpec ref;
    ref.id = DeviceId{2};
    ref.star = StarId{1};
    s.nodes.push_back(ref);
    FlowSpec rf;
    rf.id = kFig7ReferenceFlow;
    rf.src = ref.id;
    rf.dst = DeviceId{1};
    rf.psdu = 127;
    rf.acked = true;
    rf.mode = protocol::FlowMode::Gts;
    rf.level = 0;
    s.flows.push_back(rf);

    for (int i = 0; i < contenders; ++i) {
        NodeSpec n;
        n.id = DeviceId{static_cast<std::uint32_t>(3 + i)};
        n.star = StarId{1};
        s.nodes.push_back(n);
        FlowSpec f;
        f.id = kFig7ReferenceFlow + 1 + static_cast<std::uint32_t>(i);
        f.src = n.id;
        f.dst = DeviceId{1};
        f.psdu = 127;
        f.acked = true;
        f.mode = protocol::FlowMode::Cap;
        s.flows.push_back(f);
    }
    return s;
}

Fig7Point run_fig7_point(int contenders, std::uint64_t seed)
{
    const auto s = fig7_scenario(contenders, seed);
    const auto result = run_scenario(s);
    Fig7Point p;
    p.contenders = contenders;
    p.reference = *result.flow(kFig7ReferenceFlow);
    p.rows = csv_rows(s, result, contenders);

    CsvRow agg;
    agg.scenario = s.name;
    agg.flow_id = 0;
    agg.bo = s.mac.superframe.bo;
    agg.so = s.mac.superframe.so;
    agg.mode = "cap_aggregate";
    agg.psdu = 127;
    agg.acked = true;
    agg.contenders = contenders;
    double latency_weight = 0.0;
    std::uint64_t measured = 0;
    for (const auto& m : result.flows) {
        if (m.flow_id == kFig7ReferenceFlow)
            continue;
        const auto& row = *std::find_if(p.rows.begin(), p.rows.end(),
                                        [&](const auto& r) { return r.flow_id == m.flow_id; });
        agg.offered_bps += row.offered_bps;
        agg.delivered_bps += m.throughput_bps;
        agg.max_latency_us = std::max(agg.max_latency_us, m.max_latency_us);
        agg.sent += m.sent;
        agg.delivered += m.delivered;
        agg.dropped += m.dropped;
        agg.collisions += m.collisions;
        latency_weight += m.mean_latency_us * static_cast<double>(m.measured_delivered);
        measured += m.measured_delivered;
    }
    if (measured > 0)
        agg.mean_latency_us = latency_weight / static_cast<double>(measured);
    p.cap_aggregate_bps = agg.delivered_bps;
    p.rows.push_back(agg);
    return p;
}

std::vector<Fig7Point> experiment_fig7(std::uint64_t seed)
{
    std::vector<Fig7Point> out;
    for (int c : kFig7Contenders)
        out.push_back(run_fig7_point(c, seed));
    return out;
}

// ---------------------------------------------------------------------------

void run_experiment(const std::string& name, const std::filesystem::path& dir, std::uint64_t seed)
{
    if (name != "fig4" && name != "fig6" && name != "fig7")
        throw std::invalid_argument("unknown experiment '" + name + "'");
    std::filesystem::create_directories(dir);
    if (name == "fig4") {
        auto os = open_out(dir / "fig4.csv");
        write_fig4(os, experiment_fig4());
    } else if (name == "fig6") {
        const auto points = experiment_fig6(seed);
        std::vector<CsvRow> rows;
        for (const auto& p : points)
            rows.push_back(p.row);
        auto os = open_out(dir / "fig6.csv");
        write_csv(os, rows);
        auto an = open_out(dir / "fig6_analytic.csv");
        write_fig6_analytic(an, points);
    } else {
        std::vector<CsvRow> rows;
        for (const auto& p : experiment_fig7(seed))
            rows.insert(rows.end(), p.rows.begin(), p.rows.end());
        auto os = open_out(dir / "fig7.csv");
        write_csv(os, rows);
    }
}

ScheduleReport validate_schedule(const Scenario& scenario, std::ostream& out)
{
    const auto setup = build_schedule(scenario, true);
    schedule::write_dump(out, setup.cycle);
    ScheduleReport r;
    r.refusals = setup.refusals;
    r.double_occupied = schedule::count_double_occupied(schedule::occupancy(setup.cycle));
    for (const auto& msg : r.refusals)
        out << msg << '\n';
    if (r.double_occupied > 0)
        out << "double-occupied cells: " << r.double_occupied << '\n';
    r.ok = r.refusals.empty() && r.double_occupied == 0;
    return r;
}

} // namespace detmac::harness
