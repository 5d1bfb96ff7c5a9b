#include "detmac/csv.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <tuple>

#include "detmac/timing.hpp"

namespace detmac::harness {

double offered_bps(const Scenario& s, const FlowSpec& f)
{
    if (f.load == protocol::kSaturating)
        return timing::unconstrained_throughput(f.psdu, s.mac.phy);
    const auto bi = timing::beacon_interval(s.mac.superframe.bo);
    return static_cast<double>(f.load) * f.psdu * 8.0 * 1e6 / static_cast<double>(bi.count());
}

std::vector<CsvRow> csv_rows(const Scenario& s, const RunResult& result, int contenders)
{
    std::vector<CsvRow> rows;
    for (const auto& m : result.flows) {
        const auto it = std::find_if(s.flows.begin(), s.flows.end(),
                                     [&](const auto& f) { return f.id == m.flow_id; });
        if (it == s.flows.end())
            continue;
        CsvRow r;
        r.scenario = s.name;
        r.flow_id = m.flow_id;
        r.bo = s.mac.superframe.bo;
        r.so = s.mac.superframe.so;
        r.mode = protocol::to_string(it->mode);
        if (it->mode != protocol::FlowMode::Cap)
            r.level = std::to_string(it->level);
        r.psdu = it->psdu;
        r.acked = it->acked;
        r.contenders = contenders;
        r.offered_bps = offered_bps(s, *it);
        r.delivered_bps = m.throughput_bps;
        r.mean_latency_us = m.mean_latency_us;
        r.max_latency_us = m.max_latency_us;
        r.sent = m.sent;
        r.delivered = m.delivered;
        r.dropped = m.dropped;
        r.collisions = m.collisions;
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string format_fixed(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

void write_csv(std::ostream& os, std::vector<CsvRow> rows)
{
    std::sort(rows.begin(), rows.end(), [](const CsvRow& a, const CsvRow& b) {
        return std::tie(a.contenders, a.bo, a.so, a.scenario, a.flow_id, a.mode) <
               std::tie(b.contenders, b.bo, b.so, b.scenario, b.flow_id, b.mode);
    });
    os << kCsvHeader << '\n';
    for (const auto& r : rows) {
        os << r.scenario << ',' << r.flow_id << ',' << r.bo << ',' << r.so << ',' << r.mode << ','
           << r.level << ',' << r.psdu << ',' << (r.acked ? 1 : 0) << ',' << r.contenders << ','
           << format_fixed(r.offered_bps) << ',' << format_fixed(r.delivered_bps) << ','
           << format_fixed(r.mean_latency_us) << ',' << r.max_latency_us << ',' << r.sent << ','
           << r.delivered << ',' << r.dropped << ',' << r.collisions << '\n';
    }
}

} // namespace detmac::harness
