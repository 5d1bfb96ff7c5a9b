#pragma once

// Result rows in the fixed CSV column order shared by every command.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "detmac/scenario.hpp"
#include "detmac/simulation.hpp"

namespace detmac::harness {

inline constexpr const char* kCsvHeader =
    "scenario,flow_id,bo,so,mode,level,psdu,acked,contenders,offered_bps,delivered_bps,"
    "mean_latency_us,max_latency_us,sent,delivered,dropped,collisions";

struct CsvRow
{
    std::string scenario;
    std::uint32_t flow_id = 0;
    int bo = 0;
    int so = 0;
    std::string mode;
    std::string level; ///< empty for contention flows
    int psdu = 0;
    bool acked = true;
    int contenders = 0;
    double offered_bps = 0.0;
    double delivered_bps = 0.0;
    double mean_latency_us = 0.0;
    std::int64_t max_latency_us = 0;
    std::uint64_t sent = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
    std::uint64_t collisions = 0;
};

/// Offered load of a flow: the unconstrained rate when saturating, else
/// frames per superframe over the beacon interval.
double offered_bps(const Scenario& scenario, const FlowSpec& flow);

/// One row per flow of the run, ascending flow id.
std::vector<CsvRow> csv_rows(const Scenario& scenario, const RunResult& result, int contenders = 0);

/// Fixed three-decimal rendering used for every floating-point column.
std::string format_fixed(double v);

/// Writes the header and the rows sorted by (contenders, bo, so, scenario,
/// flow_id, mode), so the output never depends on production order.
void write_csv(std::ostream& os, std::vector<CsvRow> rows);

} // namespace detmac::harness
