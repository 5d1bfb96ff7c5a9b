#pragma once

// Experiment presets: throughput versus PSDU size (analytic), single-GTS
// throughput versus beacon order (simulated), and reference-GTS throughput
// versus contention load (simulated). Plus the schedule validation report.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "detmac/csv.hpp"
#include "detmac/scenario.hpp"
#include "detmac/simulation.hpp"
#include "detmac/timing.hpp"

namespace detmac::harness {

// --- throughput versus PSDU size ------------------------------------------

inline constexpr double kFig4TargetBps = 120000.0;

struct Fig4Point
{
    int psdu = 0;
    Duration host_delay{};
    double throughput_bps = 0.0;
    double ideal_bps = 0.0; ///< same PSDU without host delay
};

/// PSDU sizes 8, 16, ..., 120 and 127.
std::vector<int> fig4_psdus();
/// Host delay that brings a 127-byte PSDU to the target throughput.
Duration fig4_calibrated_delay(const timing::PhyParams& phy = {});
std::vector<Fig4Point> experiment_fig4(const timing::PhyParams& phy = {});
void write_fig4(std::ostream& os, const std::vector<Fig4Point>& points);

// --- single GTS throughput versus BO ---------------------------------------

inline constexpr int kFig6MaxBo = 8;
inline constexpr std::int64_t kFig6Duration = 272;
/// A GTS exchange must end one long inter-frame spacing before the slot ends.
inline constexpr Duration kFig6Guard{640};

timing::PhyParams fig6_phy();
/// PSDU in [9, max] maximising delivered payload per slot; ties go to the
/// larger PSDU, and 127 when no PSDU fits.
int fig6_best_psdu(int bo, bool acked, const timing::PhyParams& phy);
double analytic_gts_bps(int psdu, bool acked, const timing::SuperframeConfig& sf,
                        const timing::PhyParams& phy, int level = 0);
Scenario fig6_scenario(int bo, bool acked, int psdu, std::uint64_t seed);

struct Fig6Point
{
    int bo = 0;
    bool acked = true;
    int psdu = 0;
    int frames_per_slot = 0;
    double analytic_bps = 0.0;
    FlowMetrics measured;
    CsvRow row;
};

std::vector<Fig6Point> experiment_fig6(std::uint64_t seed);
void write_fig6_analytic(std::ostream& os, const std::vector<Fig6Point>& points);

// --- reference GTS versus contention load ---------------------------------

inline constexpr std::array<int, 7> kFig7Contenders{0, 1, 2, 4, 8, 16, 32};
inline constexpr std::uint32_t kFig7ReferenceFlow = 1;
inline constexpr int kFig7Order = 3;

Scenario fig7_scenario(int contenders, std::uint64_t seed);

struct Fig7Point
{
    int contenders = 0;
    FlowMetrics reference;
    double cap_aggregate_bps = 0.0;
    std::vector<CsvRow> rows; ///< per flow plus one cap_aggregate row
};

Fig7Point run_fig7_point(int contenders, std::uint64_t seed);
std::vector<Fig7Point> experiment_fig7(std::uint64_t seed);

// --- drivers ---------------------------------------------------------------

/// Writes <dir>/fig4.csv, <dir>/fig6.csv + fig6_analytic.csv, or <dir>/fig7.csv.
/// Throws std::invalid_argument for an unknown experiment name.
void run_experiment(const std::string& name, const std::filesystem::path& dir, std::uint64_t seed);

struct ScheduleReport
{
    bool ok = false;
    std::vector<std::string> refusals;
    std::size_t double_occupied = 0;
};

/// Admits every declared reservation, prints the allocation dump and
/// occupancy matrix followed by any refusals.
ScheduleReport validate_schedule(const Scenario& scenario, std::ostream& out);

} // namespace detmac::harness
