#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "detmac/csv.hpp"

namespace fs = std::filesystem;

namespace {

struct Run
{
    int status = -1;
    std::string out;
};

Run run_cli(const std::string& args)
{
    const std::string cmd = std::string(DETMAC_CLI) + " " + args + " 2>&1";
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p)
        return r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0)
        r.out.append(buf, n);
    const int st = pclose(p);
    r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
}

std::string data(const char* name) { return std::string(DETMAC_TEST_DATA) + "/" + name; }

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const char* name)
{
    auto dir = fs::temp_directory_path() / ("detmac_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir / name;
}

} // namespace

TEST(Cli, UsageErrorsExitTwo)
{
    EXPECT_EQ(run_cli("").status, 2);
    EXPECT_EQ(run_cli("frobnicate").status, 2);
    EXPECT_EQ(run_cli("simulate --seed 1").status, 2);
    EXPECT_EQ(run_cli("experiment fig5 --out /tmp").status, 2);
}

TEST(Cli, ValidateScheduleFeasible)
{
    const auto r = run_cli("validate-schedule --config " + data("feasible.scn"));
    EXPECT_EQ(r.status, 0);
    EXPECT_NE(r.out.find("occupancy star 1"), std::string::npos);
}

TEST(Cli, ValidateScheduleRefusal)
{
    const auto r = run_cli("validate-schedule --config " + data("oversubscribed.scn"));
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.out.find("flow 8: refused"), std::string::npos);
}

TEST(Cli, ParseErrorsNameFileAndLine)
{
    const auto r = run_cli("validate-schedule --config " + data("parse_errors.scn"));
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.out.find("parse_errors.scn:3:"), std::string::npos);
    EXPECT_NE(r.out.find("parse_errors.scn:14:"), std::string::npos);
}

TEST(Cli, InvalidScenarioRefused)
{
    const auto out = scratch("invalid.csv");
    const auto r = run_cli("simulate --config " + data("invalid.scn") + " --seed 1 --out " +
                          out.string());
    EXPECT_EQ(r.status, 1);
}

TEST(Cli, SimulateWritesCsvAndTrace)
{
    const auto csv = scratch("sim.csv");
    const auto trace = scratch("sim.trace");
    const auto r = run_cli("simulate --config " + data("feasible.scn") + " --seed 3 --trace " +
                          trace.string() + " --out " + csv.string());
    ASSERT_EQ(r.status, 0) << r.out;
    const auto text = slurp(csv);
    EXPECT_EQ(text.rfind(detmac::harness::kCsvHeader, 0), 0u);
    EXPECT_GT(slurp(trace).size(), 0u);

    const auto csv2 = scratch("sim2.csv");
    const auto trace2 = scratch("sim2.trace");
    run_cli("simulate --config " + data("feasible.scn") + " --seed 3 --trace " + trace2.string() +
           " --out " + csv2.string());
    EXPECT_EQ(slurp(csv), slurp(csv2));
    EXPECT_EQ(slurp(trace), slurp(trace2));
}

TEST(Cli, ExperimentFig4)
{
    const auto dir = scratch("fig4");
    const auto r = run_cli("experiment fig4 --out " + dir.string());
    ASSERT_EQ(r.status, 0) << r.out;
    const auto text = slurp(dir / "fig4.csv");
    EXPECT_EQ(text.rfind("psdu,host_delay_us,throughput_bps,ideal_throughput_bps\n", 0), 0u);
    EXPECT_NE(text.find("\n127,"), std::string::npos);
}
