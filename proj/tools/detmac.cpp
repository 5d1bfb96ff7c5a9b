// detmac command-line interface.
//   simulate --config FILE --seed N [--trace FILE] --out FILE.csv
//   experiment {fig4|fig6|fig7} --out DIR [--seed N]
//   validate-schedule --config FILE
// Exit status: 0 success, 1 validation failure or refusal, 2 usage error.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "detmac/csv.hpp"
#include "detmac/experiments.hpp"
#include "detmac/scenario.hpp"
#include "detmac/simulation.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kUsage = 2;

using namespace detmac::harness;

std::optional<Scenario> load(const std::string& path)
{
    auto parsed = parse_scenario_file(path);
    for (const auto& e : parsed.errors)
        std::cerr << path << ':' << e.line << ": " << e.message << '\n';
    if (!parsed.ok())
        return std::nullopt;
    const auto violations = validate(parsed.scenario);
    for (const auto& v : violations)
        std::cerr << path << ": " << v << '\n';
    if (!violations.empty())
        return std::nullopt;
    return parsed.scenario;
}

int simulate(const std::string& config, std::uint64_t seed, const std::string& trace_path,
             const std::string& out_path)
{
    auto scenario = load(config);
    if (!scenario)
        return kInvalid;
    scenario->seed = seed;

    std::ofstream trace;
    if (!trace_path.empty()) {
        trace.open(trace_path, std::ios::binary);
        if (!trace) {
            std::cerr << "cannot write '" << trace_path << "'\n";
            return kUsage;
        }
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
        std::cerr << "cannot write '" << out_path << "'\n";
        return kUsage;
    }
    const auto result = run_scenario(*scenario, trace_path.empty() ? nullptr : &trace);
    write_csv(out, csv_rows(*scenario, result));
    for (const auto& r : result.setup_refusals)
        std::cerr << config << ": " << r << '\n';
    return result.setup_refusals.empty() ? kOk : kInvalid;
}

int validate_schedule_cmd(const std::string& config)
{
    auto scenario = load(config);
    if (!scenario)
        return kInvalid;
    const auto report = validate_schedule(*scenario, std::cout);
    return report.ok ? kOk : kInvalid;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Deterministic beacon-enabled MAC simulator"};
    app.require_subcommand(1);

    std::string config, trace, out, experiment;
    std::uint64_t seed = 1;

    auto* sim = app.add_subcommand("simulate", "Run one scenario and write per-flow CSV");
    sim->add_option("--config", config, "Scenario file")->required();
    sim->add_option("--seed", seed, "Random seed")->required();
    sim->add_option("--trace", trace, "Write the frame trace to FILE");
    sim->add_option("--out", out, "CSV output file")->required();

    auto* exp = app.add_subcommand("experiment", "Run an experiment preset");
    exp->add_option("name", experiment, "fig4, fig6 or fig7")
        ->required()
        ->check(CLI::IsMember({"fig4", "fig6", "fig7"}));
    exp->add_option("--out", out, "Output directory")->required();
    exp->add_option("--seed", seed, "Random seed");

    auto* val = app.add_subcommand("validate-schedule", "Admit all reservations and dump the schedule");
    val->add_option("--config", config, "Scenario file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*sim)
            return simulate(config, seed, trace, out);
        if (*exp) {
            run_experiment(experiment, out, seed);
            return kOk;
        }
        return validate_schedule_cmd(config);
    } catch (const ScenarioError& e) {
        for (const auto& v : e.violations())
            std::cerr << v << '\n';
        return kInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInvalid;
    }
}
