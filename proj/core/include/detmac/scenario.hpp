#pragma once

// Scenario description and its line-oriented text format:
//
//   [pan]            global parameters and the PAN coordinator id
//   [star <id>]      a star; <id> is the coordinator's device id
//   [node <id>]      an end node and the star it belongs to
//   [flow <id>]      one traffic flow
//   [links]          extra radio links ("range A B") and star interference
//                    edges ("interfere S1 S2")
//
// Lines hold "key = value" pairs; '#' starts a comment. README.md lists every key.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "detmac/ids.hpp"
#include "detmac/protocol.hpp"
#include "detmac/schedule.hpp"

namespace detmac::harness {

inline constexpr std::uint32_t kMaxDeviceId = 1023;

struct StarSpec
{
    StarId id{};
    int gbs_level = 0;
    int line = 0;
};

struct NodeSpec
{
    DeviceId id{};
    StarId star{};
    protocol::JoinMode join = protocol::JoinMode::Associated;
    std::optional<int> pds_level;
    int line = 0;
};

struct FlowSpec
{
    std::uint32_t id = 0;
    DeviceId src{};
    DeviceId dst{};
    int psdu = 127;
    bool acked = true;
    protocol::FlowMode mode = protocol::FlowMode::Gts;
    int level = 0;
    bool dynamic_request = false;
    int load = protocol::kSaturating; ///< frames per superframe or kSaturating
    std::int64_t start = 0;
    std::int64_t stop = -1;
    int line = 0;
};

struct Scenario
{
    std::string name = "scenario";
    DeviceId pan{0};
    protocol::MacParams mac;
    schedule::ScheduleConfig schedule;
    std::int64_t duration = 0; ///< superframes; 0 selects 2^(n_max+4)
    std::int64_t warmup = -1;  ///< superframes; -1 selects 2^n_max
    std::uint64_t seed = 1;
    std::vector<StarSpec> stars;
    std::vector<NodeSpec> nodes;
    std::vector<FlowSpec> flows;
    std::vector<std::pair<DeviceId, DeviceId>> ranges;
    std::vector<std::pair<StarId, StarId>> interference;

    std::int64_t effective_duration() const;
    std::int64_t effective_warmup() const;
    const StarSpec* find_star(StarId id) const;
    const NodeSpec* find_node(DeviceId id) const;
    /// Largest device id in use; sizes the medium.
    std::uint32_t max_device_id() const;
    /// Downlink when the source is a star coordinator, uplink otherwise.
    schedule::Direction direction_of(const FlowSpec& flow) const;
    /// Keeps mac.n_max and schedule.n_max in agreement.
    void set_n_max(int n);
};

struct ParseError
{
    int line = 0;
    std::string message;
};

struct ParseResult
{
    Scenario scenario;
    std::vector<ParseError> errors;

    bool ok() const noexcept { return errors.empty(); }
};

ParseResult parse_scenario(std::istream& in);
/// A missing file is reported as a line-0 error.
ParseResult parse_scenario_file(const std::string& path);

/// Every violated scenario invariant, one message each; empty when valid.
std::vector<std::string> validate(const Scenario& scenario);

/// Raised by run_scenario on an invalid scenario.
class ScenarioError : public std::runtime_error
{
public:
    explicit ScenarioError(std::vector<std::string> violations);
    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    std::vector<std::string> violations_;
};

} // namespace detmac::harness
