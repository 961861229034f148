#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gridloop/agent.hpp"
#include "gridloop/microgrid.hpp"
#include "gridloop/netem.hpp"

namespace gridloop::orch {

struct SyntaxError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class RunMode { virtual_time, realtime };
enum class Site { sim, gateway };

struct DisturbanceSpec {
    Micros t_us = 0;
    grid::Action action = grid::Action::connect;
    grid::Target target = grid::Target::pv;
    Site site = Site::sim;

    bool operator==(const DisturbanceSpec&) const = default;
};

// Fully materialized experiment description: every default is filled in at
// parse time, so a Scenario is self-contained and printable.
struct Scenario {
    // [run]
    Micros horizon_us = 180 * kMicrosPerSecond;
    RunMode mode = RunMode::virtual_time;
    std::uint64_t seed = 42;
    Micros emission_period_us = kMicrosPerSecond;
    std::string out_dir = "out";
    std::string hub_addr = "127.0.0.1:7781";

    // [link.wan] / [link.lan] / [link.mesh]
    netem::DelayModel wan; // gateway <-> hub (the inter-site link)
    netem::DelayModel lan{0.1, 0.0, 0.0, 70.0, 85.0, 0,
                          netem::LinkMode::stream}; // sim and agents <-> hub
    netem::DelayModel mesh{0.0, 0.0, 0.0, 70.0, 85.0, 0,
                           netem::LinkMode::stream}; // agent <-> agent

    // [profiles]
    std::string pv_path;       // empty = built-in synthetic curve
    std::string building_path; // empty = built-in synthetic curve
    Micros window_start_us = 7200 * kMicrosPerSecond;
    Micros window_end_us = 12000 * kMicrosPerSecond;

    // [grid]
    int ess_count = 4;
    double droop_hz_per_pu = 0.1;
    double p_set_pu = 0.0;
    double p_min_pu = -1.0;
    double p_max_pu = 1.0;
    double tau_f_s = 0.5;
    double dt_s = 0.01;
    double damping_pu_per_hz = 0.0;
    double s_base_w = 10000.0;
    double f_nom_hz = 50.0;
    double load2_pu = 0.1;
    double f0_hz = 50.0;

    // [agents]
    std::vector<std::pair<int, int>> edges; // 0-based, normalized, sorted
    double k_s = 1.0;
    double eps_hz = 1e-6;
    int quiet_rounds = 3;
    int max_iter = 500;
    Micros agent_period_us = kMicrosPerSecond;
    Micros agent_offset_us = 50'000;
    mas::AgentFleet::Transport transport = mas::AgentFleet::Transport::mesh;

    // [disturbance] (repeatable)
    std::vector<DisturbanceSpec> disturbances;

    bool operator==(const Scenario&) const = default;
};

struct ParseOptions {
    std::string base_dir = ".";  // profile paths resolve against this
    bool check_files = true;     // verify referenced files exist
};

// Parses the sectioned key=value format. SyntaxError carries a line number
// (format-level faults: bad section header, missing '=', duplicate key);
// ValidationError names the offending field; MissingFile for absent
// profile paths.
Scenario parse_scenario(std::string_view text, const ParseOptions& opts = {});

Scenario load_scenario_file(const std::string& path, bool check_files = true);

// Canonical rendering: parse(print_scenario(s)) == s.
std::string print_scenario(const Scenario& s);

} // namespace gridloop::orch
