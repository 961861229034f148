#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "gridloop/agent.hpp"
#include "gridloop/gateway.hpp"
#include "gridloop/microgrid.hpp"
#include "gridloop/netem.hpp"
#include "gridloop/scenario.hpp"

namespace gridloop::orch {

struct ComponentCrash : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One acceptance check outcome. Informational entries report context (e.g.
// a link configured without spikes) and never affect the overall result.
struct Verdict {
    std::string name;
    bool pass = true;
    bool informational = false;
    std::string detail;
};

bool all_pass(const std::vector<Verdict>& verdicts);

struct LinkReport {
    std::string name;
    netem::LinkStats stats;
};

struct RunResult {
    Scenario scenario;
    std::vector<grid::TraceRow> trace;
    std::vector<LinkReport> links;
    std::vector<mas::AgentFleet::CycleLog> cycles;
    std::uint64_t stale_rounds = 0;
    std::size_t skipped_cycles = 0;
    double wall_seconds = 0.0;
    std::vector<Verdict> verdicts;
};

// Executes every component on one discrete-event scheduler in virtual time.
// Bitwise deterministic for a fixed (scenario, seed).
RunResult run_virtual(const Scenario& s);

// Same pipeline paced against the wall clock: an in-process hub server plus
// one thread per component, each talking TCP through emulated links.
RunResult run_realtime(const Scenario& s);

// Dispatch on s.mode.
RunResult run_scenario(const Scenario& s);

// Post-disturbance frequency behaviour, one entry per distinct event time.
// The window of an event extends to the next event or the horizon; settle_us
// is the time after the event at which |f - f_nom| re-enters band_hz and
// stays there for the rest of the window.
struct DisturbanceWindow {
    Micros t_us = 0;
    std::string label;
    double max_dev_hz = 0.0;
    Micros settle_us = 0;
    bool settled = false; // re-entered and held until the window end
};
std::vector<DisturbanceWindow> settling_windows(const RunResult& r, double band_hz);

// Evaluates the full acceptance list against a finished run: the run-derived
// criteria (restoration, per-link latency/order, determinism re-run) plus the
// self-contained model criteria (delay statistics, ordering, consensus
// oracle, droop closed form, profile window, protocol robustness).
std::vector<Verdict> check_acceptance(const RunResult& r);

// Re-runs acceptance against a saved output directory: re-executes the
// scenario snapshot (virtual mode) and byte-compares the regenerated CSVs
// with the saved ones.
std::vector<Verdict> check_result_dir(const std::string& dir);

// Blocking realtime component processes (the distributed deployment shape).
void gateway_main(const Scenario& s, const std::string& hub_addr);
void sim_main(const Scenario& s, const std::string& hub_addr);
void agents_main(const Scenario& s, const std::string& hub_addr);

// Scenario-derived construction shared by both modes and the component
// processes (profile selection + crop, initial grid state, fleet config).
std::vector<gateway::DeviceConfig> scenario_devices(const Scenario& s);
grid::MicrogridState scenario_initial_state(const Scenario& s);
mas::AgentFleet::Config scenario_fleet_config(const Scenario& s);
std::vector<grid::Disturbance> sim_site_disturbances(const Scenario& s);
std::vector<DisturbanceSpec> gateway_site_disturbances(const Scenario& s);

} // namespace gridloop::orch
