#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "gridloop/common.hpp"
#include "gridloop/scheduler.hpp"
#include "gridloop/session.hpp"

namespace gridloop::grid {

struct NoFormingSource : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One grid-forming storage unit under frequency droop.
struct EssParams {
    std::string id;        // "1".."n", used in topics
    double m_droop = 0.1;  // Hz per pu
    double p_set = 0.0;    // pu dispatch setpoint
    double p_min = -1.0;   // pu
    double p_max = 1.0;    // pu
    double u = 0.0;        // Hz secondary correction from its agent
    double p = 0.0;        // pu current output
    bool connected = true;

    void validate() const;
};

enum class Target { pv, building, load2 };
enum class Action { connect, disconnect };

struct Disturbance {
    Micros t_us = 0;
    Action action = Action::connect;
    Target target = Target::pv;
};

// Quasi-static common-frequency view of the islanded microgrid: droop-based
// ESS fleet, one PV injection and two loads behind breakers, frequency
// relaxing to the droop equilibrium with a first-order lag.
struct MicrogridState {
    Micros t_us = 0;
    double f = 50.0; // Hz
    std::vector<EssParams> ess;
    double p_pv = 0.0;       // pu, magnitude as reported by the gateway
    double p_building = 0.0; // pu
    double p_load2 = 0.0;    // pu
    struct Breakers {
        bool pv = false;
        bool building = false;
        bool load2 = false;
    } breakers;
    double f_nom = 50.0;
    double damping_d = 0.0; // pu per Hz
    double tau_f = 0.5;     // seconds
    double s_base = 10000.0; // W per pu

    // Net non-ESS injection with open breakers zeroing their term.
    double p_ext() const;
};

// Droop output of one unit at system frequency f (clamped to capacity).
double ess_power(double f, double f_nom, const EssParams& e);

// Frequency solving the linear droop balance
//   sum_i [p_set_i + (f_nom + u_i - f)/m_i] + p_ext - d (f - f_nom) = 0.
// Throws NoFormingSource when no ESS is connected.
double steady_state_frequency(const MicrogridState& s);

// sum p_i + p_ext - d (f - f_nom) at the current f; 0 exactly at f_ss
// (modulo capacity clamping).
double power_balance_residual(const MicrogridState& s);

// Toggles the targeted breaker; idempotent.
void apply_disturbance(MicrogridState& s, const Disturbance& d);

// One integration step: folds the given Measurements (power topics in W,
// scaled by s_base; setpoint topics in Hz), applies due disturbances,
// advances f by explicit Euler toward f_ss, recomputes ESS outputs, and
// moves t forward by dt.
void step(MicrogridState& s, Micros dt_us, const std::vector<Measurement>& inputs,
          const std::vector<Disturbance>& due = {});

struct TraceRow {
    Micros t_us = 0;
    double f = 0.0;
    double p_pv = 0.0; // breaker-gated effective pu values
    double p_building = 0.0;
    double p_load2 = 0.0;
    std::vector<double> p_ess;
    std::vector<double> u;
};

// Hub-facing wrapper: subscribes to gateway telemetry and agent setpoints,
// ticks the model on a fixed step, publishes frequency and ESS outputs on
// the emission period, and records one trace row per step.
class Simulator {
public:
    Simulator(MicrogridState init, Micros dt_us, Micros emit_period_us,
              std::vector<Disturbance> disturbances);

    void attach(hub::HubSession& session);

    // Virtual mode: schedules ticks for every step time in [0, horizon).
    void start(orch::Scheduler& sched, Micros horizon_us);

    // One step at now_us (must be called in time order). Both modes.
    void tick(Micros now_us);

    const MicrogridState& state() const { return state_; }
    const std::vector<TraceRow>& trace() const { return trace_; }
    Micros dt_us() const { return dt_us_; }

private:
    void emit(Micros now_us);

    MicrogridState state_;
    Micros dt_us_;
    Micros emit_period_us_;
    std::vector<Disturbance> disturbances_; // sorted by t
    std::size_t next_disturbance_ = 0;
    hub::HubSession* session_ = nullptr;
    std::vector<Measurement> inbox_;
    std::vector<TraceRow> trace_;
    std::uint64_t emit_seq_ = 0;
};

} // namespace gridloop::grid
