#include "gridloop/microgrid.hpp"

#include <algorithm>
#include <cmath>

namespace gridloop::grid {

void EssParams::validate() const {
    if (m_droop <= 0) throw std::invalid_argument("ess " + id + ": m_droop must be > 0");
    if (p_min > 0 || p_max < 0)
        throw std::invalid_argument("ess " + id + ": capacity must bracket 0");
}

double MicrogridState::p_ext() const {
    double v = 0.0;
    if (breakers.pv) v += p_pv;
    if (breakers.building) v -= p_building;
    if (breakers.load2) v -= p_load2;
    return v;
}

double ess_power(double f, double f_nom, const EssParams& e) {
    double p = e.p_set + (f_nom + e.u - f) / e.m_droop;
    return std::clamp(p, e.p_min, e.p_max);
}

double steady_state_frequency(const MicrogridState& s) {
    double inv_m_sum = 0.0;   // sum 1/m_i over connected units
    double numerator = s.p_ext() + s.damping_d * s.f_nom;
    for (const auto& e : s.ess) {
        if (!e.connected) continue;
        inv_m_sum += 1.0 / e.m_droop;
        numerator += e.p_set + (s.f_nom + e.u) / e.m_droop;
    }
    if (inv_m_sum == 0.0)
        throw NoFormingSource("microgrid: no connected grid-forming source");
    return numerator / (inv_m_sum + s.damping_d);
}

double power_balance_residual(const MicrogridState& s) {
    double sum_p = 0.0;
    for (const auto& e : s.ess)
        if (e.connected) sum_p += ess_power(s.f, s.f_nom, e);
    return sum_p + s.p_ext() - s.damping_d * (s.f - s.f_nom);
}

void apply_disturbance(MicrogridState& s, const Disturbance& d) {
    bool closed = d.action == Action::connect;
    switch (d.target) {
    case Target::pv: s.breakers.pv = closed; break;
    case Target::building: s.breakers.building = closed; break;
    case Target::load2: s.breakers.load2 = closed; break;
    }
}

void step(MicrogridState& s, Micros dt_us, const std::vector<Measurement>& inputs,
          const std::vector<Disturbance>& due) {
    if (dt_us <= 0) throw std::invalid_argument("microgrid: dt must be positive");

    for (const auto& m : inputs) {
        if (m.topic == "prismes/pv/power") {
            s.p_pv = m.value / s.s_base;
        } else if (m.topic == "prismes/building/power") {
            s.p_building = m.value / s.s_base;
        } else {
            // predis/ess/<id>/u
            constexpr std::string_view prefix = "predis/ess/";
            if (m.topic.size() > prefix.size() + 2 && m.topic.starts_with(prefix) &&
                m.topic.ends_with("/u")) {
                std::string id = m.topic.substr(prefix.size(),
                                                m.topic.size() - prefix.size() - 2);
                for (auto& e : s.ess)
                    if (e.id == id) e.u = m.value;
            }
        }
    }

    for (const auto& d : due) apply_disturbance(s, d);

    double dt = static_cast<double>(dt_us) / 1e6;
    double f_ss = steady_state_frequency(s);
    s.f += (dt / s.tau_f) * (f_ss - s.f);
    for (auto& e : s.ess) e.p = e.connected ? ess_power(s.f, s.f_nom, e) : 0.0;
    s.t_us += dt_us;
}

Simulator::Simulator(MicrogridState init, Micros dt_us, Micros emit_period_us,
                     std::vector<Disturbance> disturbances)
    : state_(std::move(init)), dt_us_(dt_us), emit_period_us_(emit_period_us),
      disturbances_(std::move(disturbances)) {
    if (dt_us_ <= 0) throw std::invalid_argument("microgrid: dt must be positive");
    if (emit_period_us_ <= 0)
        throw std::invalid_argument("microgrid: emission period must be positive");
    for (const auto& e : state_.ess) e.validate();
    if (state_.ess.empty()) throw NoFormingSource("microgrid: no storage units configured");
    std::sort(disturbances_.begin(), disturbances_.end(),
              [](const Disturbance& a, const Disturbance& b) { return a.t_us < b.t_us; });
    for (auto& e : state_.ess)
        e.p = e.connected ? ess_power(state_.f, state_.f_nom, e) : 0.0;
}

void Simulator::attach(hub::HubSession& session) {
    session_ = &session;
    session.subscribe("prismes/pv/power");
    session.subscribe("prismes/building/power");
    session.subscribe("predis/ess/*/u");
    session.on_message = [this](const hub::Frame& f) {
        if (!std::holds_alternative<double>(f.payload)) return;
        inbox_.push_back({f.topic, std::get<double>(f.payload), f.ts_us, f.seq, {}});
    };
}

void Simulator::start(orch::Scheduler& sched, Micros horizon_us) {
    for (Micros t = 0; t < horizon_us; t += dt_us_)
        sched.at(t, orch::Prio::sim, [this, &sched] { tick(sched.now()); });
}

void Simulator::emit(Micros now_us) {
    ++emit_seq_;
    if (!session_) return;
    session_->publish("predis/grid/freq", emit_seq_, now_us, state_.f);
    for (const auto& e : state_.ess)
        session_->publish("predis/ess/" + e.id + "/p", emit_seq_, now_us, e.p);
}

void Simulator::tick(Micros now_us) {
    std::vector<Measurement> inputs;
    inputs.swap(inbox_);

    std::vector<Disturbance> due;
    while (next_disturbance_ < disturbances_.size() &&
           disturbances_[next_disturbance_].t_us <= now_us)
        due.push_back(disturbances_[next_disturbance_++]);

    // the row and the emission describe the state at now_us; inputs and
    // disturbances take effect over [now_us, now_us + dt)
    TraceRow row;
    row.t_us = now_us;
    row.f = state_.f;
    row.p_pv = state_.breakers.pv ? state_.p_pv : 0.0;
    row.p_building = state_.breakers.building ? state_.p_building : 0.0;
    row.p_load2 = state_.breakers.load2 ? state_.p_load2 : 0.0;
    for (const auto& e : state_.ess) {
        row.p_ess.push_back(e.p);
        row.u.push_back(e.u);
    }
    trace_.push_back(std::move(row));

    if (now_us % emit_period_us_ == 0) emit(now_us);

    step(state_, dt_us_, inputs, due);
}

} // namespace gridloop::grid
