#include "gridloop/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "gridloop/consensus.hpp"
#include "gridloop/gateway.hpp"
#include "gridloop/profile.hpp"
#include "gridloop/report.hpp"
#include "gridloop/tcp.hpp"
#include "gridloop/virtual_hub.hpp"

namespace gridloop::orch {

namespace {

const char* target_name(grid::Target t) {
    switch (t) {
    case grid::Target::pv: return "pv";
    case grid::Target::building: return "building";
    default: return "load2";
    }
}

std::string seconds_text(Micros us) {
    return format_double(static_cast<double>(us) / 1e6);
}

gateway::Profile device_profile(const std::string& path, const std::string& dev,
                                Micros w0, Micros w1, gateway::Profile (*builtin)()) {
    gateway::Profile p = path.empty() ? builtin() : gateway::load_profile_file(path, dev);
    p.device_id = dev;
    return gateway::crop_window(p, w0, w1);
}

} // namespace

bool all_pass(const std::vector<Verdict>& verdicts) {
    return std::all_of(verdicts.begin(), verdicts.end(),
                       [](const Verdict& v) { return v.informational || v.pass; });
}

std::vector<gateway::DeviceConfig> scenario_devices(const Scenario& s) {
    std::vector<gateway::DeviceConfig> devs;
    devs.push_back({"pv",
                    device_profile(s.pv_path, "pv", s.window_start_us, s.window_end_us,
                                   gateway::synthetic_pv_profile),
                    true});
    devs.push_back({"building",
                    device_profile(s.building_path, "building", s.window_start_us,
                                   s.window_end_us, gateway::synthetic_building_profile),
                    true});
    return devs;
}

grid::MicrogridState scenario_initial_state(const Scenario& s) {
    grid::MicrogridState st;
    st.f = s.f0_hz;
    st.f_nom = s.f_nom_hz;
    st.damping_d = s.damping_pu_per_hz;
    st.tau_f = s.tau_f_s;
    st.s_base = s.s_base_w;
    st.p_load2 = s.load2_pu;
    for (int i = 0; i < s.ess_count; ++i) {
        grid::EssParams e;
        e.id = std::to_string(i + 1);
        e.m_droop = s.droop_hz_per_pu;
        e.p_set = s.p_set_pu;
        e.p_min = s.p_min_pu;
        e.p_max = s.p_max_pu;
        st.ess.push_back(e);
    }
    return st;
}

mas::AgentFleet::Config scenario_fleet_config(const Scenario& s) {
    mas::AgentFleet::Config c;
    c.graph = mas::AgentGraph::from_edges(s.ess_count, s.edges);
    c.crit = {s.eps_hz, s.quiet_rounds, s.max_iter};
    c.k_s = s.k_s;
    c.f_nom = s.f_nom_hz;
    c.period_us = s.agent_period_us;
    c.offset_us = s.agent_offset_us;
    c.transport = s.transport;
    return c;
}

std::vector<grid::Disturbance> sim_site_disturbances(const Scenario& s) {
    std::vector<grid::Disturbance> out;
    for (const auto& d : s.disturbances)
        if (d.site == Site::sim) out.push_back({d.t_us, d.action, d.target});
    return out;
}

std::vector<DisturbanceSpec> gateway_site_disturbances(const Scenario& s) {
    std::vector<DisturbanceSpec> out;
    for (const auto& d : s.disturbances)
        if (d.site == Site::gateway) out.push_back(d);
    return out;
}

// --- virtual mode -----------------------------------------------------------

RunResult run_virtual(const Scenario& s) {
    auto wall0 = std::chrono::steady_clock::now();
    RunResult result;
    result.scenario = s;

    Scheduler sched;
    hub::HubCore core;
    hub::VirtualHub vhub(sched, core);
    netem::Link wan("wan", s.wan, s.seed);
    netem::Link lan("lan", s.lan, s.seed);
    netem::Link mesh("mesh", s.mesh, s.seed);

    gateway::Gateway gw(scenario_devices(s), s.emission_period_us);
    auto& gw_sess =
        vhub.connect("gateway", &wan.lane("gateway->hub"), &wan.lane("hub->gateway"));
    gw.attach(gw_sess);

    grid::Simulator sim(scenario_initial_state(s), seconds_to_micros(s.dt_s),
                        s.emission_period_us, sim_site_disturbances(s));
    auto& sim_sess = vhub.connect("sim", &lan.lane("sim->hub"), &lan.lane("hub->sim"));
    sim.attach(sim_sess);

    mas::AgentFleet fleet(scenario_fleet_config(s));
    for (int i = 0; i < s.ess_count; ++i) {
        std::string nm = "agent" + std::to_string(i + 1);
        auto& es = vhub.connect(nm, &lan.lane(nm + "->hub"), &lan.lane("hub->" + nm));
        fleet.attach(i, es);
    }

    for (Micros t = 0; t < s.horizon_us; t += s.emission_period_us)
        sched.at(t, Prio::gateway, [&gw, &sched] { gw.emit_once(sched.now()); });
    sim.start(sched, s.horizon_us);
    fleet.start(sched, s.horizon_us, &mesh);

    auto script_seq = std::make_shared<std::uint64_t>(0);
    for (const auto& d : gateway_site_disturbances(s)) {
        std::string topic = std::string("prismes/") + target_name(d.target) + "/breaker";
        double value = d.action == grid::Action::connect ? 1.0 : 0.0;
        sched.at(d.t_us, Prio::script, [&vhub, &sched, script_seq, topic, value] {
            vhub.script_publish(topic, {value, ++*script_seq, sched.now(), "script"});
        });
    }

    try {
        sched.run_until(s.horizon_us);
    } catch (const std::exception& e) {
        throw ComponentCrash("virtual run aborted at t=" + seconds_text(sched.now()) +
                             " s: " + e.what());
    }

    result.trace = sim.trace();
    result.links.push_back({"wan", wan.stats()});
    result.links.push_back({"lan", lan.stats()});
    result.links.push_back({"mesh", mesh.stats()});
    result.cycles = fleet.log();
    result.stale_rounds = fleet.stale_total();
    result.skipped_cycles = fleet.skipped_cycles();
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    return result;
}

// --- realtime mode ----------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

Micros since_us(Clock::time_point epoch) {
    return std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - epoch)
        .count();
}

// Telemetry pacing plus the scripted gateway-side breaker commands (the
// experiment console publishes them through its own undelayed session).
void gateway_loop(const Scenario& s, gateway::Gateway& gw, hub::TcpHubClient& sess,
                  hub::TcpHubClient& script, Clock::time_point epoch,
                  std::atomic<bool>& abort) {
    auto dist = gateway_site_disturbances(s);
    std::erase_if(dist, [&](const DisturbanceSpec& d) { return d.t_us >= s.horizon_us; });
    std::size_t di = 0;
    std::uint64_t script_seq = 0;
    Micros next_emit = 0;
    while (!abort && (next_emit < s.horizon_us || di < dist.size())) {
        Micros now = since_us(epoch);
        while (di < dist.size() && dist[di].t_us <= now) {
            const auto& d = dist[di++];
            script.publish(std::string("prismes/") + target_name(d.target) + "/breaker",
                           ++script_seq, now,
                           d.action == grid::Action::connect ? 1.0 : 0.0);
        }
        if (next_emit < s.horizon_us && now >= next_emit) {
            sess.pump();
            gw.emit_once(next_emit);
            next_emit += s.emission_period_us;
            continue;
        }
        sess.pump();
        script.pump();
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
}

void sim_loop(const Scenario& s, grid::Simulator& sim, hub::TcpHubClient& sess,
              Clock::time_point epoch, std::atomic<bool>& abort) {
    for (Micros t = 0; t < s.horizon_us && !abort; t += sim.dt_us()) {
        std::this_thread::sleep_until(epoch + std::chrono::microseconds(t));
        sess.pump();
        sim.tick(t);
    }
}

void agents_loop(const Scenario& s, mas::AgentFleet& fleet,
                 const std::vector<hub::TcpHubClient*>& sessions,
                 Clock::time_point epoch, std::atomic<bool>& abort) {
    Micros next = s.agent_offset_us;
    while (!abort && next < s.horizon_us) {
        Micros now = since_us(epoch);
        if (now >= next) {
            for (auto* c : sessions) c->pump();
            fleet.run_cycle_local(next);
            next += s.agent_period_us;
            continue;
        }
        for (auto* c : sessions) c->pump();
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
}

struct CrashLog {
    std::mutex mu;
    std::vector<std::string> entries;
    std::atomic<bool> abort{false};

    void add(const char* who, const std::string& what) {
        std::lock_guard lock(mu);
        entries.push_back(std::string(who) + ": " + what);
        abort = true;
    }
    std::string message() {
        std::string out = "component crash";
        for (const auto& e : entries) out += "; " + e;
        return out;
    }
};

} // namespace

RunResult run_realtime(const Scenario& s) {
    auto wall0 = Clock::now();
    RunResult result;
    result.scenario = s;

    hub::TcpHubServer server(s.hub_addr);
    server.start();
    // resolve the actual port so ":0" scenarios work
    std::string addr =
        hub::split_host_port(s.hub_addr).first + ":" + std::to_string(server.port());

    gateway::Gateway gw(scenario_devices(s), s.emission_period_us);
    grid::Simulator sim(scenario_initial_state(s), seconds_to_micros(s.dt_s),
                        s.emission_period_us, sim_site_disturbances(s));
    auto fcfg = scenario_fleet_config(s);
    // agent rounds run on the fleet's in-process queue in realtime; the hub
    // carries frequency telemetry and setpoints either way
    fcfg.transport = mas::AgentFleet::Transport::mesh;
    mas::AgentFleet fleet(fcfg);

    hub::TcpHubClient::LinkSpec wan_spec{"wan", s.wan, s.seed};
    hub::TcpHubClient::LinkSpec lan_spec{"lan", s.lan, s.seed};

    hub::TcpHubClient gw_sess(addr, "gateway", &wan_spec);
    hub::TcpHubClient script_sess(addr, "script", nullptr);
    hub::TcpHubClient sim_sess(addr, "sim", &lan_spec);
    std::vector<std::unique_ptr<hub::TcpHubClient>> agent_sess;
    std::vector<hub::TcpHubClient*> agent_ptrs;
    for (int i = 0; i < s.ess_count; ++i) {
        agent_sess.push_back(std::make_unique<hub::TcpHubClient>(
            addr, "agent" + std::to_string(i + 1), &lan_spec));
        agent_ptrs.push_back(agent_sess.back().get());
    }

    gw.attach(gw_sess);
    sim.attach(sim_sess);
    for (int i = 0; i < s.ess_count; ++i) fleet.attach(i, *agent_sess[static_cast<std::size_t>(i)]);

    CrashLog crashes;
    auto epoch = Clock::now();
    std::vector<std::thread> tasks;
    tasks.emplace_back([&] {
        try {
            gateway_loop(s, gw, gw_sess, script_sess, epoch, crashes.abort);
        } catch (const std::exception& e) {
            crashes.add("gateway", e.what());
        }
    });
    tasks.emplace_back([&] {
        try {
            sim_loop(s, sim, sim_sess, epoch, crashes.abort);
        } catch (const std::exception& e) {
            crashes.add("sim", e.what());
        }
    });
    tasks.emplace_back([&] {
        try {
            agents_loop(s, fleet, agent_ptrs, epoch, crashes.abort);
        } catch (const std::exception& e) {
            crashes.add("agents", e.what());
        }
    });
    for (auto& t : tasks) t.join();
    gw_sess.close();
    script_sess.close();
    sim_sess.close();
    for (auto& c : agent_sess) c->close();
    server.stop();

    result.trace = sim.trace();
    netem::LinkStats wan_stats = *gw_sess.link_stats();
    netem::LinkStats lan_stats;
    lan_stats.merge(*sim_sess.link_stats());
    for (auto& c : agent_sess) lan_stats.merge(*c->link_stats());
    result.links.push_back({"wan", wan_stats});
    result.links.push_back({"lan", lan_stats});
    result.links.push_back({"mesh", {}});
    result.cycles = fleet.log();
    result.stale_rounds = fleet.stale_total();
    result.skipped_cycles = fleet.skipped_cycles();
    result.wall_seconds = std::chrono::duration<double>(Clock::now() - wall0).count();

    if (!crashes.entries.empty()) throw ComponentCrash(crashes.message());
    return result;
}

RunResult run_scenario(const Scenario& s) {
    return s.mode == RunMode::virtual_time ? run_virtual(s) : run_realtime(s);
}

void gateway_main(const Scenario& s, const std::string& hub_addr) {
    gateway::Gateway gw(scenario_devices(s), s.emission_period_us);
    hub::TcpHubClient::LinkSpec wan_spec{"wan", s.wan, s.seed};
    hub::TcpHubClient sess(hub_addr, "gateway", &wan_spec);
    hub::TcpHubClient script(hub_addr, "script", nullptr);
    gw.attach(sess);
    std::atomic<bool> abort{false};
    gateway_loop(s, gw, sess, script, Clock::now(), abort);
}

void sim_main(const Scenario& s, const std::string& hub_addr) {
    grid::Simulator sim(scenario_initial_state(s), seconds_to_micros(s.dt_s),
                        s.emission_period_us, sim_site_disturbances(s));
    hub::TcpHubClient::LinkSpec lan_spec{"lan", s.lan, s.seed};
    hub::TcpHubClient sess(hub_addr, "sim", &lan_spec);
    sim.attach(sess);
    std::atomic<bool> abort{false};
    sim_loop(s, sim, sess, Clock::now(), abort);
}

void agents_main(const Scenario& s, const std::string& hub_addr) {
    auto fcfg = scenario_fleet_config(s);
    fcfg.transport = mas::AgentFleet::Transport::mesh;
    mas::AgentFleet fleet(fcfg);
    hub::TcpHubClient::LinkSpec lan_spec{"lan", s.lan, s.seed};
    std::vector<std::unique_ptr<hub::TcpHubClient>> sess;
    std::vector<hub::TcpHubClient*> ptrs;
    for (int i = 0; i < s.ess_count; ++i) {
        sess.push_back(std::make_unique<hub::TcpHubClient>(
            hub_addr, "agent" + std::to_string(i + 1), &lan_spec));
        ptrs.push_back(sess.back().get());
    }
    for (int i = 0; i < s.ess_count; ++i) fleet.attach(i, *sess[static_cast<std::size_t>(i)]);
    std::atomic<bool> abort{false};
    agents_loop(s, fleet, ptrs, Clock::now(), abort);
}

// --- settling analysis --------------------------------------------------------

std::vector<DisturbanceWindow> settling_windows(const RunResult& r, double band_hz) {
    const auto& s = r.scenario;
    std::vector<DisturbanceWindow> out;
    std::vector<std::pair<Micros, std::string>> events;
    for (const auto& d : s.disturbances) {
        if (d.t_us >= s.horizon_us) continue;
        std::string lbl =
            std::string(d.action == grid::Action::connect ? "connect " : "disconnect ") +
            target_name(d.target);
        if (!events.empty() && events.back().first == d.t_us)
            events.back().second += " + " + lbl;
        else
            events.emplace_back(d.t_us, lbl);
    }
    for (std::size_t i = 0; i < events.size(); ++i) {
        Micros t0 = events[i].first;
        Micros t1 = i + 1 < events.size() ? events[i + 1].first : s.horizon_us;
        DisturbanceWindow w;
        w.t_us = t0;
        w.label = events[i].second;
        Micros last_out = -1;
        bool any = false;
        for (const auto& row : r.trace) {
            if (row.t_us < t0 || row.t_us >= t1) continue;
            any = true;
            double dev = std::abs(row.f - s.f_nom_hz);
            w.max_dev_hz = std::max(w.max_dev_hz, dev);
            if (dev > band_hz) last_out = row.t_us;
        }
        if (!any) {
            w.settled = false;
        } else if (last_out < 0) {
            w.settle_us = 0;
            w.settled = true; // never left the band
        } else {
            Micros reentry = -1;
            for (const auto& row : r.trace) {
                if (row.t_us <= last_out || row.t_us >= t1) continue;
                reentry = row.t_us;
                break;
            }
            if (reentry < 0) {
                w.settled = false; // still outside at the window end
            } else {
                w.settle_us = reentry - t0;
                w.settled = true;
            }
        }
        out.push_back(w);
    }
    return out;
}

// --- acceptance ---------------------------------------------------------------

namespace {

Verdict verdict(std::string name, bool pass, std::string detail, bool info = false) {
    return {std::move(name), pass, info, std::move(detail)};
}

void append_restoration_verdicts(const RunResult& r, std::vector<Verdict>& out) {
    const double band = 0.02, floor_hz = 0.01;
    const Micros limit = 30 * kMicrosPerSecond;
    auto windows = settling_windows(r, band);
    if (windows.empty()) {
        out.push_back(verdict("frequency-restoration", true, "no disturbance events", true));
    } else if (r.trace.empty()) {
        out.push_back(verdict("frequency-restoration", false, "no trace rows"));
    } else {
        bool pass = true;
        std::string detail;
        for (const auto& w : windows) {
            bool ok = w.settled && w.settle_us <= limit && w.max_dev_hz >= floor_hz;
            pass = pass && ok;
            if (!detail.empty()) detail += "; ";
            detail += "t=" + seconds_text(w.t_us) + "s (" + w.label +
                      "): dev=" + format_double(w.max_dev_hz) + "Hz" +
                      (w.settled ? ", settled in " + seconds_text(w.settle_us) + "s"
                                 : ", NOT settled");
        }
        out.push_back(verdict("frequency-restoration", pass, detail));
    }

    if (r.wall_seconds > 0.0)
        out.push_back(verdict("runtime", r.wall_seconds < 10.0,
                              format_double(r.wall_seconds) + " s wall"));
    else
        out.push_back(verdict("runtime", true, "not measured", true));
}

const netem::DelayModel* model_of(const Scenario& s, const std::string& name) {
    if (name == "wan") return &s.wan;
    if (name == "lan") return &s.lan;
    if (name == "mesh") return &s.mesh;
    return nullptr;
}

void append_link_verdicts(const RunResult& r, std::vector<Verdict>& out) {
    for (const auto& l : r.links) {
        const auto* m = model_of(r.scenario, l.name);
        if (!m) continue;
        auto st = l.stats.stats();
        if (st.count == 0) {
            out.push_back(verdict("latency-" + l.name, true, "no traffic", true));
            continue;
        }
        double mu = (1.0 - m->spike_prob) * m->base_ms +
                    m->spike_prob * (m->spike_lo_ms + m->spike_hi_ms) / 2.0;
        double peak_bound =
            std::max(m->spike_prob > 0 ? m->spike_hi_ms : 0.0,
                     m->base_ms + 6.0 * m->jitter_std_ms) +
            0.001; // delivery times are rounded to whole microseconds
        bool pass = std::abs(st.mean_ms - mu) <= 3.0 && st.max_ms <= peak_bound;
        out.push_back(verdict(
            "latency-" + l.name, pass,
            std::to_string(st.count) + " msgs, mean " + format_double(st.mean_ms) +
                " ms (model " + format_double(mu) + " ms), max " +
                format_double(st.max_ms) + " ms"));

        if (m->spike_prob == 0.0) {
            out.push_back(
                verdict("latency-" + l.name + "-spikes", true, "no spikes configured", true));
        } else {
            double expected = static_cast<double>(st.count) * m->spike_prob;
            std::uint64_t seen = 0;
            auto lo_bin = static_cast<std::size_t>(std::max(0.0, std::floor(m->spike_lo_ms)));
            for (std::size_t b = std::min(lo_bin, st.histogram_1ms.size() - 1);
                 b < st.histogram_1ms.size(); ++b)
                seen += st.histogram_1ms[b];
            if (expected >= 10.0)
                out.push_back(verdict("latency-" + l.name + "-spikes", seen >= 1,
                                      std::to_string(seen) + " spike-range samples (" +
                                          format_double(expected) + " expected)"));
            else
                out.push_back(verdict("latency-" + l.name + "-spikes", true,
                                      std::to_string(seen) + " spike-range samples (" +
                                          format_double(expected) +
                                          " expected: too few to require)",
                                      true));
        }

        if (m->mode == netem::LinkMode::stream)
            out.push_back(verdict("ordering-" + l.name, st.reorder_count == 0,
                                  std::to_string(st.reorder_count) +
                                      " inversions on a stream link"));
    }
}

Verdict delay_model_verdict(std::uint64_t seed) {
    netem::DelayModel m; // calibrated defaults
    netem::RandomStream rng(netem::derive_seed(seed, "acceptance/delay"));
    const int n = 10000;
    double sum = 0.0, mx = 0.0;
    int spikes = 0;
    for (int i = 0; i < n; ++i) {
        double d = netem::delay_sample(m, rng);
        sum += d;
        mx = std::max(mx, d);
        if (d >= 70.0) ++spikes;
    }
    double mean = sum / n;
    bool pass = mean >= 30.0 && mean <= 35.0 && mx <= 85.0 && spikes >= 1;
    return verdict("delay-model", pass,
                   "10^4 samples: mean " + format_double(mean) + " ms, max " +
                       format_double(mx) + " ms, " + std::to_string(spikes) +
                       " samples >= 70 ms");
}

Verdict ordering_verdict(std::uint64_t seed) {
    auto inversions = [&](Micros spacing) {
        netem::DelayModel m;
        m.mode = netem::LinkMode::datagram;
        netem::LinkStats sink;
        netem::Lane lane(m, netem::derive_seed(seed, "acceptance/ordering"), &sink, 0);
        for (int i = 0; i < 10000; ++i) lane.deliver(i * spacing);
        return sink.stats().reorder_count;
    };
    auto slow = inversions(1'000'000);
    auto fast = inversions(10'000);
    return verdict("ordering-datagram", slow == 0 && fast > 0,
                   "1 s period: " + std::to_string(slow) + " inversions; 10 ms period: " +
                       std::to_string(fast) + " inversions");
}

std::vector<std::pair<int, int>> shape_edges(const std::string& shape, int n) {
    std::vector<std::pair<int, int>> edges;
    if (shape == "ring") {
        if (n == 2) return {{0, 1}};
        for (int i = 0; i < n; ++i) edges.emplace_back(std::min(i, (i + 1) % n),
                                                       std::max(i, (i + 1) % n));
    } else if (shape == "path") {
        for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
    } else { // complete
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) edges.emplace_back(i, j);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

// Message-passing network run to a fixed round count; returns each agent's
// iterate at exactly round `target`.
std::vector<double> agents_after_rounds(const mas::AgentGraph& g,
                                        const std::vector<double>& x0, int target) {
    int n = g.n;
    std::vector<mas::ConsensusAgent> agents;
    agents.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        mas::ConsensusAgent::Config c;
        c.id = i;
        c.neighbors = g.neighbors(i);
        c.weight_row = g.weights[static_cast<std::size_t>(i)];
        c.crit = {1e-300, 1, target + 30};
        c.declare_threshold = 1 << 30; // never declares; we observe rounds
        agents.emplace_back(std::move(c));
    }
    std::deque<std::pair<int, mas::RoundMsg>> q;
    std::vector<double> captured(static_cast<std::size_t>(n), 0.0);
    int remaining = n;
    for (int i = 0; i < n; ++i) {
        agents[static_cast<std::size_t>(i)].send = [&q](int to, const mas::RoundMsg& m) {
            q.emplace_back(to, m);
        };
        auto done = std::make_shared<bool>(false);
        agents[static_cast<std::size_t>(i)].on_round =
            [&captured, &remaining, i, target, done](int round, double x) {
                if (!*done && round == target) {
                    captured[static_cast<std::size_t>(i)] = x;
                    *done = true;
                    --remaining;
                }
            };
    }
    for (int i = 0; i < n; ++i)
        agents[static_cast<std::size_t>(i)].begin_cycle(1, x0[static_cast<std::size_t>(i)]);
    while (remaining > 0 && !q.empty()) {
        auto [to, m] = q.front();
        q.pop_front();
        agents[static_cast<std::size_t>(to)].receive(m);
    }
    if (remaining > 0)
        throw std::logic_error("message-passing network stalled before round " +
                               std::to_string(target));
    return captured;
}

// Full protocol run to declaration; returns the agents' final values.
std::vector<double> agents_declared(const mas::AgentGraph& g,
                                    const std::vector<double>& x0,
                                    const mas::ConvergenceCriterion& crit) {
    int n = g.n;
    int threshold = crit.r + g.diameter();
    std::vector<mas::ConsensusAgent> agents;
    agents.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        mas::ConsensusAgent::Config c;
        c.id = i;
        c.neighbors = g.neighbors(i);
        c.weight_row = g.weights[static_cast<std::size_t>(i)];
        c.crit = crit;
        c.declare_threshold = threshold;
        agents.emplace_back(std::move(c));
    }
    std::deque<std::pair<int, mas::RoundMsg>> q;
    for (int i = 0; i < n; ++i)
        agents[static_cast<std::size_t>(i)].send = [&q](int to, const mas::RoundMsg& m) {
            q.emplace_back(to, m);
        };
    for (int i = 0; i < n; ++i)
        agents[static_cast<std::size_t>(i)].begin_cycle(1, x0[static_cast<std::size_t>(i)]);
    while (!q.empty()) {
        auto [to, m] = q.front();
        q.pop_front();
        agents[static_cast<std::size_t>(to)].receive(m);
    }
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        if (!agents[static_cast<std::size_t>(i)].declared())
            throw std::logic_error("agent did not declare convergence");
        out[static_cast<std::size_t>(i)] = agents[static_cast<std::size_t>(i)].x();
    }
    return out;
}

Verdict consensus_verdict(std::uint64_t seed) {
    double worst_elem = 0.0, worst_mean = 0.0;
    for (const char* shape : {"ring", "path", "complete"}) {
        for (int n : {2, 3, 4, 6}) {
            auto g = mas::AgentGraph::from_edges(n, shape_edges(shape, n));
            for (int k = 0; k < 10; ++k) {
                netem::RandomStream rng(netem::derive_seed(
                    seed, std::string("acceptance/consensus/") + shape + "/" +
                              std::to_string(n) + "/" + std::to_string(k)));
                std::vector<double> x0(static_cast<std::size_t>(n));
                double mean = 0.0;
                for (auto& v : x0) {
                    v = rng.uniform(-1.0, 1.0);
                    mean += v;
                }
                mean /= n;

                std::vector<double> dense = x0;
                for (int r = 0; r < 20; ++r) dense = mas::consensus_round(dense, g.weights);
                auto passed = agents_after_rounds(g, x0, 20);
                for (int i = 0; i < n; ++i)
                    worst_elem = std::max(
                        worst_elem, std::abs(passed[static_cast<std::size_t>(i)] -
                                             dense[static_cast<std::size_t>(i)]));

                auto finals = agents_declared(g, x0, {1e-10, 3, 500});
                for (double v : finals)
                    worst_mean = std::max(worst_mean, std::abs(v - mean));
            }
        }
    }
    bool pass = worst_elem <= 1e-12 && worst_mean <= 1e-8;
    return verdict("consensus-oracle", pass,
                   "max |agents - W^20 x0| = " + format_double(worst_elem) +
                       ", max |declared - mean(x0)| = " + format_double(worst_mean));
}

Verdict droop_verdict(std::uint64_t seed) {
    netem::RandomStream rng(netem::derive_seed(seed, "acceptance/droop"));
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        grid::MicrogridState st;
        int n = 1 + static_cast<int>(rng.uniform01() * 6.0);
        bool any = false;
        for (int i = 0; i < n; ++i) {
            grid::EssParams e;
            e.id = std::to_string(i + 1);
            e.m_droop = rng.uniform(0.05, 2.0);
            e.p_set = rng.uniform(-0.5, 0.5);
            e.p_min = -50.0;
            e.p_max = 50.0;
            e.u = rng.uniform(-0.5, 0.5);
            e.connected = rng.uniform01() < 0.8;
            any = any || e.connected;
            st.ess.push_back(e);
        }
        if (!any) st.ess[0].connected = true;
        st.p_pv = rng.uniform(0.0, 1.0);
        st.p_building = rng.uniform(0.0, 1.0);
        st.p_load2 = rng.uniform(0.0, 1.0);
        st.breakers.pv = rng.uniform01() < 0.7;
        st.breakers.building = rng.uniform01() < 0.7;
        st.breakers.load2 = rng.uniform01() < 0.7;
        st.damping_d = rng.uniform(0.0, 1.0);
        st.f = grid::steady_state_frequency(st);
        for (auto& e : st.ess) e.p = grid::ess_power(st.f, st.f_nom, e);
        worst = std::max(worst, std::abs(grid::power_balance_residual(st)));
    }
    return verdict("droop-closed-form", worst < 1e-9,
                   "100 randomized sets, worst residual " + format_double(worst) + " pu");
}

Verdict profile_window_verdict() {
    auto p = gateway::synthetic_pv_profile();
    auto c = gateway::crop_window(p, 7200 * kMicrosPerSecond, 12000 * kMicrosPerSecond);
    bool pass = c.samples.size() == 80 && c.samples.front().t_us == 0 &&
                c.samples.back().t_us == 79 * 60 * kMicrosPerSecond;
    return verdict("profile-window", pass,
                   std::to_string(c.samples.size()) +
                       " samples in an 80-minute window of a 1-minute profile");
}

std::string fuzz_line(netem::RandomStream& rng) {
    static const char* heads[] = {"SET", "GET", "PUB", "SUB", "UNSUB", "PING",
                                  "OK",  "ERR", "MSG", "PONG"};
    std::string line;
    if (rng.uniform01() < 0.25) {
        // mutate a plausible frame
        line = std::string(heads[static_cast<int>(rng.uniform01() * 10)]) +
               " a/b " + std::to_string(static_cast<int>(rng.uniform(0, 99))) + " " +
               std::to_string(static_cast<int>(rng.uniform(0, 999999))) + " 1.5\n";
        auto pos = static_cast<std::size_t>(rng.uniform01() * static_cast<double>(line.size()));
        line[std::min(pos, line.size() - 1)] =
            static_cast<char>(rng.uniform(1, 255));
    } else {
        auto len = static_cast<std::size_t>(rng.uniform01() * 80.0);
        for (std::size_t i = 0; i < len; ++i)
            line += static_cast<char>(rng.uniform(1, 255));
        if (rng.uniform01() < 0.8) line += '\n';
    }
    return line;
}

hub::Frame random_frame(netem::RandomStream& rng) {
    auto topic = [&rng] {
        static const char* names[] = {"a", "pv", "grid", "x9", "power", "u_1", "b-2"};
        int segs = 1 + static_cast<int>(rng.uniform01() * 3.0);
        std::string t;
        for (int i = 0; i < segs; ++i) {
            if (i) t += '/';
            t += names[static_cast<int>(rng.uniform01() * 7)];
        }
        return t;
    };
    auto payload = [&rng]() -> hub::Payload {
        if (rng.uniform01() < 0.3) {
            static const char* strs[] = {"1:0:0.5:0", "x", "42", "a.b-c_d"};
            return std::string(strs[static_cast<int>(rng.uniform01() * 4)]);
        }
        double specials[] = {0.0, 1.5, -2.25e-5, 3512.5, 50.0};
        if (rng.uniform01() < 0.3)
            return specials[static_cast<int>(rng.uniform01() * 5)];
        return rng.uniform(-1e6, 1e6);
    };
    auto seq = static_cast<std::uint64_t>(rng.uniform(0, 1e6));
    auto ts = static_cast<Micros>(rng.uniform(0, 1e12));
    switch (static_cast<int>(rng.uniform01() * 10.0)) {
    case 0: return hub::Frame::set(topic(), seq, ts, payload());
    case 1: return hub::Frame::get(topic());
    case 2: return hub::Frame::pub(topic(), seq, ts, payload());
    case 3: return hub::Frame::sub(topic());
    case 4: return hub::Frame::unsub(topic());
    case 5: return hub::Frame::ping();
    case 6: return rng.uniform01() < 0.5 ? hub::Frame::ok()
                                         : hub::Frame::ok_count(seq);
    case 7: return hub::Frame::err(rng.uniform01() < 0.5 ? "nokey" : "badcmd");
    case 8: return hub::Frame::msg(topic(), seq, ts, payload());
    default: return hub::Frame::pong(ts);
    }
}

Verdict protocol_verdict(std::uint64_t seed) {
    netem::RandomStream rng(netem::derive_seed(seed, "acceptance/protocol"));
    std::uint64_t rejected = 0;
    for (int i = 0; i < 100000; ++i) {
        try {
            hub::parse_frame(fuzz_line(rng));
        } catch (const hub::MalformedFrame&) {
            ++rejected;
        }
    }
    int ok = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        hub::Frame f = random_frame(rng);
        auto enc = hub::encode_frame(f);
        auto p = hub::parse_frame(enc);
        if (p == f && hub::encode_frame(p) == enc) ++ok;
    }
    return verdict("protocol-robustness", ok == n,
                   "10^5 fuzz lines (" + std::to_string(rejected) + " rejected), " +
                       std::to_string(ok) + "/" + std::to_string(n) +
                       " round-trips exact");
}

void append_static_verdicts(std::uint64_t seed, std::vector<Verdict>& out) {
    out.push_back(delay_model_verdict(seed));
    out.push_back(ordering_verdict(seed));
    out.push_back(consensus_verdict(seed));
    out.push_back(droop_verdict(seed));
    out.push_back(profile_window_verdict());
    out.push_back(protocol_verdict(seed));
}

void append_run_verdicts(const RunResult& r, std::vector<Verdict>& out) {
    append_restoration_verdicts(r, out);
    append_link_verdicts(r, out);
}

bool same_csv_bytes(const RunResult& a, const RunResult& b, std::string& note) {
    if (render_trace_csv(a) != render_trace_csv(b)) {
        note = "trace.csv differs";
        return false;
    }
    if (a.links.size() != b.links.size()) {
        note = "link set differs";
        return false;
    }
    for (std::size_t i = 0; i < a.links.size(); ++i) {
        if (a.links[i].name != b.links[i].name ||
            a.links[i].stats.to_csv() != b.links[i].stats.to_csv()) {
            note = "latency_" + a.links[i].name + ".csv differs";
            return false;
        }
    }
    note = "trace.csv and latency CSVs identical";
    return true;
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

std::vector<grid::TraceRow> parse_trace_csv(const std::string& text, int ess_count) {
    std::vector<grid::TraceRow> rows;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) return rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string_view> cols;
        std::string_view sv(line);
        std::size_t start = 0;
        for (;;) {
            auto comma = sv.find(',', start);
            cols.push_back(sv.substr(start, comma == std::string_view::npos
                                                ? std::string_view::npos
                                                : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        auto want = static_cast<std::size_t>(5 + 2 * ess_count);
        if (cols.size() != want) throw IoError("trace.csv: bad column count");
        grid::TraceRow row;
        double f;
        if (!parse_i64(cols[0], row.t_us) || !parse_double(cols[1], f))
            throw IoError("trace.csv: bad row");
        row.f = f;
        parse_double(cols[2], row.p_pv);
        parse_double(cols[3], row.p_building);
        parse_double(cols[4], row.p_load2);
        for (int i = 0; i < ess_count; ++i) {
            double v;
            parse_double(cols[static_cast<std::size_t>(5 + i)], v);
            row.p_ess.push_back(v);
        }
        for (int i = 0; i < ess_count; ++i) {
            double v;
            parse_double(cols[static_cast<std::size_t>(5 + ess_count + i)], v);
            row.u.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace

std::vector<Verdict> check_acceptance(const RunResult& r) {
    std::vector<Verdict> out;
    append_run_verdicts(r, out);

    if (r.scenario.mode == RunMode::virtual_time) {
        RunResult again = run_virtual(r.scenario);
        std::string note;
        bool same = same_csv_bytes(r, again, note);
        out.push_back(verdict("determinism", same, note));
    } else {
        out.push_back(
            verdict("determinism", true, "virtual-mode property (run was realtime)", true));
    }

    append_static_verdicts(r.scenario.seed, out);
    return out;
}

std::vector<Verdict> check_result_dir(const std::string& dir) {
    std::vector<Verdict> out;
    Scenario s;
    try {
        s = load_scenario_file(dir + "/scenario.snapshot.scn", /*check_files=*/false);
    } catch (const std::exception& e) {
        out.push_back(verdict("result-dir", false, e.what()));
        return out;
    }

    if (s.mode == RunMode::virtual_time) {
        RunResult again;
        try {
            again = run_virtual(s);
        } catch (const std::exception& e) {
            out.push_back(verdict("result-dir", false,
                                  std::string("snapshot re-run failed: ") + e.what()));
            return out;
        }
        append_run_verdicts(again, out);
        bool same = true;
        std::string note = "re-run reproduces the saved bytes";
        if (read_file(dir + "/trace.csv") != render_trace_csv(again)) {
            same = false;
            note = "trace.csv differs from a re-run";
        }
        for (const auto& l : again.links) {
            if (read_file(dir + "/latency_" + l.name + ".csv") != l.stats.to_csv()) {
                same = false;
                note = "latency_" + l.name + ".csv differs from a re-run";
                break;
            }
        }
        out.push_back(verdict("determinism", same, note));
        append_static_verdicts(s.seed, out);
    } else {
        RunResult partial;
        partial.scenario = s;
        partial.trace = parse_trace_csv(read_file(dir + "/trace.csv"), s.ess_count);
        append_restoration_verdicts(partial, out);
        out.push_back(verdict("determinism", true,
                              "virtual-mode property (saved run was realtime)", true));
        append_static_verdicts(s.seed, out);
    }
    return out;
}

} // namespace gridloop::orch
