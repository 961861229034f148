#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "gridloop/microgrid.hpp"
#include "gridloop/netem.hpp"

using namespace gridloop;
using namespace gridloop::grid;

namespace {

MicrogridState one_unit(double m = 0.1) {
    MicrogridState s;
    s.ess.push_back({"1", m, 0.0, -1.0, 1.0, 0.0, 0.0, true});
    return s;
}

struct FakeSession : hub::HubSession {
    struct Pub {
        std::string topic;
        std::uint64_t seq;
        Micros ts;
        double value;
    };
    std::vector<Pub> pubs;
    std::vector<std::string> subs;

    void publish(const std::string& topic, std::uint64_t seq, Micros ts,
                 hub::Payload payload) override {
        pubs.push_back({topic, seq, ts, std::get<double>(payload)});
    }
    void set(const std::string&, std::uint64_t, Micros, hub::Payload) override {}
    void get(const std::string&, std::function<void(std::optional<hub::Frame>)>) override {}
    void subscribe(const std::string& pattern) override { subs.push_back(pattern); }
    void unsubscribe(const std::string&) override {}
    void ping(std::function<void(std::optional<Micros>)>, Micros) override {}
};

} // namespace

TEST_CASE("droop equilibrium, worked examples") {
    MicrogridState s = one_unit();
    s.p_load2 = 0.05;
    s.breakers.load2 = true;
    // one unit, m = 0.1 Hz/pu, 0.05 pu load: f sags by 0.05 * 0.1
    CHECK(steady_state_frequency(s) == doctest::Approx(49.995).epsilon(1e-12));

    // a +0.005 Hz secondary correction restores nominal exactly
    s.ess[0].u = 0.005;
    CHECK(steady_state_frequency(s) == doctest::Approx(50.0).epsilon(1e-12));

    // two units share inversely to their droop slopes
    MicrogridState t;
    t.ess.push_back({"1", 0.1, 0.0, -1.0, 1.0, 0.0, 0.0, true});
    t.ess.push_back({"2", 0.2, 0.0, -1.0, 1.0, 0.0, 0.0, true});
    t.p_load2 = 0.15;
    t.breakers.load2 = true;
    double f = steady_state_frequency(t);
    CHECK(f == doctest::Approx(49.99).epsilon(1e-12));
    double p1 = ess_power(f, t.f_nom, t.ess[0]);
    double p2 = ess_power(f, t.f_nom, t.ess[1]);
    CHECK(p1 == doctest::Approx(0.10).epsilon(1e-12));
    CHECK(p2 == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(p1 / p2 == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("the equilibrium balances power exactly") {
    netem::RandomStream rng(7);
    for (int k = 0; k < 200; ++k) {
        MicrogridState s;
        int n = 1 + static_cast<int>(rng.uniform01() * 5.0);
        bool any = false;
        for (int i = 0; i < n; ++i) {
            EssParams e;
            e.id = std::to_string(i + 1);
            e.m_droop = rng.uniform(0.05, 2.0);
            e.p_set = rng.uniform(-0.5, 0.5);
            e.p_min = -50.0; // wide enough that nothing clamps
            e.p_max = 50.0;
            e.u = rng.uniform(-0.5, 0.5);
            e.connected = rng.uniform01() < 0.8;
            any = any || e.connected;
            s.ess.push_back(e);
        }
        if (!any) s.ess[0].connected = true;
        s.p_pv = rng.uniform(0.0, 1.0);
        s.p_building = rng.uniform(0.0, 1.0);
        s.p_load2 = rng.uniform(0.0, 1.0);
        s.breakers.pv = rng.uniform01() < 0.7;
        s.breakers.building = rng.uniform01() < 0.7;
        s.breakers.load2 = rng.uniform01() < 0.7;
        s.damping_d = rng.uniform(0.0, 1.0);
        s.f = steady_state_frequency(s);
        CHECK(std::abs(power_balance_residual(s)) < 1e-9);
    }
}

TEST_CASE("external power respects breakers and direction") {
    MicrogridState s = one_unit();
    s.p_pv = 0.3;
    s.p_building = 0.2;
    s.p_load2 = 0.1;
    CHECK(s.p_ext() == 0.0); // everything starts disconnected
    s.breakers.pv = true;
    CHECK(s.p_ext() == doctest::Approx(0.3)); // generation injects
    s.breakers.building = true;
    s.breakers.load2 = true;
    CHECK(s.p_ext() == doctest::Approx(0.3 - 0.2 - 0.1)); // loads draw
}

TEST_CASE("power scales with the system base") {
    MicrogridState s = one_unit();
    s.s_base = 10000.0;
    step(s, 10'000, {{"prismes/pv/power", 2000.0, 0, 1, {}}});
    CHECK(s.p_pv == doctest::Approx(0.2).epsilon(1e-12));

    MicrogridState d = one_unit();
    d.s_base = 20000.0; // doubling the base halves the per-unit value
    step(d, 10'000, {{"prismes/pv/power", 2000.0, 0, 1, {}}});
    CHECK(d.p_pv == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("setpoint topics update only the matching unit") {
    MicrogridState s;
    s.ess.push_back({"1", 0.1, 0.0, -1.0, 1.0, 0.0, 0.0, true});
    s.ess.push_back({"2", 0.1, 0.0, -1.0, 1.0, 0.0, 0.0, true});
    step(s, 10'000,
         {{"predis/ess/2/u", 0.25, 0, 1, {}}, {"predis/ess/9/u", 9.0, 0, 1, {}}});
    CHECK(s.ess[0].u == 0.0);
    CHECK(s.ess[1].u == 0.25);
}

TEST_CASE("no connected forming source is fatal") {
    MicrogridState s = one_unit();
    s.ess[0].connected = false;
    CHECK_THROWS_AS(steady_state_frequency(s), NoFormingSource);
    CHECK_THROWS_AS(Simulator(MicrogridState{}, 10'000, kMicrosPerSecond, {}),
                    NoFormingSource);
}

TEST_CASE("capacity limits clamp the droop response") {
    EssParams e{"1", 0.1, 0.0, -0.02, 0.03, 0.0, 0.0, true};
    CHECK(ess_power(49.9, 50.0, e) == 0.03); // wants 1.0 pu, capped
    CHECK(ess_power(50.1, 50.0, e) == -0.02);
    CHECK(ess_power(49.999, 50.0, e) == doctest::Approx(0.01).epsilon(1e-9));
}

TEST_CASE("frequency relaxes first-order toward the equilibrium") {
    MicrogridState s = one_unit();
    s.p_load2 = 0.05;
    s.breakers.load2 = true;
    s.tau_f = 0.5;
    double f_ss = steady_state_frequency(s);
    double dt = 0.01;
    double expect = f_ss + (50.0 - f_ss) * std::pow(1.0 - dt / 0.5, 100);
    for (int k = 0; k < 100; ++k) step(s, 10'000, {});
    CHECK(s.f == doctest::Approx(expect).epsilon(1e-9));
    CHECK(s.t_us == kMicrosPerSecond);

    // two half steps land closer to the continuous exponential than one full step
    MicrogridState h = one_unit();
    h.p_load2 = 0.05;
    h.breakers.load2 = true;
    step(h, 5'000, {});
    step(h, 5'000, {});
    MicrogridState full = one_unit();
    full.p_load2 = 0.05;
    full.breakers.load2 = true;
    step(full, 10'000, {});
    double exact = f_ss + (50.0 - f_ss) * std::exp(-0.01 / 0.5);
    CHECK(std::abs(h.f - exact) < std::abs(full.f - exact));
}

TEST_CASE("disturbances toggle breakers idempotently") {
    MicrogridState s = one_unit();
    apply_disturbance(s, {0, Action::connect, Target::pv});
    CHECK(s.breakers.pv);
    apply_disturbance(s, {0, Action::connect, Target::pv});
    CHECK(s.breakers.pv);
    apply_disturbance(s, {0, Action::disconnect, Target::pv});
    CHECK_FALSE(s.breakers.pv);
}

TEST_CASE("simulator records, emits, then steps") {
    FakeSession sess;
    MicrogridState init = one_unit();
    init.p_load2 = 0.05;
    Simulator sim(init, 10'000, 50'000, {{20'000, Action::connect, Target::load2}});
    sim.attach(sess);
    REQUIRE(sess.subs.size() == 3);
    CHECK(sess.subs[0] == "prismes/pv/power");
    CHECK(sess.subs[1] == "prismes/building/power");
    CHECK(sess.subs[2] == "predis/ess/*/u");

    for (Micros t = 0; t < 100'000; t += 10'000) sim.tick(t);

    REQUIRE(sim.trace().size() == 10);
    CHECK(sim.trace()[0].t_us == 0);
    CHECK(sim.trace()[0].f == 50.0); // row describes the pre-step state
    CHECK(sim.trace()[9].t_us == 90'000);

    // emissions at 0 and 50 ms: freq + one per unit
    REQUIRE(sess.pubs.size() == 4);
    CHECK(sess.pubs[0].topic == "predis/grid/freq");
    CHECK(sess.pubs[1].topic == "predis/ess/1/p");
    CHECK(sess.pubs[2].ts == 50'000);

    // load2 connected from the 20 ms tick onward: f must have sagged
    CHECK(sim.state().breakers.load2);
    CHECK(sim.trace()[2].f == 50.0); // connect applies after the 20 ms row
    CHECK(sim.trace()[9].f < 50.0);
}

TEST_CASE("simulator folds delivered frames on the next tick") {
    FakeSession sess;
    MicrogridState init = one_unit();
    init.breakers.pv = true;
    Simulator sim(init, 10'000, kMicrosPerSecond, {});
    sim.attach(sess);
    REQUIRE(sess.on_message);
    sess.on_message(hub::Frame::msg("prismes/pv/power", 1, 0, 1500.0));
    sess.on_message(hub::Frame::msg("predis/ess/1/u", 1, 0, 0.01));
    sim.tick(0);
    CHECK(sim.state().p_pv == doctest::Approx(0.15).epsilon(1e-12));
    CHECK(sim.state().ess[0].u == 0.01);
    // a non-numeric payload is dropped, not folded
    sess.on_message(hub::Frame::msg("prismes/pv/power", 2, 0, std::string("x")));
    sim.tick(10'000);
    CHECK(sim.state().p_pv == doctest::Approx(0.15).epsilon(1e-12));
}
