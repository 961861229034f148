#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "gridloop/profile.hpp"
#include "gridloop/scenario.hpp"

using namespace gridloop;
using namespace gridloop::orch;

namespace {
const ParseOptions kNoFiles{".", false};
}

TEST_CASE("a minimal scenario materializes every default") {
    Scenario s = parse_scenario("[run]\nhorizon_s = 180\n");
    CHECK(s.horizon_us == 180 * kMicrosPerSecond);
    CHECK(s.mode == RunMode::virtual_time);
    CHECK(s.seed == 42);
    CHECK(s.emission_period_us == kMicrosPerSecond);
    CHECK(s.hub_addr == "127.0.0.1:7781");
    CHECK(s.wan.base_ms == 32.0);
    CHECK(s.wan.spike_prob == 0.01);
    CHECK(s.lan.base_ms == 0.1);
    CHECK(s.pv_path.empty()); // builtin curve
    CHECK(s.window_start_us == 7200 * kMicrosPerSecond);
    CHECK(s.ess_count == 4);
    CHECK(s.f0_hz == s.f_nom_hz);
    // default neighborhood is the ring over all units
    std::vector<std::pair<int, int>> ring = {{0, 1}, {0, 3}, {1, 2}, {2, 3}};
    CHECK(s.edges == ring);
    CHECK(s.transport == mas::AgentFleet::Transport::mesh);
    CHECK(s.disturbances.empty());
}

TEST_CASE("parsing tolerates comments, blanks and spacing") {
    Scenario s = parse_scenario("# experiment\n"
                                "\n"
                                "[run]  # timing\n"
                                "  horizon_s=90# tight\n"
                                "\tseed =\t7\n");
    CHECK(s.horizon_us == 90 * kMicrosPerSecond);
    CHECK(s.seed == 7);
}

TEST_CASE("canonical print round-trips") {
    std::string text =
        "[run]\n"
        "horizon_s = 60\n"
        "mode = realtime\n"
        "seed = 9\n"
        "out_dir = results\n"
        "[link.wan]\n"
        "base_ms = 25\n"
        "jitter_std_ms = 1.5\n"
        "spike_prob = 0.02\n"
        "mode = datagram\n"
        "[profiles]\n"
        "pv = data/pv_day.csv\n"
        "window_start_s = 0\n"
        "window_end_s = 3600\n"
        "[grid]\n"
        "ess_count = 3\n"
        "droop_hz_per_pu = 1\n"
        "load2_pu = 0.2\n"
        "f0_hz = 49.9\n"
        "[agents]\n"
        "edges = 1-2, 2-3\n"
        "k_s = 0.8\n"
        "transport = hub\n"
        "[disturbance]\n"
        "t_s = 30\n"
        "action = disconnect\n"
        "target = building\n"
        "site = gateway\n"
        "[disturbance]\n"
        "t_s = 10\n"
        "action = connect\n"
        "target = pv\n";
    Scenario s = parse_scenario(text, kNoFiles);
    CHECK(s.mode == RunMode::realtime);
    CHECK(s.wan.mode == netem::LinkMode::datagram);
    CHECK(s.pv_path == "data/pv_day.csv");
    CHECK(s.building_path.empty());
    CHECK(s.ess_count == 3);
    CHECK(s.edges == std::vector<std::pair<int, int>>{{0, 1}, {1, 2}});
    // disturbances come back sorted by time
    REQUIRE(s.disturbances.size() == 2);
    CHECK(s.disturbances[0].t_us == 10 * kMicrosPerSecond);
    CHECK(s.disturbances[0].site == Site::sim);
    CHECK(s.disturbances[1].site == Site::gateway);

    Scenario again = parse_scenario(print_scenario(s), kNoFiles);
    CHECK(again == s);
    CHECK(print_scenario(again) == print_scenario(s));
}

TEST_CASE("defaults round-trip through the printer too") {
    Scenario s = parse_scenario("[run]\nhorizon_s = 180\n");
    CHECK(parse_scenario(print_scenario(s), kNoFiles) == s);
}

TEST_CASE("format faults carry the line number") {
    CHECK_THROWS_WITH_AS(parse_scenario("[run]\nhorizon_s = 10\nhorizon_s = 20\n"),
                         doctest::Contains("line 3"), SyntaxError);
    CHECK_THROWS_WITH_AS(parse_scenario("horizon_s = 10\n"),
                         doctest::Contains("line 1"), SyntaxError);
    CHECK_THROWS_WITH_AS(parse_scenario("[run]\nhorizon_s\n"),
                         doctest::Contains("line 2"), SyntaxError);
    CHECK_THROWS_WITH_AS(parse_scenario("[run\nhorizon_s = 10\n"),
                         doctest::Contains("line 1"), SyntaxError);
    CHECK_THROWS_WITH_AS(parse_scenario("[run]\n[run]\n"),
                         doctest::Contains("duplicate section"), SyntaxError);
    // repeated [disturbance] sections are the one allowed repetition
    CHECK_NOTHROW(parse_scenario(
        "[run]\nhorizon_s = 60\n"
        "[disturbance]\nt_s = 1\n[disturbance]\nt_s = 2\n"));
}

TEST_CASE("semantic faults name the field") {
    CHECK_THROWS_WITH_AS(parse_scenario("[run]\nhorizon_s = 60\nwarp = 9\n"),
                         doctest::Contains("run.warp"), ValidationError);
    CHECK_THROWS_WITH_AS(parse_scenario("[warp]\nx = 1\n"),
                         doctest::Contains("unknown section"), ValidationError);
    CHECK_THROWS_WITH_AS(parse_scenario("[run]\nhorizon_s = fast\n"),
                         doctest::Contains("horizon_s"), ValidationError);
    CHECK_THROWS_WITH_AS(parse_scenario("[run]\nmode = warp\n"),
                         doctest::Contains("run.mode"), ValidationError);
    CHECK_THROWS_WITH_AS(
        parse_scenario("[profiles]\nwindow_start_s = 100\nwindow_end_s = 100\n"),
        doctest::Contains("window_start_s"), ValidationError);
    CHECK_THROWS_WITH_AS(parse_scenario("[grid]\np_min_pu = 0.5\n"),
                         doctest::Contains("p_min_pu"), ValidationError);
    CHECK_THROWS_WITH_AS(parse_scenario("[agents]\nquiet_rounds = 9\nmax_iter = 3\n"),
                         doctest::Contains("max_iter"), ValidationError);
    CHECK_THROWS_WITH_AS(parse_scenario("[grid]\ness_count = 4\n"
                                        "[agents]\nedges = 1-2, 3-4\n"),
                         doctest::Contains("not connected"), ValidationError);
    CHECK_THROWS_WITH_AS(parse_scenario("[agents]\nedges = 1-9\n"),
                         doctest::Contains("agent id"), ValidationError);
    CHECK_THROWS_WITH_AS(parse_scenario("[run]\nhorizon_s = 60\n"
                                        "[disturbance]\nt_s = 90\n"),
                         doctest::Contains("beyond the run horizon"), ValidationError);
    CHECK_THROWS_WITH_AS(parse_scenario("[disturbance]\nt_s = 1\ntarget = load2\n"
                                        "site = gateway\n"),
                         doctest::Contains("load2"), ValidationError);
    CHECK_THROWS_WITH_AS(parse_scenario("[disturbance]\naction = connect\n"),
                         doctest::Contains("t_s"), ValidationError);
}

TEST_CASE("profile paths are checked against the filesystem on demand") {
    const char* text = "[profiles]\npv = nosuch/pv.csv\n";
    CHECK_THROWS_AS(parse_scenario(text), gateway::MissingFile);
    Scenario s = parse_scenario(text, kNoFiles);
    CHECK(s.pv_path == "nosuch/pv.csv");
    // relative paths resolve against the scenario's directory
    Scenario t = parse_scenario(text, {"/etc", false});
    CHECK(t.pv_path == "/etc/nosuch/pv.csv");
}

TEST_CASE("scenario equality is structural") {
    Scenario a = parse_scenario("[run]\nseed = 1\n");
    Scenario b = parse_scenario("[run]\nseed = 1\n");
    Scenario c = parse_scenario("[run]\nseed = 2\n");
    CHECK(a == b);
    CHECK(a != c);
}
