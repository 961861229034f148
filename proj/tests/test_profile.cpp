#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gridloop/profile.hpp"

using namespace gridloop;
using namespace gridloop::gateway;

TEST_CASE("csv parse and render round-trip") {
    const char* text = "t_us,power_w\n0,1200\n60000000,2600.5\n120000000,-3\n";
    Profile p = load_profile(text, "pv", "day-1");
    REQUIRE(p.samples.size() == 3);
    CHECK(p.device_id == "pv");
    CHECK(p.epoch_label == "day-1");
    CHECK(p.samples[1].t_us == 60'000'000);
    CHECK(p.samples[1].power_w == 2600.5);
    CHECK(to_csv(p) == text);
    Profile again = load_profile(to_csv(p), p.device_id, p.epoch_label);
    CHECK(again.samples.size() == p.samples.size());
    for (std::size_t i = 0; i < p.samples.size(); ++i) {
        CHECK(again.samples[i].t_us == p.samples[i].t_us);
        CHECK(again.samples[i].power_w == p.samples[i].power_w);
    }
}

TEST_CASE("parser rejects malformed input") {
    CHECK_THROWS_AS(load_profile(""), ParseError);
    CHECK_THROWS_AS(load_profile("time,watts\n0,1\n"), ParseError);
    CHECK_THROWS_AS(load_profile("t_us,power_w\n"), ParseError); // no rows
    CHECK_THROWS_AS(load_profile("t_us,power_w\nx,1\n"), ParseError);
    CHECK_THROWS_AS(load_profile("t_us,power_w\n0\n"), ParseError);
    CHECK_THROWS_AS(load_profile("t_us,power_w\n0,1,2\n"), ParseError);
    CHECK_THROWS_AS(load_profile("t_us,power_w\n0,1\n0,2\n"), NonMonotoneTime);
    CHECK_THROWS_AS(load_profile("t_us,power_w\n60,1\n0,2\n"), NonMonotoneTime);
}

TEST_CASE("missing profile file") {
    CHECK_THROWS_AS(load_profile_file("/nonexistent/profile.csv"), MissingFile);
}

TEST_CASE("crop window is half-open and re-based") {
    Profile p;
    for (int k = 0; k < 4; ++k)
        p.samples.push_back({k * 60 * kMicrosPerSecond, 100.0 * k});

    Profile c = crop_window(p, 60 * kMicrosPerSecond, 180 * kMicrosPerSecond);
    REQUIRE(c.samples.size() == 2); // samples at 60 and 120 s; 180 s excluded
    CHECK(c.samples[0].t_us == 0);
    CHECK(c.samples[0].power_w == 100.0);
    CHECK(c.samples[1].t_us == 60 * kMicrosPerSecond);
    CHECK(c.samples[1].power_w == 200.0);

    CHECK_THROWS_AS(crop_window(p, 1000 * kMicrosPerSecond, 2000 * kMicrosPerSecond),
                    EmptyWindow);
    CHECK_THROWS_AS(crop_window(p, 60, 60), std::invalid_argument);
    CHECK_THROWS_AS(crop_window(p, 120, 60), std::invalid_argument);
}

TEST_CASE("an 80-minute window of a per-minute profile has 80 samples") {
    Profile c = crop_window(synthetic_pv_profile(), 7200 * kMicrosPerSecond,
                            12000 * kMicrosPerSecond);
    REQUIRE(c.samples.size() == 80);
    CHECK(c.samples.front().t_us == 0);
    CHECK(c.samples.back().t_us == 79 * 60 * kMicrosPerSecond);
}

TEST_CASE("zero-order hold") {
    Profile p;
    p.samples = {{0, 1.0}, {10, 2.0}, {20, 3.0}};
    CHECK(sample_hold(p, 0) == 1.0);
    CHECK(sample_hold(p, 9) == 1.0);
    CHECK(sample_hold(p, 10) == 2.0);
    CHECK(sample_hold(p, 19) == 2.0);
    CHECK(sample_hold(p, 1000) == 3.0); // held past the end
    CHECK_THROWS_AS(sample_hold(p, -1), BeforeStart);
}

TEST_CASE("builtin day curves") {
    Profile pv = synthetic_pv_profile();
    Profile bld = synthetic_building_profile();
    REQUIRE(pv.samples.size() == 421); // 09:00..16:00 inclusive, per minute
    REQUIRE(bld.samples.size() == 421);
    for (std::size_t i = 1; i < pv.samples.size(); ++i)
        CHECK(pv.samples[i].t_us - pv.samples[i - 1].t_us == 60 * kMicrosPerSecond);

    double peak = 0.0;
    for (const auto& s : pv.samples) {
        CHECK(s.power_w >= 0.0);
        peak = std::max(peak, s.power_w);
    }
    CHECK(peak > 3000.0);
    CHECK(peak < 3700.0);
    // afternoon output is below the mid-day peak
    CHECK(pv.samples[420].power_w < 0.75 * peak);

    // the stepped load hits each plateau
    CHECK(bld.samples[0].power_w == 1200.0);
    CHECK(bld.samples[40].power_w == 2600.0);
    CHECK(bld.samples[90].power_w == 1400.0);
    CHECK(bld.samples[170].power_w == 2200.0);
    CHECK(bld.samples[210].power_w == 1600.0);
}
