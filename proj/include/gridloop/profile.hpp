#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "gridloop/common.hpp"

namespace gridloop::gateway {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonMonotoneTime : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyWindow : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct BeforeStart : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MissingFile : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ProfileSample {
    Micros t_us = 0;
    double power_w = 0.0;
};

// A recorded (or synthesized) power curve for one device. Timestamps are
// microseconds relative to the profile's own epoch, which is kept only as a
// label so no timezone arithmetic ever happens.
struct Profile {
    std::string device_id;
    std::string epoch_label;
    std::vector<ProfileSample> samples;
};

// Parses `t_us,power_w` CSV text. Throws ParseError on bad header/rows/empty
// body, NonMonotoneTime unless timestamps strictly increase.
Profile load_profile(std::string_view csv_text, std::string device_id = {},
                     std::string epoch_label = {});

// load_profile over a file; throws MissingFile if unreadable.
Profile load_profile_file(const std::string& path, std::string device_id = {});

std::string to_csv(const Profile& p);

// Samples with start <= t < end, re-based so the window start is t = 0.
// Throws EmptyWindow if nothing falls inside, std::invalid_argument if
// start >= end.
Profile crop_window(const Profile& p, Micros start_us, Micros end_us);

// Zero-order hold: value of the latest sample at or before t. Throws
// BeforeStart for t ahead of the first sample.
double sample_hold(const Profile& p, Micros t_us);

// Built-in day curves used when a scenario names no recording: a bell-shaped
// PV curve peaking ~3.5 kW around mid-day and a stepped building load,
// both covering 09:00-16:00 at one sample per minute (t = 0 at 09:00).
Profile synthetic_pv_profile();
Profile synthetic_building_profile();

} // namespace gridloop::gateway
