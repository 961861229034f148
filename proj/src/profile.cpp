#include "gridloop/profile.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>

namespace gridloop::gateway {

Profile load_profile(std::string_view csv_text, std::string device_id,
                     std::string epoch_label) {
    Profile p;
    p.device_id = std::move(device_id);
    p.epoch_label = std::move(epoch_label);

    std::size_t pos = 0;
    int line_no = 0;
    auto next_line = [&]() -> std::optional<std::string_view> {
        if (pos >= csv_text.size()) return std::nullopt;
        auto nl = csv_text.find('\n', pos);
        std::string_view line = csv_text.substr(pos, nl == std::string_view::npos
                                                         ? std::string_view::npos
                                                         : nl - pos);
        pos = nl == std::string_view::npos ? csv_text.size() : nl + 1;
        ++line_no;
        return line;
    };

    auto header = next_line();
    if (!header || *header != "t_us,power_w")
        throw ParseError("profile: expected header t_us,power_w");

    while (auto line = next_line()) {
        if (line->empty()) {
            if (pos >= csv_text.size()) break; // trailing newline
            throw ParseError("profile: blank line " + std::to_string(line_no));
        }
        auto comma = line->find(',');
        if (comma == std::string_view::npos)
            throw ParseError("profile: missing comma on line " + std::to_string(line_no));
        Micros t;
        double w;
        if (!parse_i64(line->substr(0, comma), t) || !parse_double(line->substr(comma + 1), w))
            throw ParseError("profile: bad number on line " + std::to_string(line_no));
        if (!p.samples.empty() && t <= p.samples.back().t_us)
            throw NonMonotoneTime("profile: t not strictly increasing at line " +
                                  std::to_string(line_no));
        p.samples.push_back({t, w});
    }
    if (p.samples.empty()) throw ParseError("profile: no data rows");
    return p;
}

Profile load_profile_file(const std::string& path, std::string device_id) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MissingFile("profile file not found: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return load_profile(buf.str(), std::move(device_id), path);
}

std::string to_csv(const Profile& p) {
    std::string out = "t_us,power_w\n";
    for (const auto& s : p.samples) {
        out += std::to_string(s.t_us);
        out += ',';
        out += format_double(s.power_w);
        out += '\n';
    }
    return out;
}

Profile crop_window(const Profile& p, Micros start_us, Micros end_us) {
    if (start_us >= end_us) throw std::invalid_argument("crop_window: start >= end");
    Profile out;
    out.device_id = p.device_id;
    out.epoch_label = p.epoch_label;
    for (const auto& s : p.samples)
        if (s.t_us >= start_us && s.t_us < end_us)
            out.samples.push_back({s.t_us - start_us, s.power_w});
    if (out.samples.empty())
        throw EmptyWindow("crop_window: no samples in [" + std::to_string(start_us) + ", " +
                          std::to_string(end_us) + ")");
    return out;
}

double sample_hold(const Profile& p, Micros t_us) {
    if (p.samples.empty() || t_us < p.samples.front().t_us)
        throw BeforeStart("sample_hold: t before first sample");
    // last sample with t <= t_us
    auto it = std::upper_bound(p.samples.begin(), p.samples.end(), t_us,
                               [](Micros t, const ProfileSample& s) { return t < s.t_us; });
    return std::prev(it)->power_w;
}

namespace {
constexpr Micros kStep = 60 * kMicrosPerSecond;
constexpr int kDaySamples = 421; // 09:00..16:00 inclusive, one per minute
} // namespace

Profile synthetic_pv_profile() {
    Profile p;
    p.device_id = "pv";
    p.epoch_label = "synthetic";
    for (int k = 0; k < kDaySamples; ++k) {
        double t = static_cast<double>(k) * 60.0; // seconds since 09:00
        double bell = std::exp(-std::pow((t - 12600.0) / 9000.0, 2.0));
        double ripple = 1.0 + 0.03 * std::sin(2.0 * std::numbers::pi * t / 1800.0);
        p.samples.push_back({static_cast<Micros>(k) * kStep, 3500.0 * bell * ripple});
    }
    return p;
}

Profile synthetic_building_profile() {
    Profile p;
    p.device_id = "building";
    p.epoch_label = "synthetic";
    for (int k = 0; k < kDaySamples; ++k) {
        double t = static_cast<double>(k) * 60.0;
        double w = t < 2400.0    ? 1200.0
                   : t < 5400.0  ? 2600.0
                   : t < 10200.0 ? 1400.0
                   : t < 12600.0 ? 2200.0
                                 : 1600.0;
        p.samples.push_back({static_cast<Micros>(k) * kStep, w});
    }
    return p;
}

} // namespace gridloop::gateway
