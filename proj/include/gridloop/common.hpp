#pragma once

#include <charconv>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gridloop {

// All timestamps are integer microseconds since the scenario epoch.
using Micros = std::int64_t;

constexpr Micros kMicrosPerSecond = 1'000'000;

inline Micros seconds_to_micros(double s) {
    return static_cast<Micros>(s * 1e6 + (s >= 0 ? 0.5 : -0.5));
}

inline double micros_to_ms(Micros us) { return static_cast<double>(us) / 1000.0; }

// One timestamped, sequenced telemetry sample.
struct Measurement {
    std::string topic;
    double value = 0.0;
    Micros source_ts = 0;
    std::uint64_t seq = 0;
    std::string source_id;

    bool operator==(const Measurement&) const = default;
};

// Shortest decimal string that round-trips the double exactly.
inline std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw std::runtime_error("format_double: to_chars failed");
    return std::string(buf, end);
}

// Full-string strict parse; returns false on trailing garbage or empty input.
inline bool parse_double(std::string_view s, double& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

inline bool parse_u64(std::string_view s, std::uint64_t& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

inline bool parse_i64(std::string_view s, std::int64_t& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

} // namespace gridloop
