#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include "gridloop/common.hpp"

namespace gridloop::hub {

class MalformedFrame : public std::runtime_error {
public:
    explicit MalformedFrame(const std::string& msg) : std::runtime_error(msg) {}
};

enum class Cmd { Set, Get, Pub, Sub, Unsub, Ping, Ok, Err, Msg, Pong };

// Frame payload: a decimal float or a quoted string.
using Payload = std::variant<double, std::string>;

// One parsed unit of the hub wire protocol. Field usage per command:
//   SET/PUB/MSG: topic, seq, ts_us, payload
//   GET/SUB/UNSUB: topic (pattern for SUB/UNSUB)
//   PING: nothing           PONG: ts_us
//   OK: optional count      ERR: code
struct Frame {
    Cmd cmd = Cmd::Ping;
    std::string topic;
    std::uint64_t seq = 0;
    Micros ts_us = 0;
    Payload payload = 0.0;
    std::optional<std::uint64_t> count;
    std::string code;

    bool operator==(const Frame&) const = default;

    static Frame ping() { return {Cmd::Ping, {}, 0, 0, 0.0, {}, {}}; }
    static Frame pong(Micros ts) { return {Cmd::Pong, {}, 0, ts, 0.0, {}, {}}; }
    static Frame ok() { return {Cmd::Ok, {}, 0, 0, 0.0, {}, {}}; }
    static Frame ok_count(std::uint64_t n) { return {Cmd::Ok, {}, 0, 0, 0.0, n, {}}; }
    static Frame err(std::string code) { return {Cmd::Err, {}, 0, 0, 0.0, {}, std::move(code)}; }
    static Frame get(std::string topic) { return {Cmd::Get, std::move(topic), 0, 0, 0.0, {}, {}}; }
    static Frame sub(std::string pattern) { return {Cmd::Sub, std::move(pattern), 0, 0, 0.0, {}, {}}; }
    static Frame unsub(std::string pattern) { return {Cmd::Unsub, std::move(pattern), 0, 0, 0.0, {}, {}}; }
    static Frame set(std::string topic, std::uint64_t seq, Micros ts, Payload p) {
        return {Cmd::Set, std::move(topic), seq, ts, std::move(p), {}, {}};
    }
    static Frame pub(std::string topic, std::uint64_t seq, Micros ts, Payload p) {
        return {Cmd::Pub, std::move(topic), seq, ts, std::move(p), {}, {}};
    }
    static Frame msg(std::string topic, std::uint64_t seq, Micros ts, Payload p) {
        return {Cmd::Msg, std::move(topic), seq, ts, std::move(p), {}, {}};
    }
};

constexpr std::size_t kMaxFrameBytes = 4096;

// Topic grammar: segment("/"segment)*, segment = [A-Za-z0-9_-]+.
// Pattern segments may additionally be a lone "*" matching one segment.
bool valid_topic(std::string_view topic);
bool valid_pattern(std::string_view pattern);
bool topic_matches(std::string_view pattern, std::string_view topic);

// Parses one newline-terminated UTF-8 line (<= 4096 bytes).
// Throws MalformedFrame on any protocol violation; never crashes.
Frame parse_frame(std::string_view line);

// Canonical single-line encoding, floats rendered shortest-round-trip.
std::string encode_frame(const Frame& f);

} // namespace gridloop::hub
