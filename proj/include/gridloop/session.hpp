#pragma once

#include <deque>
#include <functional>
#include <optional>

#include "gridloop/frame.hpp"

namespace gridloop::hub {

// Transport-agnostic client view of one hub connection. Writes are
// fire-and-forget; replies and subscription deliveries come back through
// callbacks in per-connection FIFO order.
//
// Reply routing relies on one discipline: a connection that polls with
// get() must not hold subscriptions whose deliveries could interleave with
// poll replies. Components therefore use a dedicated connection for polling.
class HubSession {
public:
    virtual ~HubSession() = default;

    virtual void publish(const std::string& topic, std::uint64_t seq, Micros ts_us,
                         Payload payload) = 0;
    virtual void set(const std::string& topic, std::uint64_t seq, Micros ts_us,
                     Payload payload) = 0;
    virtual void get(const std::string& topic,
                     std::function<void(std::optional<Frame>)> cb) = 0;
    virtual void subscribe(const std::string& pattern) = 0;
    virtual void unsubscribe(const std::string& pattern) = 0;
    // cb receives the round-trip time measured on the caller's clock, or
    // nullopt when no PONG arrived within timeout_us.
    virtual void ping(std::function<void(std::optional<Micros>)> cb,
                      Micros timeout_us = 5 * kMicrosPerSecond) = 0;

    std::function<void(const Frame&)> on_message; // subscription MSG frames
};

// Shared reply-routing state for session implementations.
struct ReplyRouter {
    struct PendingPing {
        std::uint64_t id;
        Micros sent_us;
        std::function<void(std::optional<Micros>)> cb;
    };
    std::deque<PendingPing> pings;
    std::deque<std::function<void(std::optional<Frame>)>> gets;
    std::uint64_t next_ping_id = 0;

    // Routes one inbound frame. now_us is the receiver's clock. Returns the
    // frame back if it is a subscription delivery for on_message.
    std::optional<Frame> route(const Frame& f, Micros now_us) {
        switch (f.cmd) {
        case Cmd::Pong:
            if (!pings.empty()) {
                auto p = std::move(pings.front());
                pings.pop_front();
                if (p.cb) p.cb(now_us - p.sent_us);
            }
            return std::nullopt;
        case Cmd::Msg:
            if (!gets.empty()) {
                auto cb = std::move(gets.front());
                gets.pop_front();
                if (cb) cb(f);
                return std::nullopt;
            }
            return f;
        case Cmd::Err:
            if (!gets.empty()) {
                auto cb = std::move(gets.front());
                gets.pop_front();
                if (cb) cb(std::nullopt);
                return std::nullopt;
            }
            return std::nullopt; // ack errors are not routed further
        case Cmd::Ok:
        default:
            return std::nullopt;
        }
    }
};

} // namespace gridloop::hub
