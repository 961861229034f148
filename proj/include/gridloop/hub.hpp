#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gridloop/frame.hpp"

namespace gridloop::hub {

// Last stored value of a key plus its wire metadata.
struct StoredValue {
    Payload payload = 0.0;
    std::uint64_t seq = 0;
    Micros ts_us = 0;
    std::string source_id;
};

// Topic-based publish/subscribe whiteboard with a per-key last-value store.
// All mutations go through handle()/the direct ops on one logical thread;
// callers serialize access (the servers do this for socket transports).
class HubCore {
public:
    int add_connection(std::string name);
    void remove_connection(int conn);

    struct Out {
        std::optional<Frame> reply;                 // response to the sender
        std::vector<std::pair<int, Frame>> fanout;  // MSG frames to subscribers
    };

    // Processes one inbound frame from a connection. now_us is the hub
    // clock, used only for PONG timestamps.
    Out handle(int conn, const Frame& f, Micros now_us);

    // Direct ops (embedding and tests). publish returns the matched
    // subscription count and appends MSG deliveries to fanout.
    void set(const std::string& topic, const StoredValue& v);
    std::optional<StoredValue> get(const std::string& topic) const;
    std::size_t publish(const std::string& topic, const StoredValue& v,
                        std::vector<std::pair<int, Frame>>& fanout);
    bool subscribe(int conn, const std::string& pattern);   // false if duplicate
    bool unsubscribe(int conn, const std::string& pattern); // false if absent

    std::size_t subscription_count() const { return subs_.size(); }

private:
    struct Sub {
        int conn;
        std::string pattern;
    };
    std::map<std::string, StoredValue> store_;
    std::vector<Sub> subs_; // registration order drives fanout order
    std::map<int, std::string> conns_;
    int next_conn_ = 1;
};

} // namespace gridloop::hub
