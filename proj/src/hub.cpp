#include "gridloop/hub.hpp"

#include <algorithm>

namespace gridloop::hub {

int HubCore::add_connection(std::string name) {
    int id = next_conn_++;
    conns_.emplace(id, std::move(name));
    return id;
}

void HubCore::remove_connection(int conn) {
    conns_.erase(conn);
    std::erase_if(subs_, [conn](const Sub& s) { return s.conn == conn; });
}

void HubCore::set(const std::string& topic, const StoredValue& v) { store_[topic] = v; }

std::optional<StoredValue> HubCore::get(const std::string& topic) const {
    auto it = store_.find(topic);
    if (it == store_.end()) return std::nullopt;
    return it->second;
}

std::size_t HubCore::publish(const std::string& topic, const StoredValue& v,
                             std::vector<std::pair<int, Frame>>& fanout) {
    store_[topic] = v;
    std::size_t matched = 0;
    for (const auto& s : subs_) {
        if (!topic_matches(s.pattern, topic)) continue;
        ++matched;
        fanout.emplace_back(s.conn, Frame::msg(topic, v.seq, v.ts_us, v.payload));
    }
    return matched;
}

bool HubCore::subscribe(int conn, const std::string& pattern) {
    for (const auto& s : subs_)
        if (s.conn == conn && s.pattern == pattern) return false;
    subs_.push_back({conn, pattern});
    return true;
}

bool HubCore::unsubscribe(int conn, const std::string& pattern) {
    auto it = std::find_if(subs_.begin(), subs_.end(), [&](const Sub& s) {
        return s.conn == conn && s.pattern == pattern;
    });
    if (it == subs_.end()) return false;
    subs_.erase(it);
    return true;
}

HubCore::Out HubCore::handle(int conn, const Frame& f, Micros now_us) {
    Out out;
    const std::string& source = conns_.count(conn) ? conns_.at(conn) : std::string{};
    switch (f.cmd) {
    case Cmd::Set:
        set(f.topic, {f.payload, f.seq, f.ts_us, source});
        out.reply = Frame::ok();
        break;
    case Cmd::Get: {
        auto v = get(f.topic);
        if (v)
            out.reply = Frame::msg(f.topic, v->seq, v->ts_us, v->payload);
        else
            out.reply = Frame::err("nokey");
        break;
    }
    case Cmd::Pub: {
        auto n = publish(f.topic, {f.payload, f.seq, f.ts_us, source}, out.fanout);
        out.reply = Frame::ok_count(n);
        break;
    }
    case Cmd::Sub:
        subscribe(conn, f.topic);
        out.reply = Frame::ok();
        break;
    case Cmd::Unsub:
        unsubscribe(conn, f.topic);
        out.reply = Frame::ok();
        break;
    case Cmd::Ping:
        out.reply = Frame::pong(now_us);
        break;
    default:
        // server-to-client commands are protocol violations when received
        out.reply = Frame::err("badcmd");
        break;
    }
    return out;
}

} // namespace gridloop::hub
