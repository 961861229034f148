#include "gridloop/virtual_hub.hpp"

namespace gridloop::hub {

VirtualHub::Endpoint& VirtualHub::connect(const std::string& name, netem::Lane* up,
                                          netem::Lane* down) {
    int conn = core_.add_connection(name);
    endpoints_.push_back(std::make_unique<Endpoint>(*this, conn, up, down));
    return *endpoints_.back();
}

VirtualHub::Endpoint* VirtualHub::endpoint_of(int conn) {
    for (auto& ep : endpoints_)
        if (ep->conn_ == conn) return ep.get();
    return nullptr;
}

void VirtualHub::client_send(Endpoint& ep, Frame f) {
    Micros arrive = ep.up_ ? ep.up_->deliver(sched_.now()) : sched_.now();
    int conn = ep.conn_;
    sched_.at(arrive, orch::Prio::link, [this, conn, f = std::move(f)]() {
        auto out = core_.handle(conn, f, sched_.now());
        if (out.reply) {
            if (auto* src = endpoint_of(conn)) {
                Micros back = src->down_ ? src->down_->deliver(sched_.now()) : sched_.now();
                sched_.at(back, orch::Prio::link,
                          [src, r = std::move(*out.reply)]() { src->dispatch(r); });
            }
        }
        route_fanout(out.fanout);
    });
}

void VirtualHub::route_fanout(const std::vector<std::pair<int, Frame>>& fanout) {
    for (const auto& [conn, msg] : fanout) {
        auto* target = endpoint_of(conn);
        if (!target) continue;
        Micros at = target->down_ ? target->down_->deliver(sched_.now()) : sched_.now();
        sched_.at(at, orch::Prio::link, [target, m = msg]() { target->dispatch(m); });
    }
}

std::size_t VirtualHub::script_publish(const std::string& topic, StoredValue v) {
    std::vector<std::pair<int, Frame>> fanout;
    auto n = core_.publish(topic, std::move(v), fanout);
    route_fanout(fanout);
    return n;
}

void VirtualHub::Endpoint::ping(std::function<void(std::optional<Micros>)> cb,
                                Micros timeout_us) {
    auto id = router_.next_ping_id++;
    router_.pings.push_back({id, owner_.sched_.now(), std::move(cb)});
    owner_.sched_.after(timeout_us, orch::Prio::link, [this, id]() {
        // still pending after the deadline -> dead link
        for (auto it = router_.pings.begin(); it != router_.pings.end(); ++it) {
            if (it->id != id) continue;
            auto cb = std::move(it->cb);
            router_.pings.erase(it);
            if (cb) cb(std::nullopt);
            return;
        }
    });
    send(Frame::ping());
}

void VirtualHub::Endpoint::dispatch(const Frame& f) {
    auto msg = router_.route(f, owner_.sched_.now());
    if (msg && on_message) on_message(*msg);
}

} // namespace gridloop::hub
