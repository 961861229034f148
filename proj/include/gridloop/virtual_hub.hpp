#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gridloop/hub.hpp"
#include "gridloop/netem.hpp"
#include "gridloop/scheduler.hpp"
#include "gridloop/session.hpp"

namespace gridloop::hub {

// In-process hub transport for virtual-time runs. Every frame in either
// direction crosses a netem lane; hub-side processing happens at the lane's
// delivery time, so the event queue serializes all hub state mutations.
class VirtualHub {
public:
    VirtualHub(orch::Scheduler& sched, HubCore& core) : sched_(sched), core_(core) {}

    class Endpoint : public HubSession {
    public:
        Endpoint(VirtualHub& owner, int conn, netem::Lane* up, netem::Lane* down)
            : owner_(owner), conn_(conn), up_(up), down_(down) {}

        void publish(const std::string& topic, std::uint64_t seq, Micros ts_us,
                     Payload payload) override {
            send(Frame::pub(topic, seq, ts_us, std::move(payload)));
        }
        void set(const std::string& topic, std::uint64_t seq, Micros ts_us,
                 Payload payload) override {
            send(Frame::set(topic, seq, ts_us, std::move(payload)));
        }
        void get(const std::string& topic,
                 std::function<void(std::optional<Frame>)> cb) override {
            router_.gets.push_back(std::move(cb));
            send(Frame::get(topic));
        }
        void subscribe(const std::string& pattern) override { send(Frame::sub(pattern)); }
        void unsubscribe(const std::string& pattern) override { send(Frame::unsub(pattern)); }

        void ping(std::function<void(std::optional<Micros>)> cb,
                  Micros timeout_us = 5 * kMicrosPerSecond) override;

        void send(Frame f) { owner_.client_send(*this, std::move(f)); }

    private:
        friend class VirtualHub;
        void dispatch(const Frame& f);

        VirtualHub& owner_;
        int conn_;
        netem::Lane* up_;
        netem::Lane* down_;
        ReplyRouter router_;
    };

    // up/down are the component->hub and hub->component lanes.
    Endpoint& connect(const std::string& name, netem::Lane* up, netem::Lane* down);

    // Orchestrator-side publish, bypassing any lane (the experiment script
    // acts at the hub itself). Fanout still crosses subscriber lanes.
    std::size_t script_publish(const std::string& topic, StoredValue v);

    HubCore& core() { return core_; }

private:
    void client_send(Endpoint& ep, Frame f);
    void route_fanout(const std::vector<std::pair<int, Frame>>& fanout);
    Endpoint* endpoint_of(int conn);

    orch::Scheduler& sched_;
    HubCore& core_;
    std::vector<std::unique_ptr<Endpoint>> endpoints_;
};

} // namespace gridloop::hub
