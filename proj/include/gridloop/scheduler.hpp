#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

#include "gridloop/common.hpp"

namespace gridloop::orch {

// Fixed tie-break order for events sharing a timestamp.
enum class Prio : int {
    link = 0,     // message deliveries
    gateway = 1,  // telemetry emissions
    sim = 2,      // integration steps
    agent = 3,    // control cycles
    script = 4,   // scenario-scripted actions
};

// Single-threaded discrete-event loop over virtual time. Events execute in
// (timestamp, priority, insertion order), giving bitwise-reproducible runs.
class Scheduler {
public:
    void at(Micros t_us, Prio prio, std::function<void()> fn) {
        queue_.push({t_us < now_ ? now_ : t_us, static_cast<int>(prio), next_id_++, std::move(fn)});
    }
    void after(Micros dt_us, Prio prio, std::function<void()> fn) {
        at(now_ + dt_us, prio, std::move(fn));
    }

    Micros now() const { return now_; }

    // Runs every event with timestamp < horizon.
    void run_until(Micros horizon_us) {
        while (!queue_.empty() && queue_.top().t_us < horizon_us) {
            Event ev = std::move(const_cast<Event&>(queue_.top()));
            queue_.pop();
            now_ = ev.t_us;
            ev.fn();
        }
        now_ = horizon_us;
    }

    // Runs until the queue drains (for open-ended protocol tests).
    void run_all() {
        while (!queue_.empty()) {
            Event ev = std::move(const_cast<Event&>(queue_.top()));
            queue_.pop();
            now_ = ev.t_us;
            ev.fn();
        }
    }

    bool empty() const { return queue_.empty(); }

private:
    struct Event {
        Micros t_us;
        int prio;
        std::uint64_t id;
        std::function<void()> fn;
    };
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            if (a.t_us != b.t_us) return a.t_us > b.t_us;
            if (a.prio != b.prio) return a.prio > b.prio;
            return a.id > b.id;
        }
    };
    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    Micros now_ = 0;
    std::uint64_t next_id_ = 0;
};

} // namespace gridloop::orch
