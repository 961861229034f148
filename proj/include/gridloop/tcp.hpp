#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <queue>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "gridloop/hub.hpp"
#include "gridloop/netem.hpp"
#include "gridloop/session.hpp"

namespace gridloop::hub {

struct ConnectTimeout : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SocketError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// "host:port" -> (host, port); throws std::invalid_argument.
std::pair<std::string, int> split_host_port(const std::string& addr);

// Stream-socket hub server. One reader thread per connection; all hub state
// mutations and socket writes are serialized under one mutex, which keeps
// per-connection MSG order equal to hub-side publish order.
class TcpHubServer {
public:
    explicit TcpHubServer(const std::string& listen_addr);
    ~TcpHubServer();

    TcpHubServer(const TcpHubServer&) = delete;
    TcpHubServer& operator=(const TcpHubServer&) = delete;

    void start();
    void stop();
    int port() const { return port_; }

private:
    void accept_loop();
    void serve(int fd, int conn);
    void write_to(int fd, const std::string& bytes);
    Micros now_us() const;

    int listen_fd_ = -1;
    int port_ = 0;
    std::atomic<bool> stopping_{false};
    std::thread accept_thread_;
    std::mutex mu_; // guards core_, fd_of_, and all socket writes
    HubCore core_;
    std::map<int, int> fd_of_; // conn id -> socket
    std::vector<std::thread> readers_;
    std::chrono::steady_clock::time_point epoch_;
};

// Hub client over a stream socket with client-side link emulation: every
// frame, in both directions, is held for a netem-sampled delay before it is
// written to the socket or handed to the callbacks. Outbound frames are
// written by a dedicated thread; inbound frames mature inside pump(), so all
// callbacks run on the thread that calls pump() (and the other session ops),
// keeping component state single-threaded.
class TcpHubClient : public HubSession {
public:
    struct LinkSpec {
        std::string link_name; // seeds lanes "<client>->hub" / "hub-><client>"
        netem::DelayModel model;
        std::uint64_t master_seed = 0;
    };

    // link == nullptr disables emulation (direct socket timing).
    TcpHubClient(const std::string& hub_addr, const std::string& name,
                 const LinkSpec* link = nullptr,
                 Micros connect_timeout_us = 5 * kMicrosPerSecond);
    ~TcpHubClient() override;

    TcpHubClient(const TcpHubClient&) = delete;
    TcpHubClient& operator=(const TcpHubClient&) = delete;

    void publish(const std::string& topic, std::uint64_t seq, Micros ts_us,
                 Payload payload) override;
    void set(const std::string& topic, std::uint64_t seq, Micros ts_us,
             Payload payload) override;
    void get(const std::string& topic,
             std::function<void(std::optional<Frame>)> cb) override;
    void subscribe(const std::string& pattern) override;
    void unsubscribe(const std::string& pattern) override;
    void ping(std::function<void(std::optional<Micros>)> cb,
              Micros timeout_us = 5 * kMicrosPerSecond) override;

    // Dispatches every matured inbound frame and expires overdue pings.
    void pump();

    // pump() until pred() or the deadline; convenience for blocking waits.
    bool pump_until(const std::function<bool()>& pred, Micros timeout_us);

    void close();
    bool alive() const { return !closed_; }
    const netem::LinkStats* link_stats() const {
        return link_ ? &link_->stats() : nullptr;
    }

    Micros mono_us() const;

private:
    void send_frame(const Frame& f);
    void writer_loop();
    void reader_loop();

    int fd_ = -1;
    std::string name_;
    std::atomic<bool> closed_{false};
    std::chrono::steady_clock::time_point epoch_;

    std::unique_ptr<netem::Link> link_;
    netem::Lane* up_ = nullptr;
    netem::Lane* down_ = nullptr;
    std::mutex lane_mu_; // both lanes report into one LinkStats

    struct Timed {
        Micros delivery_us;
        std::uint64_t seq;
        std::string bytes;
        Frame frame;
        bool operator>(const Timed& o) const {
            return std::tie(delivery_us, seq) > std::tie(o.delivery_us, o.seq);
        }
    };
    using TimedHeap = std::priority_queue<Timed, std::vector<Timed>, std::greater<>>;

    std::mutex out_mu_;
    std::condition_variable out_cv_;
    TimedHeap out_;
    std::uint64_t out_seq_ = 0;
    std::thread writer_;

    std::mutex in_mu_;
    TimedHeap in_;
    std::uint64_t in_seq_ = 0;
    std::thread reader_;

    ReplyRouter router_;
    std::deque<std::pair<std::uint64_t, Micros>> ping_deadlines_; // (id, deadline)
};

} // namespace gridloop::hub
