#include "gridloop/tcp.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>

namespace gridloop::hub {

namespace {

Micros since(std::chrono::steady_clock::time_point epoch) {
    return std::chrono::duration_cast<std::chrono::microseconds>(
               std::chrono::steady_clock::now() - epoch)
        .count();
}

sockaddr_in resolve(const std::string& host, int port) {
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(static_cast<std::uint16_t>(port));
    std::string h = host.empty() || host == "localhost" ? "127.0.0.1" : host;
    if (h == "0.0.0.0" || h == "*") {
        sa.sin_addr.s_addr = INADDR_ANY;
        return sa;
    }
    if (inet_pton(AF_INET, h.c_str(), &sa.sin_addr) == 1) return sa;
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (getaddrinfo(h.c_str(), nullptr, &hints, &res) != 0 || !res)
        throw SocketError("cannot resolve host: " + host);
    sa.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    freeaddrinfo(res);
    return sa;
}

// Splits a receive buffer into complete LF-terminated lines.
struct LineAssembler {
    std::string pending;
    template <typename Fn>
    void feed(const char* data, std::size_t n, Fn&& on_line) {
        pending.append(data, n);
        std::size_t start = 0;
        for (;;) {
            auto nl = pending.find('\n', start);
            if (nl == std::string::npos) break;
            on_line(pending.substr(start, nl - start + 1));
            start = nl + 1;
        }
        pending.erase(0, start);
    }
};

} // namespace

std::pair<std::string, int> split_host_port(const std::string& addr) {
    auto colon = addr.rfind(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("expected host:port, got '" + addr + "'");
    std::int64_t port;
    if (!parse_i64(std::string_view(addr).substr(colon + 1), port) || port < 0 ||
        port > 65535)
        throw std::invalid_argument("bad port in '" + addr + "'");
    return {addr.substr(0, colon), static_cast<int>(port)};
}

// --- server ---------------------------------------------------------------

TcpHubServer::TcpHubServer(const std::string& listen_addr)
    : epoch_(std::chrono::steady_clock::now()) {
    auto [host, port] = split_host_port(listen_addr);
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw SocketError("socket: " + std::string(strerror(errno)));
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in sa = resolve(host, port);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&sa), sizeof sa) < 0) {
        ::close(listen_fd_);
        throw SocketError("bind " + listen_addr + ": " + strerror(errno));
    }
    if (::listen(listen_fd_, 16) < 0) {
        ::close(listen_fd_);
        throw SocketError("listen: " + std::string(strerror(errno)));
    }
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);
}

TcpHubServer::~TcpHubServer() { stop(); }

Micros TcpHubServer::now_us() const { return since(epoch_); }

void TcpHubServer::start() {
    accept_thread_ = std::thread([this] { accept_loop(); });
}

void TcpHubServer::accept_loop() {
    for (;;) {
        int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (stopping_) return;
            continue;
        }
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        int conn;
        {
            std::lock_guard lock(mu_);
            if (stopping_) {
                ::close(fd);
                return;
            }
            conn = core_.add_connection("tcp:" + std::to_string(fd));
            fd_of_[conn] = fd;
            readers_.emplace_back([this, fd, conn] { serve(fd, conn); });
        }
    }
}

void TcpHubServer::write_to(int fd, const std::string& bytes) {
    std::size_t off = 0;
    while (off < bytes.size()) {
        auto n = ::send(fd, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
        if (n <= 0) return; // peer gone; its reader observes the close
        off += static_cast<std::size_t>(n);
    }
}

void TcpHubServer::serve(int fd, int conn) {
    LineAssembler lines;
    char buf[4096];
    for (;;) {
        auto n = ::recv(fd, buf, sizeof buf, 0);
        if (n <= 0) break;
        lines.feed(buf, static_cast<std::size_t>(n), [&](std::string line) {
            std::optional<Frame> f;
            try {
                f = parse_frame(line);
            } catch (const MalformedFrame&) {
            }
            std::lock_guard lock(mu_);
            if (!f) {
                write_to(fd, encode_frame(Frame::err("badcmd")));
                return;
            }
            auto out = core_.handle(conn, *f, now_us());
            if (out.reply) write_to(fd, encode_frame(*out.reply));
            for (const auto& [target, msg] : out.fanout) {
                auto it = fd_of_.find(target);
                if (it != fd_of_.end()) write_to(it->second, encode_frame(msg));
            }
        });
    }
    std::lock_guard lock(mu_);
    core_.remove_connection(conn);
    fd_of_.erase(conn);
    ::close(fd);
}

void TcpHubServer::stop() {
    if (stopping_.exchange(true)) return;
    if (listen_fd_ >= 0) {
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
    if (accept_thread_.joinable()) accept_thread_.join();
    {
        std::lock_guard lock(mu_);
        for (auto& [conn, fd] : fd_of_) ::shutdown(fd, SHUT_RDWR);
    }
    for (auto& t : readers_)
        if (t.joinable()) t.join();
}

// --- client ---------------------------------------------------------------

TcpHubClient::TcpHubClient(const std::string& hub_addr, const std::string& name,
                           const LinkSpec* link, Micros connect_timeout_us)
    : name_(name), epoch_(std::chrono::steady_clock::now()) {
    if (link) {
        link_ = std::make_unique<netem::Link>(link->link_name, link->model,
                                              link->master_seed);
        up_ = &link_->lane(name + "->hub");
        down_ = &link_->lane("hub->" + name);
    }

    auto [host, port] = split_host_port(hub_addr);
    sockaddr_in sa = resolve(host, port);
    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::microseconds(connect_timeout_us);
    for (;;) {
        fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd_ < 0) throw SocketError("socket: " + std::string(strerror(errno)));
        if (::connect(fd_, reinterpret_cast<sockaddr*>(&sa), sizeof sa) == 0) break;
        ::close(fd_);
        fd_ = -1;
        if (std::chrono::steady_clock::now() >= deadline)
            throw ConnectTimeout(name + ": no hub at " + hub_addr + " within " +
                                 format_double(static_cast<double>(connect_timeout_us) /
                                               1e6) +
                                 " s");
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);

    writer_ = std::thread([this] { writer_loop(); });
    reader_ = std::thread([this] { reader_loop(); });
}

TcpHubClient::~TcpHubClient() { close(); }

Micros TcpHubClient::mono_us() const { return since(epoch_); }

void TcpHubClient::close() {
    if (closed_.exchange(true)) return;
    out_cv_.notify_all();
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
    if (writer_.joinable()) writer_.join();
    if (reader_.joinable()) reader_.join();
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

void TcpHubClient::send_frame(const Frame& f) {
    Micros now = mono_us();
    Micros delivery = now;
    if (up_) {
        std::lock_guard lock(lane_mu_);
        delivery = up_->deliver(now);
    }
    {
        std::lock_guard lock(out_mu_);
        out_.push({delivery, out_seq_++, encode_frame(f), f});
    }
    out_cv_.notify_one();
}

void TcpHubClient::writer_loop() {
    std::unique_lock lock(out_mu_);
    while (!closed_) {
        if (out_.empty()) {
            out_cv_.wait(lock, [this] { return closed_ || !out_.empty(); });
            continue;
        }
        Micros due = out_.top().delivery_us;
        Micros now = mono_us();
        if (due > now) {
            out_cv_.wait_for(lock, std::chrono::microseconds(due - now));
            continue; // re-evaluate: an earlier frame may have arrived
        }
        std::string bytes = out_.top().bytes;
        out_.pop();
        lock.unlock();
        std::size_t off = 0;
        while (off < bytes.size() && !closed_) {
            auto n = ::send(fd_, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
            if (n <= 0) {
                closed_ = true;
                break;
            }
            off += static_cast<std::size_t>(n);
        }
        lock.lock();
    }
}

void TcpHubClient::reader_loop() {
    LineAssembler lines;
    char buf[4096];
    while (!closed_) {
        auto n = ::recv(fd_, buf, sizeof buf, 0);
        if (n <= 0) break;
        lines.feed(buf, static_cast<std::size_t>(n), [&](std::string line) {
            Frame f;
            try {
                f = parse_frame(line);
            } catch (const MalformedFrame&) {
                return; // a well-behaved hub never sends these
            }
            Micros now = mono_us();
            Micros delivery = now;
            if (down_) {
                std::lock_guard lane_lock(lane_mu_);
                delivery = down_->deliver(now);
            }
            std::lock_guard lock(in_mu_);
            in_.push({delivery, in_seq_++, {}, std::move(f)});
        });
    }
}

void TcpHubClient::pump() {
    Micros now = mono_us();
    for (;;) {
        Frame f;
        {
            std::lock_guard lock(in_mu_);
            if (in_.empty() || in_.top().delivery_us > now) break;
            f = in_.top().frame;
            in_.pop();
        }
        auto msg = router_.route(f, now);
        if (msg && on_message) on_message(*msg);
    }
    // expire overdue pings (a later PONG for an expired id routes to the
    // next pending entry, mirroring a dead-then-recovered link)
    while (!ping_deadlines_.empty() && ping_deadlines_.front().second <= now) {
        auto [id, deadline] = ping_deadlines_.front();
        ping_deadlines_.pop_front();
        for (auto it = router_.pings.begin(); it != router_.pings.end(); ++it) {
            if (it->id != id) continue;
            auto cb = std::move(it->cb);
            router_.pings.erase(it);
            if (cb) cb(std::nullopt);
            break;
        }
    }
}

bool TcpHubClient::pump_until(const std::function<bool()>& pred, Micros timeout_us) {
    Micros deadline = mono_us() + timeout_us;
    while (mono_us() < deadline) {
        pump();
        if (pred()) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
    pump();
    return pred();
}

void TcpHubClient::publish(const std::string& topic, std::uint64_t seq, Micros ts_us,
                           Payload payload) {
    send_frame(Frame::pub(topic, seq, ts_us, std::move(payload)));
}

void TcpHubClient::set(const std::string& topic, std::uint64_t seq, Micros ts_us,
                       Payload payload) {
    send_frame(Frame::set(topic, seq, ts_us, std::move(payload)));
}

void TcpHubClient::get(const std::string& topic,
                       std::function<void(std::optional<Frame>)> cb) {
    router_.gets.push_back(std::move(cb));
    send_frame(Frame::get(topic));
}

void TcpHubClient::subscribe(const std::string& pattern) {
    send_frame(Frame::sub(pattern));
}

void TcpHubClient::unsubscribe(const std::string& pattern) {
    send_frame(Frame::unsub(pattern));
}

void TcpHubClient::ping(std::function<void(std::optional<Micros>)> cb,
                        Micros timeout_us) {
    auto id = router_.next_ping_id++;
    router_.pings.push_back({id, mono_us(), std::move(cb)});
    ping_deadlines_.emplace_back(id, mono_us() + timeout_us);
    send_frame(Frame::ping());
}

} // namespace gridloop::hub
