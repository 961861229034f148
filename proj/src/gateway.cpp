#include "gridloop/gateway.hpp"

namespace gridloop::gateway {

Gateway::Gateway(std::vector<DeviceConfig> devices, Micros period_us, std::string root)
    : period_us_(period_us), root_(std::move(root)) {
    if (period_us_ <= 0) throw std::invalid_argument("gateway: period must be positive");
    for (auto& cfg : devices) {
        Device d;
        d.breaker = {cfg.device_id, cfg.breaker_closed, 0};
        d.cfg = std::move(cfg);
        devices_.push_back(std::move(d));
    }
    for (const auto& d : devices_) {
        std::string var = root_ + "/" + d.cfg.device_id + "/power";
        std::string method = root_ + "/" + d.cfg.device_id + "/breaker";
        nodes_[var] = {var, NodeKind::variable, {}, Quality::stale};
        nodes_[method] = {method, NodeKind::method, {}, Quality::good};
    }
}

void Gateway::attach(hub::HubSession& session) {
    session_ = &session;
    session.subscribe(root_ + "/*/breaker");
    session.on_message = [this](const hub::Frame& f) {
        // topic is <root>/<device>/breaker; anything else is not ours
        auto a = f.topic.find('/');
        auto b = f.topic.rfind('/');
        if (a == std::string::npos || b <= a) return;
        if (f.topic.substr(0, a) != root_) return;
        if (f.topic.substr(b + 1) != "breaker") return;
        if (!std::holds_alternative<double>(f.payload)) return;
        std::string dev = f.topic.substr(a + 1, b - a - 1);
        try {
            handle_command(dev, std::get<double>(f.payload) >= 0.5, f.ts_us);
        } catch (const UnknownDevice&) {
            // commands for devices we do not host are not ours to answer
        }
    };
}

void Gateway::emit_once(Micros now_us) {
    for (auto& d : devices_) {
        double w = d.breaker.closed ? sample_hold(d.cfg.profile, now_us) : 0.0;
        std::string topic = root_ + "/" + d.cfg.device_id + "/power";
        if (session_) session_->publish(topic, d.next_seq, now_us, w);
        auto& node = nodes_.at(topic);
        node.value = {topic, w, now_us, d.next_seq, d.cfg.device_id};
        node.quality = Quality::good;
        ++d.next_seq;
    }
}

std::size_t Gateway::emissions_within(Micros horizon_us) const {
    if (horizon_us <= 0) return 0;
    return static_cast<std::size_t>((horizon_us + period_us_ - 1) / period_us_);
}

Gateway::Device& Gateway::device(const std::string& id) {
    for (auto& d : devices_)
        if (d.cfg.device_id == id) return d;
    throw UnknownDevice("gateway: unknown device " + id);
}

BreakerState Gateway::handle_command(const std::string& device_id, bool close,
                                     Micros now_us) {
    Device& d = device(device_id);
    if (d.breaker.closed != close) {
        d.breaker.closed = close;
        d.breaker.last_change_ts = now_us;
    }
    return d.breaker;
}

const BreakerState& Gateway::breaker(const std::string& device_id) const {
    for (const auto& d : devices_)
        if (d.cfg.device_id == device_id) return d.breaker;
    throw UnknownDevice("gateway: unknown device " + device_id);
}

const AddressNode& Gateway::resolve(const std::string& path) const {
    auto it = nodes_.find(path);
    if (it == nodes_.end()) throw UnknownNode("gateway: no node at " + path);
    return it->second;
}

} // namespace gridloop::gateway
