#pragma once

#include <map>
#include <string>
#include <vector>

#include "gridloop/profile.hpp"
#include "gridloop/session.hpp"

namespace gridloop::gateway {

struct UnknownDevice : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnknownNode : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class NodeKind { variable, method };
enum class Quality { good, stale };

// Leaf of the telemetry address tree. Variable nodes carry the latest
// emitted Measurement; method nodes are command entry points (breakers).
struct AddressNode {
    std::string path;
    NodeKind kind = NodeKind::variable;
    Measurement value;
    Quality quality = Quality::stale;
};

struct BreakerState {
    std::string device_id;
    bool closed = true;
    Micros last_change_ts = 0;
};

struct DeviceConfig {
    std::string device_id; // one path segment, e.g. "pv"
    Profile profile;       // already cropped to the playback window
    bool breaker_closed = true;
};

// Telemetry gateway: plays device profiles back onto the hub on a fixed
// period and services breaker commands arriving as published setpoints on
// <root>/<device>/breaker (value >= 0.5 means close).
class Gateway {
public:
    Gateway(std::vector<DeviceConfig> devices, Micros period_us,
            std::string root = "prismes");

    // Binds the hub session: subscribes to breaker command topics and
    // routes deliveries into handle_command. The session must outlive us.
    void attach(hub::HubSession& session);

    // Emits one Measurement per device for emission time now_us.
    // An open breaker publishes exactly 0.0 for its device.
    void emit_once(Micros now_us);

    // Number of emissions in [0, horizon) at the configured period.
    std::size_t emissions_within(Micros horizon_us) const;

    BreakerState handle_command(const std::string& device_id, bool close, Micros now_us);
    const AddressNode& resolve(const std::string& path) const;

    Micros period_us() const { return period_us_; }
    const BreakerState& breaker(const std::string& device_id) const;

private:
    struct Device {
        DeviceConfig cfg;
        BreakerState breaker;
        std::uint64_t next_seq = 1;
    };
    Device& device(const std::string& id);

    std::vector<Device> devices_; // fixed order = config order
    Micros period_us_;
    std::string root_;
    hub::HubSession* session_ = nullptr;
    std::map<std::string, AddressNode> nodes_;
};

} // namespace gridloop::gateway
