#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "gridloop/gateway.hpp"

using namespace gridloop;
using namespace gridloop::gateway;

namespace {

struct FakeSession : hub::HubSession {
    struct Pub {
        std::string topic;
        std::uint64_t seq;
        Micros ts;
        double value;
    };
    std::vector<Pub> pubs;
    std::vector<std::string> subs;

    void publish(const std::string& topic, std::uint64_t seq, Micros ts,
                 hub::Payload payload) override {
        pubs.push_back({topic, seq, ts, std::get<double>(payload)});
    }
    void set(const std::string&, std::uint64_t, Micros, hub::Payload) override {}
    void get(const std::string&, std::function<void(std::optional<hub::Frame>)>) override {}
    void subscribe(const std::string& pattern) override { subs.push_back(pattern); }
    void unsubscribe(const std::string&) override {}
    void ping(std::function<void(std::optional<Micros>)>, Micros) override {}

    void deliver(const std::string& topic, double v) {
        REQUIRE(on_message);
        on_message(hub::Frame::msg(topic, 1, 0, v));
    }
};

Profile flat(double w) {
    Profile p;
    p.samples = {{0, w}};
    return p;
}

Gateway make_gateway() {
    return Gateway({{"pv", flat(2000.0), true}, {"building", flat(1400.0), true}},
                   kMicrosPerSecond);
}

} // namespace

TEST_CASE("attach subscribes to the command pattern") {
    FakeSession s;
    Gateway gw = make_gateway();
    gw.attach(s);
    REQUIRE(s.subs.size() == 1);
    CHECK(s.subs[0] == "prismes/*/breaker");
}

TEST_CASE("emissions publish one sample per device with held values") {
    FakeSession s;
    Gateway gw = make_gateway();
    gw.attach(s);
    gw.emit_once(0);
    gw.emit_once(kMicrosPerSecond);
    REQUIRE(s.pubs.size() == 4);
    CHECK(s.pubs[0].topic == "prismes/pv/power");
    CHECK(s.pubs[0].value == 2000.0);
    CHECK(s.pubs[0].seq == 1);
    CHECK(s.pubs[1].topic == "prismes/building/power");
    CHECK(s.pubs[1].value == 1400.0);
    CHECK(s.pubs[2].seq == 2); // per-device sequence numbers
    CHECK(s.pubs[2].ts == kMicrosPerSecond);
}

TEST_CASE("an open breaker reports exactly zero power") {
    FakeSession s;
    Gateway gw = make_gateway();
    gw.attach(s);
    s.deliver("prismes/pv/breaker", 0.0);
    CHECK_FALSE(gw.breaker("pv").closed);
    CHECK(gw.breaker("building").closed);
    gw.emit_once(0);
    CHECK(s.pubs[0].value == 0.0);
    CHECK(s.pubs[1].value == 1400.0);

    // anything >= 0.5 closes again
    s.deliver("prismes/pv/breaker", 0.5);
    CHECK(gw.breaker("pv").closed);
    gw.emit_once(kMicrosPerSecond);
    CHECK(s.pubs[2].value == 2000.0);
}

TEST_CASE("commands for other roots or unknown devices are ignored") {
    FakeSession s;
    Gateway gw = make_gateway();
    gw.attach(s);
    s.deliver("other/pv/breaker", 0.0);
    s.deliver("prismes/nosuch/breaker", 0.0);
    s.deliver("prismes/pv/power", 0.0); // not a command topic
    CHECK(gw.breaker("pv").closed);
    CHECK(gw.breaker("building").closed);
}

TEST_CASE("handle_command is idempotent and timestamps transitions") {
    Gateway gw = make_gateway();
    BreakerState b = gw.handle_command("pv", false, 42);
    CHECK_FALSE(b.closed);
    CHECK(b.last_change_ts == 42);
    b = gw.handle_command("pv", false, 99); // no transition, ts unchanged
    CHECK(b.last_change_ts == 42);
    b = gw.handle_command("pv", true, 123);
    CHECK(b.closed);
    CHECK(b.last_change_ts == 123);
    CHECK_THROWS_AS(gw.handle_command("nosuch", true, 0), UnknownDevice);
}

TEST_CASE("emission count over a horizon") {
    Gateway gw = make_gateway();
    CHECK(gw.emissions_within(0) == 0);
    CHECK(gw.emissions_within(1) == 1);
    CHECK(gw.emissions_within(kMicrosPerSecond) == 1);
    CHECK(gw.emissions_within(kMicrosPerSecond + 1) == 2);
    CHECK(gw.emissions_within(10 * kMicrosPerSecond) == 10);
}

TEST_CASE("address tree exposes freshness") {
    Gateway gw = make_gateway();
    CHECK(gw.resolve("prismes/pv/power").quality == Quality::stale);
    CHECK(gw.resolve("prismes/pv/breaker").kind == NodeKind::method);
    gw.emit_once(7);
    const AddressNode& n = gw.resolve("prismes/pv/power");
    CHECK(n.quality == Quality::good);
    CHECK(n.value.value == 2000.0);
    CHECK(n.value.source_ts == 7);
    CHECK_THROWS_AS(gw.resolve("prismes/pv/nosuch"), UnknownNode);
}
