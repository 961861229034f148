#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "gridloop/common.hpp"

namespace gridloop::netem {

// Derives an independent, reproducible stream seed from a master seed and a
// component name. Same (seed, name) pair always yields the same stream.
std::uint64_t derive_seed(std::uint64_t master, std::string_view name);

// Deterministic random stream. Uniform and Gaussian draws are computed from
// the raw mt19937_64 output directly so the byte stream does not depend on
// the standard library's distribution implementations.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    // Uniform in [0, 1).
    double uniform01();
    // Uniform in [lo, hi].
    double uniform(double lo, double hi);
    // Standard normal via Box-Muller (cosine branch only).
    double gaussian();

private:
    std::mt19937_64 engine_;
};

enum class LinkMode { stream, datagram };

// Latency distribution of an emulated link: a Gaussian body around base_ms
// clipped at zero, plus occasional uniform spikes in [spike_lo, spike_hi].
struct DelayModel {
    double base_ms = 32.0;
    double jitter_std_ms = 2.0;
    double spike_prob = 0.01;
    double spike_lo_ms = 70.0;
    double spike_hi_ms = 85.0;
    std::uint64_t seed = 0;
    LinkMode mode = LinkMode::stream;

    void validate() const; // throws std::invalid_argument on bad parameters

    bool operator==(const DelayModel&) const = default;
};

// One sampled per-message delay, always >= 0. Advances the stream.
double delay_sample(const DelayModel& model, RandomStream& rng);

struct LatencyStats {
    std::uint64_t count = 0;
    double mean_ms = 0.0;
    double max_ms = 0.0;
    std::array<std::uint64_t, 200> histogram_1ms{}; // [0,200) ms, overflow in last bin
    std::uint64_t reorder_count = 0;                // send-order/delivery-order inversions
};

struct LinkRecord {
    Micros send_ts_us = 0;
    Micros delivery_ts_us = 0;
};

// Accumulates per-message records for a named link; shared by all lanes of
// that link. Records append in delivery-computation order, which is
// deterministic under the virtual scheduler.
class LinkStats {
public:
    void record(int lane, Micros send_us, Micros delivery_us);
    LatencyStats stats() const;
    const std::vector<LinkRecord>& records() const { return records_; }
    std::string to_csv() const;
    void write_csv(const std::string& path) const;

    // Appends another sink's records, renumbering its lanes so per-lane
    // ordering analysis stays separate (used to combine per-process stats
    // of one named link in realtime runs).
    void merge(const LinkStats& other);

private:
    struct Tagged {
        int lane;
        Micros send_us;
        Micros delivery_us;
    };
    std::vector<LinkRecord> records_;
    std::vector<Tagged> tagged_;
};

// One direction of a link. Owns its delay stream and FIFO clock; reports
// into the shared per-link stats sink.
class Lane {
public:
    Lane(DelayModel model, std::uint64_t seed, LinkStats* sink, int lane_id);

    // Computes the delivery time for a message handed over at send_us.
    // stream mode: max(previous delivery, send + sample)  (ordered transport)
    // datagram mode: send + sample                        (may reorder)
    Micros deliver(Micros send_us);

    const DelayModel& model() const { return model_; }

private:
    DelayModel model_;
    RandomStream rng_;
    LinkStats* sink_;
    int lane_id_;
    Micros fifo_clock_us_;
};

// A named link with lanes created on demand (one per directed endpoint pair).
class Link {
public:
    Link(std::string name, DelayModel model, std::uint64_t master_seed);

    // Lane identity is by name, e.g. "gateway->hub". Stable across calls.
    Lane& lane(const std::string& lane_name);

    const std::string& name() const { return name_; }
    const DelayModel& model() const { return model_; }
    LinkStats& stats() { return stats_; }
    const LinkStats& stats() const { return stats_; }

private:
    std::string name_;
    DelayModel model_;
    std::uint64_t master_seed_;
    LinkStats stats_;
    std::vector<std::pair<std::string, std::unique_ptr<Lane>>> lanes_;
};

} // namespace gridloop::netem
