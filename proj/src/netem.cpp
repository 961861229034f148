#include "gridloop/netem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace gridloop::netem {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Counts pairs delivered in the opposite order to their send order.
std::uint64_t count_inversions(std::vector<Micros>& v) {
    // merge-sort inversion count; ties are not inversions
    std::uint64_t inv = 0;
    std::vector<Micros> tmp(v.size());
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t lo, std::size_t hi) {
        if (hi - lo < 2) return;
        std::size_t mid = lo + (hi - lo) / 2;
        rec(lo, mid);
        rec(mid, hi);
        std::size_t i = lo, j = mid, k = lo;
        while (i < mid && j < hi) {
            if (v[j] < v[i]) {
                inv += mid - i;
                tmp[k++] = v[j++];
            } else {
                tmp[k++] = v[i++];
            }
        }
        while (i < mid) tmp[k++] = v[i++];
        while (j < hi) tmp[k++] = v[j++];
        std::copy(tmp.begin() + lo, tmp.begin() + hi, v.begin() + lo);
    };
    rec(0, v.size());
    return inv;
}

} // namespace

std::uint64_t derive_seed(std::uint64_t master, std::string_view name) {
    std::uint64_t state = master ^ fnv1a64(name);
    splitmix64(state);
    return splitmix64(state);
}

double RandomStream::uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform(double lo, double hi) {
    return lo + uniform01() * (hi - lo);
}

double RandomStream::gaussian() {
    // u1 in (0, 1] so the log is finite
    double u1 = static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void DelayModel::validate() const {
    if (base_ms < 0) throw std::invalid_argument("DelayModel: base_ms < 0");
    if (jitter_std_ms < 0) throw std::invalid_argument("DelayModel: jitter_std_ms < 0");
    if (spike_prob < 0 || spike_prob > 1) throw std::invalid_argument("DelayModel: spike_prob outside [0,1]");
    if (spike_lo_ms > spike_hi_ms) throw std::invalid_argument("DelayModel: spike_lo_ms > spike_hi_ms");
    if (spike_lo_ms < 0) throw std::invalid_argument("DelayModel: spike_lo_ms < 0");
}

double delay_sample(const DelayModel& model, RandomStream& rng) {
    double gate = rng.uniform01();
    if (gate < model.spike_prob) return rng.uniform(model.spike_lo_ms, model.spike_hi_ms);
    double d = model.base_ms + model.jitter_std_ms * rng.gaussian();
    return std::max(0.0, d);
}

void LinkStats::record(int lane, Micros send_us, Micros delivery_us) {
    records_.push_back({send_us, delivery_us});
    tagged_.push_back({lane, send_us, delivery_us});
}

LatencyStats LinkStats::stats() const {
    LatencyStats out;
    out.count = records_.size();
    if (records_.empty()) return out;
    double sum = 0.0;
    for (const auto& r : records_) {
        double ms = micros_to_ms(r.delivery_ts_us - r.send_ts_us);
        sum += ms;
        out.max_ms = std::max(out.max_ms, ms);
        auto bin = static_cast<std::size_t>(std::max(0.0, std::floor(ms)));
        out.histogram_1ms[std::min<std::size_t>(bin, out.histogram_1ms.size() - 1)]++;
    }
    out.mean_ms = sum / static_cast<double>(out.count);

    // inversions are meaningful per lane; sum over lanes
    int max_lane = 0;
    for (const auto& t : tagged_) max_lane = std::max(max_lane, t.lane);
    for (int lane = 0; lane <= max_lane; ++lane) {
        std::vector<Micros> deliveries;
        for (const auto& t : tagged_)
            if (t.lane == lane) deliveries.push_back(t.delivery_us);
        if (deliveries.size() > 1) out.reorder_count += count_inversions(deliveries);
    }
    return out;
}

void LinkStats::merge(const LinkStats& other) {
    int base = 0;
    for (const auto& t : tagged_) base = std::max(base, t.lane + 1);
    records_.insert(records_.end(), other.records_.begin(), other.records_.end());
    for (const auto& t : other.tagged_)
        tagged_.push_back({t.lane + base, t.send_us, t.delivery_us});
}

std::string LinkStats::to_csv() const {
    std::string out = "send_ts_us,delivery_ts_us,delay_ms\n";
    for (const auto& r : records_) {
        out += std::to_string(r.send_ts_us) + ',' + std::to_string(r.delivery_ts_us) +
               ',' + format_double(micros_to_ms(r.delivery_ts_us - r.send_ts_us)) + '\n';
    }
    return out;
}

void LinkStats::write_csv(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << to_csv();
}

Lane::Lane(DelayModel model, std::uint64_t seed, LinkStats* sink, int lane_id)
    : model_(model), rng_(seed), sink_(sink), lane_id_(lane_id),
      fifo_clock_us_(std::numeric_limits<Micros>::min()) {}

Micros Lane::deliver(Micros send_us) {
    double ms = delay_sample(model_, rng_);
    Micros delivery = send_us + static_cast<Micros>(std::llround(ms * 1000.0));
    if (model_.mode == LinkMode::stream) {
        delivery = std::max(delivery, fifo_clock_us_);
        fifo_clock_us_ = delivery;
    }
    if (sink_) sink_->record(lane_id_, send_us, delivery);
    return delivery;
}

Link::Link(std::string name, DelayModel model, std::uint64_t master_seed)
    : name_(std::move(name)), model_(model), master_seed_(master_seed) {
    model_.validate();
}

Lane& Link::lane(const std::string& lane_name) {
    for (auto& [n, l] : lanes_)
        if (n == lane_name) return *l;
    auto seed = derive_seed(master_seed_, "link/" + name_ + "/" + lane_name);
    lanes_.emplace_back(lane_name,
                        std::make_unique<Lane>(model_, seed, &stats_, static_cast<int>(lanes_.size())));
    return *lanes_.back().second;
}

} // namespace gridloop::netem
