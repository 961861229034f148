#include "gridloop/agent.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace gridloop::mas {

std::string encode_round_msg(const RoundMsg& m) {
    return std::to_string(m.cycle) + ":" + std::to_string(m.round) + ":" +
           format_double(m.x) + ":" + std::to_string(m.quiet);
}

std::optional<RoundMsg> decode_round_msg(int from, std::string_view payload) {
    RoundMsg m;
    m.from = from;
    std::array<std::string_view, 4> part;
    std::size_t start = 0;
    for (int i = 0; i < 4; ++i) {
        auto colon = payload.find(':', start);
        bool last = i == 3;
        if (last != (colon == std::string_view::npos)) return std::nullopt;
        part[i] = payload.substr(start, last ? std::string_view::npos : colon - start);
        start = colon + 1;
    }
    std::int64_t round, quiet;
    if (!parse_u64(part[0], m.cycle) || !parse_i64(part[1], round) ||
        !parse_double(part[2], m.x) || !parse_i64(part[3], quiet))
        return std::nullopt;
    if (round < 0 || quiet < 0) return std::nullopt;
    m.round = static_cast<int>(round);
    m.quiet = static_cast<int>(quiet);
    return m;
}

ConsensusAgent::ConsensusAgent(Config cfg) : cfg_(std::move(cfg)) {
    cfg_.crit.validate();
    for (int j : cfg_.neighbors) peers_[j];
}

void ConsensusAgent::begin_cycle(std::uint64_t cycle, double x0) {
    if (in_cycle())
        throw std::logic_error("agent " + std::to_string(cfg_.id) + ": cycle overlap");
    cycle_ = cycle;
    round_ = 0;
    x_ = x0;
    quiet_ = 0;
    declared_ = false;
    for (auto& [j, peer] : peers_) {
        peer.finalized = false;
        // anything older than this cycle can never be consumed
        std::erase_if(peer.buffer,
                      [&](const auto& kv) { return kv.first.first < cycle_; });
    }
    if (send)
        for (int j : cfg_.neighbors) send(j, {cfg_.id, cycle_, 0, x_, 0});
    try_advance();
}

void ConsensusAgent::receive(const RoundMsg& m) {
    if (peers_.find(m.from) == peers_.end()) {
        ++stale_; // not a neighbor: drop
        return;
    }
    if (m.cycle < cycle_ || (m.cycle == cycle_ && (declared_ || m.round < round_))) {
        ++stale_;
        return;
    }
    peers_[m.from].buffer[{m.cycle, m.round}] = m;
    if (m.cycle == cycle_ && !declared_) try_advance();
}

void ConsensusAgent::try_advance() {
    while (!declared_) {
        // need every neighbor's round_ message (or its frozen final value)
        double acc = cfg_.weight_row[static_cast<std::size_t>(cfg_.id)] * x_;
        int min_quiet = quiet_;
        bool complete = true;
        for (auto& [j, peer] : peers_) {
            auto it = peer.buffer.find({cycle_, round_});
            double xj;
            int qj;
            if (it != peer.buffer.end()) {
                xj = it->second.x;
                qj = it->second.quiet;
            } else if (peer.finalized) {
                xj = peer.last_x;
                qj = cfg_.declare_threshold;
            } else {
                complete = false;
                break;
            }
            acc += cfg_.weight_row[static_cast<std::size_t>(j)] * xj;
            min_quiet = std::min(min_quiet, qj);
        }
        if (!complete) return;

        for (auto& [j, peer] : peers_) {
            auto it = peer.buffer.find({cycle_, round_});
            if (it != peer.buffer.end()) {
                peer.last_x = it->second.x;
                if (it->second.quiet >= cfg_.declare_threshold) peer.finalized = true;
                peer.buffer.erase(it);
            }
        }

        double delta = std::abs(acc - x_);
        quiet_ = delta < cfg_.crit.eps ? 1 + min_quiet : 0;
        x_ = acc;
        ++round_;
        if (on_round) on_round(round_, x_);
        if (round_ > cfg_.crit.max_iter)
            throw NoConvergence("agent " + std::to_string(cfg_.id) +
                                ": no convergence within " +
                                std::to_string(cfg_.crit.max_iter) + " rounds");
        if (send)
            for (int j : cfg_.neighbors) send(j, {cfg_.id, cycle_, round_, x_, quiet_});
        if (quiet_ >= cfg_.declare_threshold) {
            declared_ = true;
            if (on_converged) on_converged(x_, round_);
        }
    }
}

AgentFleet::AgentFleet(Config cfg) : cfg_(std::move(cfg)) {
    cfg_.crit.validate();
    int n = cfg_.graph.n;
    int threshold = cfg_.crit.r + cfg_.graph.diameter();
    for (int i = 0; i < n; ++i) {
        ConsensusAgent::Config ac;
        ac.id = i;
        ac.neighbors = cfg_.graph.neighbors(i);
        ac.weight_row = cfg_.graph.weights[static_cast<std::size_t>(i)];
        ac.crit = cfg_.crit;
        ac.declare_threshold = threshold;
        agents_.emplace_back(std::move(ac));
    }
    sessions_.resize(static_cast<std::size_t>(n), nullptr);
    latest_f_.resize(static_cast<std::size_t>(n), 0.0);
    have_f_.resize(static_cast<std::size_t>(n), false);
    u_.resize(static_cast<std::size_t>(n), 0.0);
    u_seq_.resize(static_cast<std::size_t>(n), 0);
    x_final_.resize(static_cast<std::size_t>(n), 0.0);
    rounds_final_.resize(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i)
        agents_[static_cast<std::size_t>(i)].on_converged =
            [this, i](double x, int rounds) { on_converged(i, x, rounds); };
}

void AgentFleet::attach(int i, hub::HubSession& session) {
    sessions_[static_cast<std::size_t>(i)] = &session;
    session.subscribe("predis/grid/freq");
    if (cfg_.transport == Transport::hub)
        for (int j : cfg_.graph.neighbors(i))
            session.subscribe("agents/" + std::to_string(j + 1) + "/x");
    session.on_message = [this, i](const hub::Frame& f) {
        if (f.topic == "predis/grid/freq") {
            if (std::holds_alternative<double>(f.payload))
                note_frequency(i, std::get<double>(f.payload));
            return;
        }
        if (f.topic.starts_with("agents/") && f.topic.ends_with("/x") &&
            std::holds_alternative<std::string>(f.payload)) {
            std::string_view mid(f.topic);
            mid.remove_prefix(7);
            mid.remove_suffix(2);
            std::int64_t from;
            if (!parse_i64(mid, from) || from < 1) return;
            auto m = decode_round_msg(static_cast<int>(from - 1),
                                      std::get<std::string>(f.payload));
            if (m) agents_[static_cast<std::size_t>(i)].receive(*m);
        }
    };
}

void AgentFleet::start(orch::Scheduler& sched, Micros horizon_us, netem::Link* mesh_link) {
    sched_ = &sched;
    mesh_link_ = mesh_link;
    local_mode_ = false;
    last_pub_.assign(static_cast<std::size_t>(cfg_.graph.n), {0, -1});
    x_seq_.assign(static_cast<std::size_t>(cfg_.graph.n), 0);

    for (int i = 0; i < cfg_.graph.n; ++i) {
        auto& agent = agents_[static_cast<std::size_t>(i)];
        if (cfg_.transport == Transport::hub) {
            agent.send = [this, i](int /*to*/, const RoundMsg& m) {
                // one publish reaches every subscribed neighbor; collapse the
                // per-neighbor sends of a round into a single frame
                auto& last = last_pub_[static_cast<std::size_t>(i)];
                if (last == std::pair<std::uint64_t, int>{m.cycle, m.round}) return;
                last = {m.cycle, m.round};
                auto* s = sessions_[static_cast<std::size_t>(i)];
                if (s)
                    s->publish("agents/" + std::to_string(i + 1) + "/x",
                               ++x_seq_[static_cast<std::size_t>(i)], sched_->now(),
                               encode_round_msg(m));
            };
        } else {
            agent.send = [this, i](int to, const RoundMsg& m) {
                Micros delivery = sched_->now();
                if (mesh_link_)
                    delivery = mesh_link_
                                   ->lane("a" + std::to_string(i) + "-a" + std::to_string(to))
                                   .deliver(sched_->now());
                sched_->at(delivery, orch::Prio::link, [this, to, m] {
                    agents_[static_cast<std::size_t>(to)].receive(m);
                });
            };
        }
    }

    for (Micros t = cfg_.offset_us; t < horizon_us; t += cfg_.period_us)
        sched.at(t, orch::Prio::agent, [this, &sched] {
            now_hint_ = sched.now();
            begin_cycle(sched.now());
        });
}

void AgentFleet::wire_local_queue() {
    for (int i = 0; i < cfg_.graph.n; ++i)
        agents_[static_cast<std::size_t>(i)].send = [this](int to, const RoundMsg& m) {
            local_queue_.emplace_back(to, m);
        };
}

void AgentFleet::run_cycle_local(Micros now_us) {
    local_mode_ = true;
    now_hint_ = now_us;
    wire_local_queue();
    begin_cycle(now_us);
    while (!local_queue_.empty()) {
        auto [to, m] = local_queue_.front();
        local_queue_.erase(local_queue_.begin());
        agents_[static_cast<std::size_t>(to)].receive(m);
    }
}

bool AgentFleet::cycle_ready() const {
    return std::all_of(have_f_.begin(), have_f_.end(), [](bool b) { return b; });
}

void AgentFleet::note_frequency(int i, double f) {
    latest_f_[static_cast<std::size_t>(i)] = f;
    have_f_[static_cast<std::size_t>(i)] = true;
}

void AgentFleet::begin_cycle(Micros now_us) {
    if (!cycle_ready()) {
        ++skipped_;
        return;
    }
    for (const auto& a : agents_)
        if (a.in_cycle()) {
            ++skipped_; // previous cycle still running; do not overlap
            return;
        }
    ++cycle_counter_;
    declared_count_ = 0;
    cycle_start_us_ = now_us;
    for (int i = 0; i < cfg_.graph.n; ++i)
        agents_[static_cast<std::size_t>(i)].begin_cycle(
            cycle_counter_, cfg_.f_nom - latest_f_[static_cast<std::size_t>(i)]);
}

void AgentFleet::on_converged(int i, double x_final, int rounds) {
    x_final_[static_cast<std::size_t>(i)] = x_final;
    rounds_final_[static_cast<std::size_t>(i)] = rounds;

    double before = u_[static_cast<std::size_t>(i)];
    double after = before + cfg_.k_s * x_final;
    if (after != before) {
        u_[static_cast<std::size_t>(i)] = after;
        auto* s = sessions_[static_cast<std::size_t>(i)];
        if (s)
            s->publish("predis/ess/" + std::to_string(i + 1) + "/u",
                       ++u_seq_[static_cast<std::size_t>(i)],
                       sched_ && !local_mode_ ? sched_->now() : now_hint_, after);
    }

    if (++declared_count_ == cfg_.graph.n) {
        CycleLog entry;
        entry.cycle = cycle_counter_;
        entry.start_us = cycle_start_us_;
        entry.done_us = sched_ && !local_mode_ ? sched_->now() : now_hint_;
        entry.iters = *std::max_element(rounds_final_.begin(), rounds_final_.end());
        double sum = 0.0;
        for (double v : x_final_) sum += v;
        entry.x_bar = sum / static_cast<double>(cfg_.graph.n);
        log_.push_back(entry);
    }
}

std::uint64_t AgentFleet::stale_total() const {
    std::uint64_t total = 0;
    for (const auto& a : agents_) total += a.stale_count();
    return total;
}

} // namespace gridloop::mas
