#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridloop/consensus.hpp"
#include "gridloop/netem.hpp"
#include "gridloop/scheduler.hpp"
#include "gridloop/session.hpp"

namespace gridloop::mas {

// One agent-to-agent averaging message. quiet carries the sender's
// consecutive-quiet-round counter so convergence detection can flood along
// the same channel as the values.
struct RoundMsg {
    int from = 0;
    std::uint64_t cycle = 0;
    int round = 0;
    double x = 0.0;
    int quiet = 0;
};

// Wire payload "cycle:round:x:quiet" (sender identified by topic).
std::string encode_round_msg(const RoundMsg& m);
std::optional<RoundMsg> decode_round_msg(int from, std::string_view payload);

// Message-passing realization of one consensus participant. Maintains the
// synchronous-round protocol: waits for every neighbor's round-k value,
// averages, and re-emits. An agent declares once its quiet counter reaches
// r + graph diameter, which implies every agent has been quiet for at
// least r rounds; after declaring it stops sending and neighbors keep
// using its last value.
class ConsensusAgent {
public:
    struct Config {
        int id = 0;
        std::vector<int> neighbors;
        std::vector<double> weight_row; // full row i of W (self + neighbors)
        ConvergenceCriterion crit;
        int declare_threshold = 0; // crit.r + diameter
    };

    explicit ConsensusAgent(Config cfg);

    std::function<void(int to, const RoundMsg&)> send;
    std::function<void(double x_final, int rounds)> on_converged;
    std::function<void(int round, double x)> on_round; // after each advance

    void begin_cycle(std::uint64_t cycle, double x0);
    void receive(const RoundMsg& m);

    bool in_cycle() const { return cycle_ != 0 && !declared_; }
    bool declared() const { return declared_; }
    double x() const { return x_; }
    int round() const { return round_; }
    std::uint64_t stale_count() const { return stale_; }

private:
    void try_advance();

    Config cfg_;
    std::uint64_t cycle_ = 0; // 0 = no cycle yet
    int round_ = 0;
    double x_ = 0.0;
    int quiet_ = 0;
    bool declared_ = false;
    std::uint64_t stale_ = 0;
    // per neighbor: buffered messages by (cycle, round), the last value
    // seen, and whether the neighbor has finalized this cycle
    struct Peer {
        std::map<std::pair<std::uint64_t, int>, RoundMsg> buffer;
        double last_x = 0.0;
        bool finalized = false;
    };
    std::map<int, Peer> peers_;
};

// The agent layer of one run: n agents, their neighborhood graph, hub
// sessions for frequency input and setpoint output, and the transport
// moving round messages between agents.
class AgentFleet {
public:
    enum class Transport { mesh, hub };

    struct Config {
        AgentGraph graph;
        ConvergenceCriterion crit;
        double k_s = 1.0;
        double f_nom = 50.0;
        Micros period_us = 1'000'000;
        Micros offset_us = 50'000;
        Transport transport = Transport::mesh;
    };

    struct CycleLog {
        std::uint64_t cycle = 0;
        Micros start_us = 0;
        Micros done_us = 0;
        int iters = 0;     // max declared round over agents
        double x_bar = 0.0; // mean of the agents' converged values
    };

    explicit AgentFleet(Config cfg);

    // Session for agent i: subscribes to the frequency topic (and, with hub
    // transport, the neighbors' x topics); publishes predis/ess/<i+1>/u.
    void attach(int i, hub::HubSession& session);

    // Virtual mode: schedules control cycles at offset + k*period and, with
    // mesh transport, routes round messages through mesh_link's lanes.
    void start(orch::Scheduler& sched, Micros horizon_us, netem::Link* mesh_link);

    // Drives one complete cycle with an internal FIFO queue (realtime mode
    // and protocol tests). Requires cycle_ready().
    void run_cycle_local(Micros now_us);

    bool cycle_ready() const;
    void note_frequency(int i, double f);

    double u(int i) const { return u_.at(static_cast<std::size_t>(i)); }
    const std::vector<CycleLog>& log() const { return log_; }
    std::uint64_t stale_total() const;
    std::size_t skipped_cycles() const { return skipped_; }
    const AgentGraph& graph() const { return cfg_.graph; }

private:
    void begin_cycle(Micros now_us);
    void on_converged(int i, double x_final, int rounds);
    void wire_local_queue();

    Config cfg_;
    std::vector<ConsensusAgent> agents_;
    std::vector<hub::HubSession*> sessions_;
    std::vector<double> latest_f_;
    std::vector<bool> have_f_;
    std::vector<double> u_;
    std::vector<std::uint64_t> u_seq_;
    std::uint64_t cycle_counter_ = 0;
    int declared_count_ = 0;
    std::vector<double> x_final_;
    std::vector<int> rounds_final_;
    std::vector<CycleLog> log_;
    std::size_t skipped_ = 0;

    orch::Scheduler* sched_ = nullptr;
    netem::Link* mesh_link_ = nullptr;
    std::vector<std::pair<int, RoundMsg>> local_queue_;
    bool local_mode_ = false;
    Micros cycle_start_us_ = 0;
    Micros now_hint_ = 0;
    // hub transport: one publish serves all neighbors; dedup per agent
    std::vector<std::pair<std::uint64_t, int>> last_pub_;
    std::vector<std::uint64_t> x_seq_;
};

} // namespace gridloop::mas
