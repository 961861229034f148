#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

namespace gridloop::mas {

struct DisconnectedGraph : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NoConvergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Matrix = std::vector<std::vector<double>>;
using Adjacency = std::vector<std::vector<bool>>;

// Undirected edge list (0-based) to adjacency matrix; rejects self-loops
// and out-of-range endpoints.
Adjacency adjacency_from_edges(int n, const std::vector<std::pair<int, int>>& edges);

bool is_connected(const Adjacency& adj);
int graph_diameter(const Adjacency& adj);

// Metropolis weights: w_ij = 1/(1 + max(d_i, d_j)) on edges, w_ii takes the
// remainder. Symmetric and doubly stochastic for any connected graph.
// Throws DisconnectedGraph.
Matrix metropolis_weights(const Adjacency& adj);

// Second-largest eigenvalue modulus of a symmetric stochastic matrix
// (cyclic Jacobi). Governs the consensus contraction rate.
double lambda2(const Matrix& w);

// Neighborhood communication graph shared by all agents of one fleet.
struct AgentGraph {
    int n = 0;
    Adjacency adjacency;
    Matrix weights;

    static AgentGraph from_edges(int n, const std::vector<std::pair<int, int>>& edges);
    std::vector<int> neighbors(int i) const;
    int diameter() const { return graph_diameter(adjacency); }
};

// One synchronous averaging round: x' = W x.
std::vector<double> consensus_round(const std::vector<double>& x, const Matrix& w);

struct ConvergenceCriterion {
    double eps = 1e-6; // Hz
    int r = 3;         // consecutive quiet rounds per agent
    int max_iter = 500;

    void validate() const;
};

struct ConsensusOutcome {
    double x_bar = 0.0; // mean of the final iterate
    int iters = 0;      // rounds executed until every agent stayed quiet
    std::vector<double> x;
};

// Centralized reference run: iterates x' = Wx until every component's
// per-round change stayed below eps for r consecutive rounds. Throws
// NoConvergence past max_iter.
ConsensusOutcome run_consensus(std::vector<double> x0, const Matrix& w,
                               const ConvergenceCriterion& crit);

} // namespace gridloop::mas
