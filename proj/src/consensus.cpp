#include "gridloop/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>

namespace gridloop::mas {

Adjacency adjacency_from_edges(int n, const std::vector<std::pair<int, int>>& edges) {
    if (n <= 0) throw std::invalid_argument("graph: need at least one node");
    Adjacency adj(n, std::vector<bool>(n, false));
    for (auto [a, b] : edges) {
        if (a < 0 || b < 0 || a >= n || b >= n)
            throw std::invalid_argument("graph: edge endpoint out of range");
        if (a == b) throw std::invalid_argument("graph: self-loops not allowed");
        adj[a][b] = adj[b][a] = true;
    }
    return adj;
}

namespace {

// BFS hop distances from src; -1 marks unreachable.
std::vector<int> hops_from(const Adjacency& adj, int src) {
    std::vector<int> dist(adj.size(), -1);
    std::queue<int> q;
    dist[src] = 0;
    q.push(src);
    while (!q.empty()) {
        int v = q.front();
        q.pop();
        for (std::size_t w = 0; w < adj.size(); ++w)
            if (adj[v][w] && dist[w] < 0) {
                dist[w] = dist[v] + 1;
                q.push(static_cast<int>(w));
            }
    }
    return dist;
}

} // namespace

bool is_connected(const Adjacency& adj) {
    if (adj.empty()) return false;
    auto dist = hops_from(adj, 0);
    return std::none_of(dist.begin(), dist.end(), [](int d) { return d < 0; });
}

int graph_diameter(const Adjacency& adj) {
    int diam = 0;
    for (std::size_t i = 0; i < adj.size(); ++i) {
        auto dist = hops_from(adj, static_cast<int>(i));
        for (int d : dist) {
            if (d < 0) throw DisconnectedGraph("graph: not connected");
            diam = std::max(diam, d);
        }
    }
    return diam;
}

Matrix metropolis_weights(const Adjacency& adj) {
    if (!is_connected(adj)) throw DisconnectedGraph("graph: not connected");
    int n = static_cast<int>(adj.size());
    std::vector<int> deg(n, 0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (adj[i][j]) ++deg[i];

    Matrix w(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) {
        double off = 0.0;
        for (int j = 0; j < n; ++j) {
            if (!adj[i][j]) continue;
            w[i][j] = 1.0 / (1.0 + std::max(deg[i], deg[j]));
            off += w[i][j];
        }
        w[i][i] = 1.0 - off;
    }
    return w;
}

double lambda2(const Matrix& w) {
    // cyclic Jacobi on a copy; W is symmetric so this converges fast
    int n = static_cast<int>(w.size());
    Matrix a = w;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-30) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                double theta = 0.5 * std::atan2(2.0 * a[p][q], a[q][q] - a[p][p]);
                double c = std::cos(theta), s = std::sin(theta);
                for (int k = 0; k < n; ++k) {
                    double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (int i = 0; i < n; ++i) eig[i] = std::abs(a[i][i]);
    std::sort(eig.begin(), eig.end(), std::greater<>());
    return n > 1 ? eig[1] : 0.0;
}

AgentGraph AgentGraph::from_edges(int n, const std::vector<std::pair<int, int>>& edges) {
    AgentGraph g;
    g.n = n;
    g.adjacency = adjacency_from_edges(n, edges);
    g.weights = metropolis_weights(g.adjacency);
    return g;
}

std::vector<int> AgentGraph::neighbors(int i) const {
    std::vector<int> out;
    for (int j = 0; j < n; ++j)
        if (adjacency[i][j]) out.push_back(j);
    return out;
}

std::vector<double> consensus_round(const std::vector<double>& x, const Matrix& w) {
    if (x.size() != w.size()) throw std::invalid_argument("consensus: dimension mismatch");
    std::vector<double> out(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j)
            if (w[i][j] != 0.0) out[i] += w[i][j] * x[j]; // neighbor + self terms only
    return out;
}

void ConvergenceCriterion::validate() const {
    if (eps <= 0) throw std::invalid_argument("criterion: eps must be > 0");
    if (r < 1) throw std::invalid_argument("criterion: r must be >= 1");
    if (max_iter < r) throw std::invalid_argument("criterion: max_iter must be >= r");
}

ConsensusOutcome run_consensus(std::vector<double> x0, const Matrix& w,
                               const ConvergenceCriterion& crit) {
    crit.validate();
    if (x0.size() != w.size()) throw std::invalid_argument("consensus: dimension mismatch");
    std::vector<int> quiet(x0.size(), 0);
    std::vector<double> x = std::move(x0);
    for (int k = 1; k <= crit.max_iter; ++k) {
        std::vector<double> next = consensus_round(x, w);
        bool all_quiet = true;
        for (std::size_t i = 0; i < x.size(); ++i) {
            quiet[i] = std::abs(next[i] - x[i]) < crit.eps ? quiet[i] + 1 : 0;
            if (quiet[i] < crit.r) all_quiet = false;
        }
        x = std::move(next);
        if (all_quiet) {
            double sum = 0.0;
            for (double v : x) sum += v;
            return {sum / static_cast<double>(x.size()), k, std::move(x)};
        }
    }
    throw NoConvergence("consensus: no convergence within " +
                        std::to_string(crit.max_iter) + " rounds");
}

} // namespace gridloop::mas
