#pragma once

#include <cstddef>
#include <vector>

namespace mwreg {

/// s-t min cut by Dinic's blocking-flow augmentation on real capacities.
class MaxFlow {
public:
    explicit MaxFlow(int nodes);

    /// Capacities source->node and node->sink; both must be >= 0.
    void add_terminal(int node, double source_cap, double sink_cap);
    /// Directed capacity from->to plus reverse capacity to->from.
    void add_edge(int from, int to, double cap, double rev_cap = 0.0);

    /// Maximum flow value, equal to the minimum cut capacity.
    double solve();
    /// After solve(): true when the node is reachable from the source in the residual graph.
    bool in_source_set(int node) const { return reach_[static_cast<std::size_t>(node)]; }

private:
    struct Arc {
        int to;
        int rev;
        double cap;
    };

    bool build_levels();
    double push(int v, double limit);
    void add_arc(int from, int to, double cap, double rev_cap);

    int n_;
    double forced_ = 0.0;
    int source_;
    int sink_;
    std::vector<std::vector<Arc>> adj_;
    std::vector<int> level_;
    std::vector<std::size_t> next_;
    std::vector<char> reach_;
};

} // namespace mwreg
