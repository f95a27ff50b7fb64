#include "mwreg/maxflow.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <stdexcept>

namespace mwreg {

namespace {
constexpr double kResidualEps = 1e-12;
}

MaxFlow::MaxFlow(int nodes)
    : n_(nodes), source_(nodes), sink_(nodes + 1), adj_(static_cast<std::size_t>(nodes) + 2)
{
    if (nodes < 0)
        throw std::invalid_argument("negative node count");
}

void MaxFlow::add_arc(int from, int to, double cap, double rev_cap)
{
    auto& a = adj_[static_cast<std::size_t>(from)];
    auto& b = adj_[static_cast<std::size_t>(to)];
    a.push_back({to, static_cast<int>(b.size()), cap});
    b.push_back({from, static_cast<int>(a.size()) - 1, rev_cap});
}

void MaxFlow::add_terminal(int node, double source_cap, double sink_cap)
{
    if (source_cap < 0.0 || sink_cap < 0.0)
        throw std::invalid_argument("terminal capacities must be non-negative");
    // Flow through s->v->t is forced; only the difference matters for the cut.
    const double common = std::min(source_cap, sink_cap);
    forced_ += common;
    source_cap -= common;
    sink_cap -= common;
    if (source_cap > 0.0)
        add_arc(source_, node, source_cap, 0.0);
    if (sink_cap > 0.0)
        add_arc(node, sink_, sink_cap, 0.0);
}

void MaxFlow::add_edge(int from, int to, double cap, double rev_cap)
{
    if (cap < 0.0 || rev_cap < 0.0)
        throw std::invalid_argument("edge capacities must be non-negative");
    if (cap == 0.0 && rev_cap == 0.0)
        return;
    add_arc(from, to, cap, rev_cap);
}

bool MaxFlow::build_levels()
{
    level_.assign(adj_.size(), -1);
    std::deque<int> queue{source_};
    level_[static_cast<std::size_t>(source_)] = 0;
    while (!queue.empty()) {
        const int v = queue.front();
        queue.pop_front();
        for (const Arc& a : adj_[static_cast<std::size_t>(v)]) {
            if (a.cap > kResidualEps && level_[static_cast<std::size_t>(a.to)] < 0) {
                level_[static_cast<std::size_t>(a.to)] = level_[static_cast<std::size_t>(v)] + 1;
                queue.push_back(a.to);
            }
        }
    }
    return level_[static_cast<std::size_t>(sink_)] >= 0;
}

double MaxFlow::push(int v, double limit)
{
    if (v == sink_)
        return limit;
    auto& arcs = adj_[static_cast<std::size_t>(v)];
    for (std::size_t& k = next_[static_cast<std::size_t>(v)]; k < arcs.size(); ++k) {
        Arc& a = arcs[k];
        if (a.cap <= kResidualEps || level_[static_cast<std::size_t>(a.to)] != level_[static_cast<std::size_t>(v)] + 1)
            continue;
        const double pushed = push(a.to, std::min(limit, a.cap));
        if (pushed > 0.0) {
            a.cap -= pushed;
            adj_[static_cast<std::size_t>(a.to)][static_cast<std::size_t>(a.rev)].cap += pushed;
            return pushed;
        }
    }
    return 0.0;
}

double MaxFlow::solve()
{
    double flow = forced_;
    while (build_levels()) {
        next_.assign(adj_.size(), 0);
        for (;;) {
            const double f = push(source_, std::numeric_limits<double>::infinity());
            if (f <= 0.0)
                break;
            flow += f;
        }
    }
    reach_.assign(adj_.size(), 0);
    std::deque<int> queue{source_};
    reach_[static_cast<std::size_t>(source_)] = 1;
    while (!queue.empty()) {
        const int v = queue.front();
        queue.pop_front();
        for (const Arc& a : adj_[static_cast<std::size_t>(v)]) {
            if (a.cap > kResidualEps && !reach_[static_cast<std::size_t>(a.to)]) {
                reach_[static_cast<std::size_t>(a.to)] = 1;
                queue.push_back(a.to);
            }
        }
    }
    return flow;
}

} // namespace mwreg
