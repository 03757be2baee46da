#pragma once

#include <queue>
#include <vector>

#include "visyn/common.hpp"

namespace visyn {

// s-t flow network over `node_count` ordinary nodes plus the two terminals.
// Arcs are stored as residual pairs, so an arc may carry an independent
// reverse capacity. Instances are immutable once solved.
class FlowGraph {
public:
    static constexpr int kSource = -1;
    static constexpr int kSink = -2;

    explicit FlowGraph(int node_count) : head_(std::size_t(node_count) + 2, -1) {}

    int node_count() const { return int(head_.size()) - 2; }

    void add_arc(int from, int to, double cap, double rev_cap = 0.0) {
        if (cap < 0 || rev_cap < 0) throw Error("FlowGraph: negative capacity");
        bool from_term = from == kSource || from == kSink;
        bool to_term = to == kSource || to == kSink;
        if (from_term && to_term) throw Error("FlowGraph: arc touches both terminals");
        int u = index(from), v = index(to);
        push_arc(u, v, cap);
        push_arc(v, u, rev_cap);
    }

    // Dinic blocking flow. Returns the max-flow value; the min-cut side of
    // every node is available from source_side() afterwards.
    double solve() {
        int s = index(kSource), t = index(kSink);
        double flow = 0.0;
        while (build_levels(s, t)) {
            iter_ = head_;
            double pushed;
            while ((pushed = augment(s, t, kUnbounded)) > 0.0) flow += pushed;
        }
        // residual reachability from the source = source side of the min cut
        side_.assign(head_.size(), false);
        std::queue<int> q;
        q.push(s);
        side_[s] = true;
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            for (int a = head_[u]; a != -1; a = arcs_[a].next)
                if (arcs_[a].cap > kResidualEps && !side_[arcs_[a].to]) {
                    side_[arcs_[a].to] = true;
                    q.push(arcs_[a].to);
                }
        }
        solved_ = true;
        return flow;
    }

    bool source_side(int node) const {
        if (!solved_) throw Error("FlowGraph: solve() first");
        return side_[index(node)];
    }

private:
    static constexpr double kUnbounded = 1e300;
    static constexpr double kResidualEps = 1e-12;

    struct Arc {
        int to;
        int next;
        double cap;
    };

    int index(int node) const {
        if (node == kSource) return int(head_.size()) - 2;
        if (node == kSink) return int(head_.size()) - 1;
        if (node < 0 || node >= node_count()) throw Error("FlowGraph: node out of range");
        return node;
    }

    void push_arc(int u, int v, double cap) {
        arcs_.push_back({v, head_[u], cap});
        head_[u] = int(arcs_.size()) - 1;
    }

    bool build_levels(int s, int t) {
        level_.assign(head_.size(), -1);
        std::queue<int> q;
        q.push(s);
        level_[s] = 0;
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            for (int a = head_[u]; a != -1; a = arcs_[a].next)
                if (arcs_[a].cap > kResidualEps && level_[arcs_[a].to] < 0) {
                    level_[arcs_[a].to] = level_[u] + 1;
                    q.push(arcs_[a].to);
                }
        }
        return level_[t] >= 0;
    }

    double augment(int u, int t, double limit) {
        if (u == t) return limit;
        for (int& a = iter_[u]; a != -1; a = arcs_[a].next) {
            Arc& arc = arcs_[a];
            if (arc.cap > kResidualEps && level_[arc.to] == level_[u] + 1) {
                double pushed = augment(arc.to, t, std::min(limit, arc.cap));
                if (pushed > 0.0) {
                    arc.cap -= pushed;
                    arcs_[a ^ 1].cap += pushed;
                    return pushed;
                }
            }
        }
        level_[u] = -1;
        return 0.0;
    }

    std::vector<int> head_;
    std::vector<Arc> arcs_;
    std::vector<int> level_, iter_;
    std::vector<bool> side_;
    bool solved_ = false;
};

}  // namespace visyn
