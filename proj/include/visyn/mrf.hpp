#pragma once

#include <algorithm>
#include <vector>

#include "visyn/common.hpp"
#include "visyn/maxflow.hpp"

namespace visyn {

// Symmetric pairwise cost over label pairs: Potts or an explicit table.
struct PairwiseCost {
    enum Kind { kPotts, kTable };
    Kind kind = kPotts;
    double weight = 1.0;
    int labels = 0;
    std::vector<double> table;  // labels x labels, row-major

    static PairwiseCost potts(double w) {
        PairwiseCost c;
        c.kind = kPotts;
        c.weight = w;
        return c;
    }
    static PairwiseCost from_table(int labels, std::vector<double> costs, double w = 1.0) {
        PairwiseCost c;
        c.kind = kTable;
        c.labels = labels;
        c.table = std::move(costs);
        c.weight = w;
        return c;
    }

    double operator()(int a, int b) const {
        double v = kind == kPotts ? (a == b ? 0.0 : 1.0) : table[std::size_t(a) * labels + b];
        if (is_inf_cost(v) || is_inf_cost(weight)) return kInfCost;
        return weight * v;
    }
};

struct MrfEdge {
    int i, j;
    PairwiseCost cost;
};

// Multi-label assignment problem. `admissible` may be empty (all labels
// allowed) or hold one mask per node; masked-off labels act as INF unaries.
struct MultiLabelProblem {
    int nodes = 0;
    int labels = 0;
    std::vector<double> unary;  // nodes x labels
    std::vector<MrfEdge> edges;
    std::vector<std::vector<bool>> admissible;

    double unary_at(int node, int label) const {
        double u = unary[std::size_t(node) * labels + label];
        if (!admissible.empty() && !admissible[node][label]) return kInfCost;
        return u;
    }

    // Saturating total: INF if any term is INF, exact sum otherwise.
    double energy(const std::vector<int>& labeling) const {
        double e = 0.0;
        for (int n = 0; n < nodes; ++n) e = sat_add(e, unary_at(n, labeling[n]));
        for (const auto& edge : edges) e = sat_add(e, edge.cost(labeling[edge.i], labeling[edge.j]));
        return e;
    }

    // Same energy with INF terms clamped to kBigCost: strictly ordered, used
    // for move acceptance.
    double energy_clamped(const std::vector<int>& labeling) const {
        double e = 0.0;
        for (int n = 0; n < nodes; ++n) e += clamp_cost(unary_at(n, labeling[n]));
        for (const auto& edge : edges) e += clamp_cost(edge.cost(labeling[edge.i], labeling[edge.j]));
        return e;
    }
};

struct ExpansionResult {
    std::vector<int> labeling;
    double energy = 0.0;
    int sweeps = 0;
};

// Iterated alpha-expansion. Labels are visited in ascending order; a sweep
// with no accepted move terminates early. Non-submodular binary terms (INF
// entries, non-metric tables) are truncated in the cut graph and the move is
// only accepted if the true energy strictly decreases, so the energy sequence
// is non-increasing regardless of metricity.
inline ExpansionResult alpha_expand(const MultiLabelProblem& problem, std::vector<int> labeling,
                                    int max_sweeps = 10) {
    if (!problem.admissible.empty())
        for (int n = 0; n < problem.nodes; ++n) {
            bool any = false;
            for (int l = 0; l < problem.labels && !any; ++l) any = problem.admissible[n][l];
            if (!any)
                throw InfeasibleError("alpha_expand: node " + std::to_string(n) +
                                      " has an empty admissible set");
        }
    if (int(labeling.size()) != problem.nodes) throw Error("alpha_expand: bad initial labeling");

    double current = problem.energy_clamped(labeling);
    int sweeps = 0;
    for (; sweeps < max_sweeps; ++sweeps) {
        bool improved = false;
        for (int alpha = 0; alpha < problem.labels; ++alpha) {
            FlowGraph graph(problem.nodes);
            std::vector<double> f0(problem.nodes), f1(problem.nodes);
            for (int n = 0; n < problem.nodes; ++n) {
                f0[n] = clamp_cost(problem.unary_at(n, labeling[n]));
                f1[n] = clamp_cost(problem.unary_at(n, alpha));
            }
            for (const auto& edge : problem.edges) {
                int ci = labeling[edge.i], cj = labeling[edge.j];
                double a = clamp_cost(edge.cost(ci, cj));
                double b = clamp_cost(edge.cost(ci, alpha));
                double c = clamp_cost(edge.cost(alpha, cj));
                double d = clamp_cost(edge.cost(alpha, alpha));
                if (a > b + c - d) a = b + c - d;  // truncation
                f1[edge.i] += c - a;
                f1[edge.j] += d - c;
                double cap = b + c - a - d;
                if (cap > 0) graph.add_arc(edge.i, edge.j, cap);
            }
            for (int n = 0; n < problem.nodes; ++n) {
                double m = std::min(f0[n], f1[n]);
                if (f0[n] - m > 0) graph.add_arc(n, FlowGraph::kSink, f0[n] - m);
                if (f1[n] - m > 0) graph.add_arc(FlowGraph::kSource, n, f1[n] - m);
            }
            graph.solve();
            std::vector<int> proposal(labeling);
            for (int n = 0; n < problem.nodes; ++n)
                if (!graph.source_side(n)) proposal[n] = alpha;
            double proposed = problem.energy_clamped(proposal);
            if (proposed < current - 1e-12) {
                labeling.swap(proposal);
                current = proposed;
                improved = true;
            }
        }
        if (!improved) break;
    }
    double final_energy = problem.energy(labeling);
    return {std::move(labeling), final_energy, sweeps};
}

// --- chain problems ----------------------------------------------------------

// Sequence labeling with per-position candidate lists. pairwise[i] is the
// cost table between position i's and position i+1's candidates, row-major.
struct ChainProblem {
    std::vector<std::vector<double>> unary;
    std::vector<std::vector<double>> pairwise;

    int length() const { return int(unary.size()); }

    void validate() const {
        if (unary.empty()) throw Error("ChainProblem: empty chain");
        for (const auto& u : unary)
            if (u.empty()) throw Error("ChainProblem: position without candidates");
        if (pairwise.size() + 1 != unary.size()) throw Error("ChainProblem: pairwise count mismatch");
        for (std::size_t i = 0; i + 1 < unary.size(); ++i)
            if (pairwise[i].size() != unary[i].size() * unary[i + 1].size())
                throw Error("ChainProblem: pairwise table size mismatch");
    }

    double pair_cost(int pos, int a, int b) const {
        return pairwise[pos][std::size_t(a) * unary[pos + 1].size() + b];
    }

    double energy(const std::vector<int>& pick) const {
        double e = 0.0;
        for (int i = 0; i < length(); ++i) e = sat_add(e, unary[i][pick[i]]);
        for (int i = 0; i + 1 < length(); ++i) e = sat_add(e, pair_cost(i, pick[i], pick[i + 1]));
        return e;
    }
};

struct ChainResult {
    std::vector<int> pick;
    double energy = 0.0;
};

// Exact DP over the chain. Ties resolve to the lowest candidate index.
inline ChainResult chain_solve(const ChainProblem& problem) {
    problem.validate();
    int n = problem.length();
    std::vector<std::vector<double>> best(n);
    std::vector<std::vector<int>> back(n);
    best[0] = problem.unary[0];
    for (int i = 1; i < n; ++i) {
        int cur = int(problem.unary[i].size());
        int prev = int(problem.unary[i - 1].size());
        best[i].assign(cur, kInfCost);
        back[i].assign(cur, 0);
        for (int c = 0; c < cur; ++c) {
            double acc = kInfCost;
            int arg = 0;
            for (int p = 0; p < prev; ++p) {
                double v = sat_add(best[i - 1][p], problem.pair_cost(i - 1, p, c));
                if (v < acc) {
                    acc = v;
                    arg = p;
                }
            }
            best[i][c] = sat_add(acc, problem.unary[i][c]);
            back[i][c] = arg;
        }
    }
    double opt = kInfCost;
    int arg = 0;
    for (int c = 0; c < int(best[n - 1].size()); ++c)
        if (best[n - 1][c] < opt) {
            opt = best[n - 1][c];
            arg = c;
        }
    if (is_inf_cost(opt)) throw InfeasibleError("chain_solve: every assignment is forbidden");
    std::vector<int> pick(n);
    pick[n - 1] = arg;
    for (int i = n - 1; i > 0; --i) pick[i - 1] = back[i][pick[i]];
    return {std::move(pick), opt};
}

// Encodes a chain as a multi-label problem over the union label set, with INF
// unaries outside each position's candidate range. Used to cross-check the
// exact solver against alpha-expansion.
inline MultiLabelProblem chain_as_mrf(const ChainProblem& problem) {
    problem.validate();
    int labels = 0;
    for (const auto& u : problem.unary) labels = std::max(labels, int(u.size()));
    MultiLabelProblem mrf;
    mrf.nodes = problem.length();
    mrf.labels = labels;
    mrf.unary.assign(std::size_t(mrf.nodes) * labels, kInfCost);
    for (int i = 0; i < mrf.nodes; ++i)
        for (int c = 0; c < int(problem.unary[i].size()); ++c)
            mrf.unary[std::size_t(i) * labels + c] = problem.unary[i][c];
    for (int i = 0; i + 1 < mrf.nodes; ++i) {
        std::vector<double> table(std::size_t(labels) * labels, kInfCost);
        int cur = int(problem.unary[i].size());
        int nxt = int(problem.unary[i + 1].size());
        for (int a = 0; a < cur; ++a)
            for (int b = 0; b < nxt; ++b) table[std::size_t(a) * labels + b] = problem.pair_cost(i, a, b);
        mrf.edges.push_back({i, i + 1, PairwiseCost::from_table(labels, std::move(table))});
    }
    return mrf;
}

// Greedy per-node unary minimizer; the conventional expansion start.
inline std::vector<int> argmin_unary_labeling(const MultiLabelProblem& problem) {
    std::vector<int> labeling(problem.nodes, 0);
    for (int n = 0; n < problem.nodes; ++n) {
        double best = kInfCost + 1.0;
        for (int l = 0; l < problem.labels; ++l) {
            double u = problem.unary_at(n, l);
            if (u < best) {
                best = u;
                labeling[n] = l;
            }
        }
    }
    return labeling;
}

}  // namespace visyn
