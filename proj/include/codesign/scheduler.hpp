#pragma once

#include "codesign/error.hpp"

#include <algorithm>
#include <span>
#include <vector>

namespace codesign {

/// Precedence DAG in compressed form. Tasks are indexed in topological order
/// (every predecessor has a smaller index).
struct TaskGraph {
    std::vector<int> pred_offsets{0};
    std::vector<int> preds;
    std::vector<int> succ_offsets{0};
    std::vector<int> succs;

    int size() const { return static_cast<int>(pred_offsets.size()) - 1; }

    std::span<const int> preds_of(int t) const {
        return {preds.data() + pred_offsets[t], static_cast<std::size_t>(pred_offsets[t + 1] - pred_offsets[t])};
    }
    std::span<const int> succs_of(int t) const {
        return {succs.data() + succ_offsets[t], static_cast<std::size_t>(succ_offsets[t + 1] - succ_offsets[t])};
    }

    static TaskGraph from_preds(const std::vector<std::vector<int>>& pred_lists) {
        TaskGraph g;
        const int n = static_cast<int>(pred_lists.size());
        std::vector<int> out_degree(n, 0);
        for (int t = 0; t < n; ++t) {
            for (int p : pred_lists[t]) {
                if (p < 0 || p >= t) throw Error("task graph must be listed in topological order");
                g.preds.push_back(p);
                ++out_degree[p];
            }
            g.pred_offsets.push_back(static_cast<int>(g.preds.size()));
        }
        for (int t = 0; t < n; ++t) g.succ_offsets.push_back(g.succ_offsets.back() + out_degree[t]);
        g.succs.resize(g.preds.size());
        std::vector<int> fill(g.succ_offsets.begin(), g.succ_offsets.end() - 1);
        for (int t = 0; t < n; ++t)
            for (int p : g.preds_of(t)) g.succs[fill[p]++] = t;
        return g;
    }
};

struct Placement {
    int unit = 0;
    double start = 0.0;
    double finish = 0.0;
};

struct Schedule {
    double makespan = 0.0;
    std::vector<Placement> placements; ///< indexed by task
    std::vector<int> order;            ///< tasks in the order they were placed
};

/// Greedy list scheduling. Each task runs on exactly one unit. Until every task
/// is placed: among the tasks whose predecessors are all placed, take the one
/// with the smallest (earliest feasible start, topological index) and start it
/// at max(unit free time, latest predecessor finish). Deterministic.
inline Schedule list_schedule(const TaskGraph& g, std::span<const double> durations, std::span<const int> units,
                              int num_units) {
    const int n = g.size();
    if (static_cast<int>(durations.size()) != n || static_cast<int>(units.size()) != n)
        throw Error("durations and units must match the task count");
    Schedule s;
    s.placements.resize(n);
    s.order.reserve(n);
    std::vector<double> unit_free(num_units, 0.0);
    std::vector<double> ready_at(n, 0.0);
    std::vector<int> waiting(n);
    std::vector<int> eligible;
    for (int t = 0; t < n; ++t) {
        if (units[t] < 0 || units[t] >= num_units) throw Error("task assigned to an unknown unit");
        waiting[t] = static_cast<int>(g.preds_of(t).size());
        if (waiting[t] == 0) eligible.push_back(t);
    }
    while (!eligible.empty()) {
        std::size_t best = 0;
        double best_start = 0.0;
        for (std::size_t i = 0; i < eligible.size(); ++i) {
            const int t = eligible[i];
            const double start = std::max(unit_free[units[t]], ready_at[t]);
            if (i == 0 || start < best_start || (start == best_start && t < eligible[best])) {
                best = i;
                best_start = start;
            }
        }
        const int t = eligible[best];
        eligible[best] = eligible.back();
        eligible.pop_back();
        const double finish = best_start + durations[t];
        s.placements[t] = {units[t], best_start, finish};
        s.order.push_back(t);
        unit_free[units[t]] = finish;
        s.makespan = std::max(s.makespan, finish);
        for (int succ : g.succs_of(t)) {
            ready_at[succ] = std::max(ready_at[succ], finish);
            if (--waiting[succ] == 0) eligible.push_back(succ);
        }
    }
    return s;
}

/// Longest duration-weighted path; a lower bound on any schedule's makespan.
inline double critical_path(const TaskGraph& g, std::span<const double> durations) {
    std::vector<double> finish(g.size(), 0.0);
    double longest = 0.0;
    for (int t = 0; t < g.size(); ++t) {
        double start = 0.0;
        for (int p : g.preds_of(t)) start = std::max(start, finish[p]);
        finish[t] = start + durations[t];
        longest = std::max(longest, finish[t]);
    }
    return longest;
}

} // namespace codesign
