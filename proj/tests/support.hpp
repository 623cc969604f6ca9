#pragma once

#include "codesign/cell_enum.hpp"
#include "codesign/cell_hash.hpp"
#include "codesign/evaluator.hpp"
#include "codesign/latency_table.hpp"
#include "codesign/policy.hpp"
#include "codesign/scheduler.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <set>
#include <vector>

namespace testing_support {

using namespace codesign;

/// Synthetic-table, synthetic-oracle evaluator over the default skeleton.
inline std::unique_ptr<Evaluator> make_evaluator(int max_nodes = kMaxNodes, std::uint64_t oracle_seed = 1,
                                                 Calibration cal = {}, SkeletonSpec sk = {}) {
    auto table = std::make_shared<const LatencyTable>(build_latency_table(sk, SyntheticSource{cal}, max_nodes));
    auto oracle = std::make_shared<const AccuracyOracle>(AccuracyOracle::synthetic(cal, oracle_seed));
    return std::make_unique<Evaluator>(table, oracle, Evaluator::Options{sk, cal, 0});
}

/// Full adjacency of `c` with interior nodes renamed by `perm` (INPUT and OUTPUT fixed);
/// the result need not be upper triangular, so it is kept as a plain matrix.
struct LabelledGraph {
    int n = 0;
    std::vector<int> adj; // n*n
    std::vector<int> labels;
    friend auto operator<=>(const LabelledGraph&, const LabelledGraph&) = default;
};

inline LabelledGraph permuted(const CellSpec& c, const std::vector<int>& perm) {
    const int n = c.num_nodes;
    LabelledGraph g{n, std::vector<int>(n * n, 0), std::vector<int>(n, 0)};
    auto to = [&](int v) { return (v == 0 || v == n - 1) ? v : perm[v - 1]; };
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (c.has_edge(i, j)) g.adj[to(i) * n + to(j)] = 1;
    g.labels[0] = 10;
    g.labels[n - 1] = 11;
    for (int v = 1; v + 1 < n; ++v) g.labels[to(v)] = static_cast<int>(c.op(v));
    return g;
}

/// Brute-force canonical form: minimum over every relabeling of the interior nodes.
inline LabelledGraph brute_canonical(const CellSpec& c) {
    std::vector<int> perm(std::max(0, c.num_nodes - 2));
    std::iota(perm.begin(), perm.end(), 1);
    LabelledGraph best = permuted(c, perm);
    while (std::next_permutation(perm.begin(), perm.end())) best = std::min(best, permuted(c, perm));
    return best;
}

/// Every raw (num_nodes, edges, ops) encoding with up to `max_nodes` nodes.
template <typename Fn>
void for_each_raw_cell(int max_nodes, Fn&& fn) {
    for (int n = 2; n <= max_nodes; ++n) {
        const int slots = n * (n - 1) / 2;
        int labellings = 1;
        for (int v = 1; v + 1 < n; ++v) labellings *= kNumCellOps;
        for (std::uint32_t mask = 0; mask < (1u << slots); ++mask)
            for (int lab = 0; lab < labellings; ++lab) {
                CellSpec c;
                c.num_nodes = n;
                int bit = 0;
                for (int i = 0; i < n; ++i)
                    for (int j = i + 1; j < n; ++j)
                        if ((mask >> bit++) & 1u) c.set_edge(i, j);
                int code = lab;
                for (int v = 1; v + 1 < n; ++v) {
                    c.set_op(v, static_cast<CellOp>(code % kNumCellOps));
                    code /= kNumCellOps;
                }
                fn(c);
            }
    }
}

/// Renames interior nodes along a random topological order; the result is an
/// isomorphic, still upper-triangular cell.
inline CellSpec random_relabel(const CellSpec& c, std::mt19937_64& rng) {
    const int n = c.num_nodes;
    std::vector<int> order{0};
    std::vector<bool> placed(n, false);
    placed[0] = true;
    while (static_cast<int>(order.size()) < n - 1) {
        std::vector<int> ready;
        for (int v = 1; v < n - 1; ++v) {
            if (placed[v]) continue;
            bool ok = true;
            for (int u = 0; u < v; ++u)
                if (c.has_edge(u, v) && !placed[u]) ok = false;
            if (ok) ready.push_back(v);
        }
        const int pick = ready[std::uniform_int_distribution<std::size_t>(0, ready.size() - 1)(rng)];
        placed[pick] = true;
        order.push_back(pick);
    }
    order.push_back(n - 1);
    std::vector<int> rank(n);
    for (int k = 0; k < n; ++k) rank[order[k]] = k;
    CellSpec out;
    out.num_nodes = n;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (c.has_edge(i, j)) out.set_edge(rank[i], rank[j]);
    for (int v = 1; v + 1 < n; ++v) out.set_op(rank[v], c.op(v));
    return out;
}

/// Nodes on some INPUT->OUTPUT path, computed by plain DFS.
inline std::vector<bool> on_path(const CellSpec& c) {
    const int n = c.num_nodes;
    std::vector<bool> fwd(n, false), bwd(n, false);
    std::vector<int> stack{0};
    fwd[0] = true;
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (int v = u + 1; v < n; ++v)
            if (c.has_edge(u, v) && !fwd[v]) {
                fwd[v] = true;
                stack.push_back(v);
            }
    }
    stack = {n - 1};
    bwd[n - 1] = true;
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int u = 0; u < v; ++u)
            if (c.has_edge(u, v) && !bwd[u]) {
                bwd[u] = true;
                stack.push_back(u);
            }
    }
    std::vector<bool> out(n);
    for (int v = 0; v < n; ++v) out[v] = fwd[v] && bwd[v];
    return out;
}

/// O(n^2) non-dominated filter over metric triples.
inline std::vector<std::size_t> brute_frontier(const std::vector<Metrics>& pts) {
    auto dom = [](const Metrics& a, const Metrics& b) {
        return a.area_mm2 <= b.area_mm2 && a.latency_ms <= b.latency_ms && a.accuracy >= b.accuracy &&
               (a.area_mm2 < b.area_mm2 || a.latency_ms < b.latency_ms || a.accuracy > b.accuracy);
    };
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        bool dominated = false, duplicate = false;
        for (std::size_t j = 0; j < pts.size() && !dominated && !duplicate; ++j) {
            if (i == j) continue;
            dominated = dom(pts[j], pts[i]);
            duplicate = j < i && pts[j] == pts[i];
        }
        if (!dominated && !duplicate) keep.push_back(i);
    }
    return keep;
}

/// Makespan of placing tasks in `order`, each as early as its unit and predecessors allow.
inline double semi_active_makespan(const TaskGraph& g, const std::vector<int>& order, const std::vector<double>& d,
                                   const std::vector<int>& u, int num_units) {
    std::vector<double> unit_free(num_units, 0.0), finish(g.size(), 0.0);
    double makespan = 0.0;
    for (int t : order) {
        double start = unit_free[u[t]];
        for (int p : g.preds_of(t)) start = std::max(start, finish[p]);
        finish[t] = start + d[t];
        unit_free[u[t]] = finish[t];
        makespan = std::max(makespan, finish[t]);
    }
    return makespan;
}

/// Optimal makespan by trying every topological order. Sorting any optimal schedule
/// by start time gives an order whose semi-active schedule is no longer.
inline double exhaustive_makespan(const TaskGraph& g, const std::vector<double>& d, const std::vector<int>& u,
                                  int num_units) {
    const int n = g.size();
    std::vector<int> order, waiting(n);
    std::vector<bool> used(n, false);
    for (int t = 0; t < n; ++t) waiting[t] = static_cast<int>(g.preds_of(t).size());
    double best = std::numeric_limits<double>::infinity();
    std::function<void()> rec = [&] {
        if (static_cast<int>(order.size()) == n) {
            best = std::min(best, semi_active_makespan(g, order, d, u, num_units));
            return;
        }
        for (int t = 0; t < n; ++t) {
            if (used[t] || waiting[t] != 0) continue;
            used[t] = true;
            order.push_back(t);
            for (int s : g.succs_of(t)) --waiting[s];
            rec();
            for (int s : g.succs_of(t)) ++waiting[s];
            order.pop_back();
            used[t] = false;
        }
    };
    rec();
    return best;
}

struct RandomDag {
    TaskGraph graph;
    std::vector<double> durations;
    std::vector<int> units;
    int num_units = 1;
};

inline RandomDag random_dag(std::mt19937_64& rng, int max_ops = 8, int max_units = 3, double edge_prob = 0.3) {
    RandomDag r;
    const int n = std::uniform_int_distribution<int>(1, max_ops)(rng);
    r.num_units = std::uniform_int_distribution<int>(1, max_units)(rng);
    std::bernoulli_distribution edge(edge_prob);
    std::vector<std::vector<int>> preds(n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < j; ++i)
            if (edge(rng)) preds[j].push_back(i);
    std::uniform_int_distribution<int> ticks(100, 1000);
    std::uniform_int_distribution<int> unit(0, r.num_units - 1);
    for (int t = 0; t < n; ++t) {
        r.durations.push_back(ticks(rng) / 100.0);
        r.units.push_back(unit(rng));
    }
    r.graph = TaskGraph::from_preds(preds);
    return r;
}

/// Largest elementwise relative gap between the analytic gradient of
/// log pi(choices) + beta * H and central finite differences, over entries
/// whose magnitude exceeds `tiny`.
inline double worst_fd_gap(Policy& p, const std::vector<int>& choices, double beta, double step = 1e-5,
                           double tiny = 1e-7) {
    const std::vector<double> g = p.gradient(choices, 1.0, beta);
    auto objective = [&] { return p.log_prob(choices) + beta * p.entropy(choices); };
    auto params = p.parameters();
    double worst = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double keep = params[k];
        params[k] = keep + step;
        const double up = objective();
        params[k] = keep - step;
        const double down = objective();
        params[k] = keep;
        const double fd = (up - down) / (2 * step);
        const double scale = std::max(std::abs(fd), std::abs(g[k]));
        if (scale > tiny) worst = std::max(worst, std::abs(fd - g[k]) / scale);
    }
    return worst;
}

/// Steps until a one-decision controller puts >= 0.99 on the only rewarded arm,
/// or -1 if that does not happen within `budget` steps.
inline int bandit_steps_to_converge(std::uint64_t seed, int arms = 2, int budget = 2000, ControllerOptions opts = {}) {
    DecisionSchema schema;
    schema.space = SpaceKind::Cell;
    schema.decisions = {{"arm", arms}};
    Policy p(schema, opts, seed);
    const std::vector<int> target{arms - 1};
    for (int t = 1; t <= budget; ++t) {
        const PolicySample s = p.sample();
        p.update(s.choices, s.choices[0] == arms - 1 ? 1.0 : 0.0);
        if (p.distributions(target)[0][arms - 1] >= 0.99) return t;
    }
    return -1;
}

} // namespace testing_support
