#pragma once

#include "codesign/cell_hash.hpp"
#include "codesign/design_space.hpp"

#include <cstdint>
#include <random>
#include <unordered_set>
#include <vector>

namespace codesign {

/// Calls `fn(cell)` for every unlabelled n-node adjacency whose nodes all lie on
/// an INPUT->OUTPUT path and that has at most `max_edges` edges. Ops are left at
/// their default. Order: edge masks ascending (bit k = k-th row-major slot).
template <typename Fn>
void for_each_connected_matrix(int n, int max_edges, Fn&& fn) {
    const int slots = n * (n - 1) / 2;
    std::array<std::pair<int, int>, kMaxEdgeSlots> slot{};
    int k = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) slot[k++] = {i, j};
    CellSpec c;
    c.num_nodes = n;
    for (std::uint32_t mask = 0; mask < (1u << slots); ++mask) {
        if (std::popcount(mask) > max_edges) continue;
        c.rows.fill(0);
        for (int s = 0; s < slots; ++s)
            if ((mask >> s) & 1u) c.set_edge(slot[s].first, slot[s].second);
        if (is_fully_connected(c)) fn(static_cast<const CellSpec&>(c));
    }
}

/// Streams one representative per isomorphism class of valid cells with at most
/// `max_nodes` nodes and `max_edges` edges. Identity is cell_hash. Order: node count,
/// then edge mask, then op labelling in base-3 order (node 1 least significant).
template <typename Fn>
void for_each_cell(int max_nodes, int max_edges, Fn&& fn) {
    if (max_nodes < 2 || max_nodes > kMaxNodes) throw Error("max_nodes must lie in [2,7]");
    if (max_edges < 1 || max_edges > kMaxEdgeSlots) throw Error("max_edges out of range");
    std::unordered_set<Digest128, DigestHash> seen;
    for (int n = 2; n <= max_nodes; ++n) {
        const int interior = n - 2;
        int labellings = 1;
        for (int i = 0; i < interior; ++i) labellings *= kNumCellOps;
        for_each_connected_matrix(n, max_edges, [&](const CellSpec& shape) {
            CellSpec c = shape;
            for (int code = 0; code < labellings; ++code) {
                int rest = code;
                for (int v = 1; v <= interior; ++v) {
                    c.set_op(v, static_cast<CellOp>(rest % kNumCellOps));
                    rest /= kNumCellOps;
                }
                if (seen.insert(cell_hash(c)).second) fn(static_cast<const CellSpec&>(c));
            }
        });
    }
}

inline std::vector<CellSpec> enumerate_cells(int max_nodes, int max_edges = kMaxEdges) {
    std::vector<CellSpec> out;
    for_each_cell(max_nodes, max_edges, [&](const CellSpec& c) { out.push_back(c); });
    return out;
}

/// Draws `count` distinct (by digest) valid cells by decoding uniformly random
/// cell decision vectors. Deterministic in `seed`. Stops early if the space runs dry.
inline std::vector<CellSpec> sample_cells(std::size_t count, std::uint64_t seed, int max_nodes = kMaxNodes) {
    const DecisionSchema schema = decision_schema(SpaceKind::Cell, max_nodes);
    std::mt19937_64 rng(seed);
    std::unordered_set<Digest128, DigestHash> seen;
    std::vector<CellSpec> out;
    std::vector<int> choices(schema.size());
    const std::size_t max_draws = 2000 * count + 10000;
    for (std::size_t draw = 0; draw < max_draws && out.size() < count; ++draw) {
        for (std::size_t i = 0; i < choices.size(); ++i)
            choices[i] = static_cast<int>(rng() % static_cast<std::uint64_t>(schema.decisions[i].options));
        const DecodedPoint d = decode(schema, choices);
        if (!d.cell_ok()) continue;
        if (seen.insert(cell_hash(d.verdict.cell)).second) out.push_back(d.verdict.cell);
    }
    return out;
}

} // namespace codesign
