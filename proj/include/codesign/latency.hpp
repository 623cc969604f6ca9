#pragma once

#include "codesign/latency_table.hpp"
#include "codesign/network.hpp"
#include "codesign/scheduler.hpp"

#include <array>
#include <vector>

namespace codesign {

/// A cell unrolled into the skeleton, with table ids resolved once so repeated
/// scheduling under different accelerators only does lookups.
struct CompiledNetwork {
    Network network;
    TaskGraph graph;
    std::vector<int> variant_ids; ///< -1 when the table has no row for the variant
};

inline CompiledNetwork compile_network(const CellSpec& cell, const SkeletonSpec& sk, const LatencyTable& table) {
    CompiledNetwork c;
    c.network = unroll(cell, sk);
    std::vector<std::vector<int>> preds;
    preds.reserve(c.network.ops.size());
    for (const NetOp& op : c.network.ops) {
        preds.push_back(op.preds);
        c.variant_ids.push_back(table.variant_id(op.variant));
    }
    c.graph = TaskGraph::from_preds(preds);
    return c;
}

struct NetworkSchedule {
    double total_latency_ms = 0.0;
    Schedule schedule;
    std::vector<ExecUnit> units; ///< unit of each op
    std::vector<double> durations;
};

inline NetworkSchedule schedule(const CompiledNetwork& net, const HwConfig& hw, const LatencyTable& table) {
    const auto& ops = net.network.ops;
    const int projection = latency_projection(hw);
    NetworkSchedule out;
    out.durations.resize(ops.size());
    out.units.resize(ops.size());
    std::vector<int> unit_ids(ops.size());
    for (std::size_t i = 0; i < ops.size(); ++i) {
        out.units[i] = unit_for(ops[i].variant.kind, hw);
        unit_ids[i] = static_cast<int>(out.units[i]);
        const int id = net.variant_ids[i];
        out.durations[i] = id >= 0 ? table.lookup(id, projection) : table.lookup(ops[i].variant, hw);
    }
    out.schedule = list_schedule(net.graph, out.durations, unit_ids, kNumExecUnits);
    out.total_latency_ms = out.schedule.makespan;
    return out;
}

/// Unrolls the cell into the skeleton and list-schedules it on the accelerator's units.
inline NetworkSchedule schedule(const CellSpec& cell, const SkeletonSpec& sk, const HwConfig& hw, const LatencyTable& table) {
    return schedule(compile_network(cell, sk, table), hw, table);
}

inline double latency(const CompiledNetwork& net, const HwConfig& hw, const LatencyTable& table) {
    return schedule(net, hw, table).total_latency_ms;
}

inline double latency(const CellSpec& cell, const SkeletonSpec& sk, const HwConfig& hw, const LatencyTable& table) {
    return schedule(cell, sk, hw, table).total_latency_ms;
}

/// Latency under every projection; index with latency_projection(hw).
inline std::array<double, kNumLatencyProjections> latency_by_projection(const CompiledNetwork& net, const LatencyTable& table) {
    std::array<double, kNumLatencyProjections> out{};
    for (int p = 0; p < kNumLatencyProjections; ++p) out[p] = latency(net, hw_from_projection(p), table);
    return out;
}

} // namespace codesign
