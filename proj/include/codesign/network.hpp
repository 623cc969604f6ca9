#pragma once

#include "codesign/design_space.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace codesign {

enum class NetOpKind : std::uint8_t { Conv3x3, Conv1x1, MaxPool3x3, EltwiseAdd, Concat, StemConv, Downsample };

inline constexpr std::array<NetOpKind, 7> kAllNetOpKinds{NetOpKind::Conv3x3,    NetOpKind::Conv1x1, NetOpKind::MaxPool3x3,
                                                         NetOpKind::EltwiseAdd, NetOpKind::Concat,  NetOpKind::StemConv,
                                                         NetOpKind::Downsample};

inline constexpr std::string_view to_string(NetOpKind k) {
    switch (k) {
    case NetOpKind::Conv3x3: return "CONV3X3";
    case NetOpKind::Conv1x1: return "CONV1X1";
    case NetOpKind::MaxPool3x3: return "MAXPOOL3X3";
    case NetOpKind::EltwiseAdd: return "ELTWISE_ADD";
    case NetOpKind::Concat: return "CONCAT";
    case NetOpKind::StemConv: return "STEM_CONV";
    case NetOpKind::Downsample: return "DOWNSAMPLE";
    }
    return "?";
}

inline NetOpKind net_op_kind_from_string(std::string_view s) {
    for (NetOpKind k : kAllNetOpKinds)
        if (to_string(k) == s) return k;
    throw ParseError("unknown op kind '" + std::string(s) + "'");
}

/// One distinct operation shape. For ELTWISE_ADD, in_channels counts all summed inputs.
struct OpVariant {
    NetOpKind kind = NetOpKind::Conv3x3;
    int height = 1;
    int width = 1;
    int in_channels = 1;
    int out_channels = 1;

    int kernel() const {
        switch (kind) {
        case NetOpKind::Conv3x3:
        case NetOpKind::StemConv:
        case NetOpKind::MaxPool3x3: return 3;
        case NetOpKind::Downsample: return 2;
        default: return 1;
        }
    }
    int out_height() const { return kind == NetOpKind::Downsample ? height / 2 : height; }
    int out_width() const { return kind == NetOpKind::Downsample ? width / 2 : width; }

    friend auto operator<=>(const OpVariant&, const OpVariant&) = default;
};

struct OpVariantHash {
    std::size_t operator()(const OpVariant& v) const noexcept {
        std::uint64_t h = static_cast<std::uint64_t>(v.kind);
        for (int x : {v.height, v.width, v.in_channels, v.out_channels}) h = h * 1000003ull ^ static_cast<std::uint64_t>(x);
        return static_cast<std::size_t>(h * 0x9e3779b97f4a7c15ull);
    }
};

enum class ExecUnit : std::uint8_t { ConvGeneral, Conv3x3, Conv1x1, PoolEngine, Cpu };
inline constexpr int kNumExecUnits = 5;

inline constexpr std::string_view to_string(ExecUnit u) {
    switch (u) {
    case ExecUnit::ConvGeneral: return "CONV_GENERAL";
    case ExecUnit::Conv3x3: return "CONV_3X3";
    case ExecUnit::Conv1x1: return "CONV_1X1";
    case ExecUnit::PoolEngine: return "POOL_ENGINE";
    case ExecUnit::Cpu: return "CPU";
    }
    return "?";
}

/// The only unit an op kind may run on under `hw`. Specialised engines are strict:
/// a 3x3 convolution never runs on the 1x1 engine.
inline ExecUnit unit_for(NetOpKind kind, const HwConfig& hw) {
    switch (kind) {
    case NetOpKind::Conv3x3:
    case NetOpKind::StemConv: return hw.has_dual_engines() ? ExecUnit::Conv3x3 : ExecUnit::ConvGeneral;
    case NetOpKind::Conv1x1: return hw.has_dual_engines() ? ExecUnit::Conv1x1 : ExecUnit::ConvGeneral;
    case NetOpKind::MaxPool3x3:
    case NetOpKind::Downsample: return hw.pool_en ? ExecUnit::PoolEngine : ExecUnit::Cpu;
    case NetOpKind::EltwiseAdd:
    case NetOpKind::Concat: return ExecUnit::Cpu;
    }
    return ExecUnit::Cpu;
}

struct NetOp {
    OpVariant variant;
    std::vector<int> preds; ///< indices of earlier ops whose outputs this op consumes
    int cell = -1;          ///< position of the hosting cell in the skeleton, -1 for skeleton ops
};

/// The whole network (skeleton with the cell at every position) as an op DAG in
/// topological order.
struct Network {
    std::vector<NetOp> ops;
};

/// Per-node channel counts of a cell: the output width is split across the interior
/// nodes feeding OUTPUT (remainder to the first ones), and nodes that do not feed
/// OUTPUT take the widest of their interior successors.
inline std::array<int, kMaxNodes> vertex_channels(const CellSpec& cell, int in_channels, int out_channels) {
    const int n = cell.num_nodes;
    std::array<int, kMaxNodes> ch{};
    ch[0] = in_channels;
    ch[n - 1] = out_channels;
    if (n == 2) return ch;
    int in_degree = 0;
    for (int v = 1; v < n - 1; ++v) in_degree += cell.has_edge(v, n - 1);
    const int interior = out_channels / in_degree;
    int correction = out_channels % in_degree;
    for (int v = 1; v < n - 1; ++v) {
        if (!cell.has_edge(v, n - 1)) continue;
        ch[v] = interior;
        if (correction) {
            ++ch[v];
            --correction;
        }
    }
    for (int v = n - 3; v > 0; --v) {
        if (cell.has_edge(v, n - 1)) continue;
        for (int dst = v + 1; dst < n - 1; ++dst)
            if (cell.has_edge(v, dst)) ch[v] = std::max(ch[v], ch[dst]);
    }
    return ch;
}

namespace detail {

inline NetOpKind net_kind(CellOp op) {
    switch (op) {
    case CellOp::Conv3x3: return NetOpKind::Conv3x3;
    case CellOp::Conv1x1: return NetOpKind::Conv1x1;
    case CellOp::MaxPool3x3: return NetOpKind::MaxPool3x3;
    }
    return NetOpKind::Conv3x3;
}

} // namespace detail

/// Visits the ops one cell contributes. `emit(variant, preds)` returns the new op's
/// index; `input` is the op producing the cell input (-1 for the network input).
/// Returns the op index producing the cell output.
///
/// Interior node v sums 1x1 projections of the cell input (edge 0->v) with its
/// interior predecessors, then applies its op. OUTPUT concatenates the interior
/// nodes that feed it and adds a projection of the cell input when 0->OUTPUT.
template <typename Emit>
int expand_cell(const CellSpec& cell, int resolution, int in_ch, int out_ch, int input, Emit&& emit) {
    const int n = cell.num_nodes;
    const auto ch = vertex_channels(cell, in_ch, out_ch);
    auto inputs_of = [&](int producer) { return producer < 0 ? std::vector<int>{} : std::vector<int>{producer}; };
    std::array<int, kMaxNodes> produced{};
    produced[0] = input;
    std::vector<int> concat_in;
    for (int v = 1; v < n - 1; ++v) {
        std::vector<int> add_in;
        for (int src = 1; src < v; ++src)
            if (cell.has_edge(src, v)) add_in.push_back(produced[src]);
        if (cell.has_edge(0, v))
            add_in.push_back(emit(OpVariant{NetOpKind::Conv1x1, resolution, resolution, in_ch, ch[v]}, inputs_of(input)));
        int vertex_in = add_in.front();
        if (add_in.size() > 1) {
            const int k = static_cast<int>(add_in.size());
            vertex_in = emit(OpVariant{NetOpKind::EltwiseAdd, resolution, resolution, k * ch[v], ch[v]}, add_in);
        }
        produced[v] = emit(OpVariant{detail::net_kind(cell.op(v)), resolution, resolution, ch[v], ch[v]}, std::vector<int>{vertex_in});
        if (cell.has_edge(v, n - 1)) concat_in.push_back(produced[v]);
    }
    if (concat_in.empty())
        return emit(OpVariant{NetOpKind::Conv1x1, resolution, resolution, in_ch, out_ch}, inputs_of(input));
    int out = concat_in.front();
    if (concat_in.size() > 1) out = emit(OpVariant{NetOpKind::Concat, resolution, resolution, out_ch, out_ch}, concat_in);
    if (cell.has_edge(0, n - 1)) {
        const int proj = emit(OpVariant{NetOpKind::Conv1x1, resolution, resolution, in_ch, out_ch}, inputs_of(input));
        out = emit(OpVariant{NetOpKind::EltwiseAdd, resolution, resolution, 2 * out_ch, out_ch}, std::vector<int>{out, proj});
    }
    return out;
}

/// Expands skeleton + cell into the full op DAG: stem conv, then `num_stacks` stacks
/// of `cells_per_stack` cells; every stack after the first starts with a 2x2
/// max-pool and doubles the channel count.
inline Network unroll(const CellSpec& cell, const SkeletonSpec& sk) {
    if (!sk.valid()) throw Error("invalid skeleton");
    Network net;
    auto emit = [&](const OpVariant& v, std::vector<int> preds) {
        net.ops.push_back(NetOp{v, std::move(preds), -1});
        return static_cast<int>(net.ops.size()) - 1;
    };
    int res = sk.input_resolution;
    int channels = sk.stem_channels;
    int current = emit(OpVariant{NetOpKind::StemConv, res, res, sk.input_channels, channels}, {});
    int position = 0;
    for (int stack = 0; stack < sk.num_stacks; ++stack) {
        int in_ch = channels;
        if (stack > 0) {
            current = emit(OpVariant{NetOpKind::Downsample, res, res, channels, channels}, {current});
            res /= 2;
            channels *= 2;
        }
        for (int c = 0; c < sk.cells_per_stack; ++c) {
            const std::size_t first = net.ops.size();
            current = expand_cell(cell, res, in_ch, channels, current, emit);
            for (std::size_t i = first; i < net.ops.size(); ++i) net.ops[i].cell = position;
            ++position;
            in_ch = channels;
        }
    }
    return net;
}

} // namespace codesign
