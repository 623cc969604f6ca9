#pragma once

#include "codesign/error.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace codesign {

// ---------------------------------------------------------------------------
// CNN cell space
// ---------------------------------------------------------------------------

inline constexpr int kMaxNodes = 7;
inline constexpr int kMaxEdges = 9;
inline constexpr int kMaxInterior = kMaxNodes - 2;
inline constexpr int kNumCellOps = 3;
/// Upper-triangular slots of a 7-node adjacency matrix.
inline constexpr int kMaxEdgeSlots = kMaxNodes * (kMaxNodes - 1) / 2;

/// Operation of an interior cell node. The numeric value is the digit used in text encodings.
enum class CellOp : std::uint8_t { Conv3x3 = 0, Conv1x1 = 1, MaxPool3x3 = 2 };

inline constexpr std::string_view to_string(CellOp op) {
    switch (op) {
    case CellOp::Conv3x3: return "CONV3X3";
    case CellOp::Conv1x1: return "CONV1X1";
    case CellOp::MaxPool3x3: return "MAXPOOL3X3";
    }
    return "?";
}

/// A cell DAG. Node 0 is INPUT, node num_nodes-1 is OUTPUT; rows are bitmasks
/// (bit j of row i set means i feeds j). Only interior nodes carry an op.
struct CellSpec {
    int num_nodes = 2;
    std::array<std::uint8_t, kMaxNodes> rows{};
    std::array<CellOp, kMaxInterior> ops{};

    bool has_edge(int from, int to) const { return (rows[from] >> to) & 1u; }
    void set_edge(int from, int to, bool on = true) {
        if (on)
            rows[from] |= static_cast<std::uint8_t>(1u << to);
        else
            rows[from] &= static_cast<std::uint8_t>(~(1u << to));
    }

    int edge_count() const {
        int n = 0;
        for (int i = 0; i < num_nodes; ++i) n += std::popcount(rows[i]);
        return n;
    }

    /// Op of interior node `node` (1 <= node <= num_nodes-2).
    CellOp op(int node) const { return ops[node - 1]; }
    void set_op(int node, CellOp op) { ops[node - 1] = op; }

    int in_degree(int node) const {
        int d = 0;
        for (int i = 0; i < node; ++i) d += has_edge(i, node);
        return d;
    }
    int out_degree(int node) const { return std::popcount(rows[node]); }

    /// Compares the meaningful part only; unused slots are ignored.
    friend bool operator==(const CellSpec& a, const CellSpec& b) {
        if (a.num_nodes != b.num_nodes) return false;
        for (int i = 0; i < a.num_nodes; ++i)
            if (a.rows[i] != b.rows[i]) return false;
        for (int v = 1; v + 1 < a.num_nodes; ++v)
            if (a.op(v) != b.op(v)) return false;
        return true;
    }
};

/// Builds a cell from an explicit edge list; convenient in tests and fixtures.
inline CellSpec make_cell(int num_nodes, std::initializer_list<std::pair<int, int>> edges,
                          std::initializer_list<CellOp> ops = {}) {
    CellSpec c;
    c.num_nodes = num_nodes;
    for (auto [i, j] : edges) c.set_edge(i, j);
    int v = 1;
    for (CellOp op : ops) c.set_op(v++, op);
    return c;
}

enum class CellStatus { Accept, TooManyEdges, Disconnected, MalformedMatrix };

inline constexpr std::string_view to_string(CellStatus s) {
    switch (s) {
    case CellStatus::Accept: return "ACCEPT";
    case CellStatus::TooManyEdges: return "TooManyEdges";
    case CellStatus::Disconnected: return "Disconnected";
    case CellStatus::MalformedMatrix: return "MalformedMatrix";
    }
    return "?";
}

struct CellVerdict {
    CellStatus status = CellStatus::MalformedMatrix;
    CellSpec cell; ///< pruned canonical cell, meaningful on Accept only
    std::string reason;

    bool accepted() const { return status == CellStatus::Accept; }
};

namespace detail {

/// Bitmask of nodes reachable from `start` following edges forward.
inline std::uint32_t forward_reach(const CellSpec& c, int start) {
    std::uint32_t seen = 1u << start;
    for (int i = start; i < c.num_nodes; ++i)
        if ((seen >> i) & 1u) seen |= c.rows[i];
    return seen;
}

/// Bitmask of nodes from which `target` is reachable.
inline std::uint32_t backward_reach(const CellSpec& c, int target) {
    std::uint32_t seen = 1u << target;
    for (int i = target - 1; i >= 0; --i)
        if (c.rows[i] & seen) seen |= 1u << i;
    return seen;
}

} // namespace detail

/// Checks the cell and prunes every node that is not on an INPUT->OUTPUT path.
/// The edge limit applies to the pruned graph.
inline CellVerdict validate_cell(const CellSpec& cell, int max_edges = kMaxEdges) {
    CellVerdict v;
    const int n = cell.num_nodes;
    if (n < 2 || n > kMaxNodes) {
        v.reason = "node count " + std::to_string(n) + " outside [2," + std::to_string(kMaxNodes) + "]";
        return v;
    }
    for (int i = 0; i < kMaxNodes; ++i) {
        // allowed bits: j in (i, n)
        const std::uint32_t allowed = i < n ? (((1u << n) - 1u) & ~((1u << (i + 1)) - 1u)) : 0u;
        if (cell.rows[i] & ~allowed) {
            v.reason = "row " + std::to_string(i) + " has entries outside the strict upper triangle";
            return v;
        }
    }
    for (int node = 1; node + 1 < n; ++node)
        if (static_cast<int>(cell.op(node)) >= kNumCellOps) {
            v.reason = "node " + std::to_string(node) + " has an unknown op";
            return v;
        }

    const std::uint32_t keep = detail::forward_reach(cell, 0) & detail::backward_reach(cell, n - 1);
    if (!((keep >> (n - 1)) & 1u)) {
        v.status = CellStatus::Disconnected;
        v.reason = "no path from INPUT to OUTPUT";
        return v;
    }

    std::array<int, kMaxNodes> remap{};
    int m = 0;
    for (int i = 0; i < n; ++i) remap[i] = ((keep >> i) & 1u) ? m++ : -1;

    CellSpec pruned;
    pruned.num_nodes = m;
    for (int i = 0; i < n; ++i) {
        if (remap[i] < 0) continue;
        for (int j = i + 1; j < n; ++j)
            if (remap[j] >= 0 && cell.has_edge(i, j)) pruned.set_edge(remap[i], remap[j]);
        if (i > 0 && i + 1 < n) pruned.set_op(remap[i], cell.op(i));
    }
    if (pruned.edge_count() > max_edges) {
        v.status = CellStatus::TooManyEdges;
        v.reason = std::to_string(pruned.edge_count()) + " edges exceed the limit of " + std::to_string(max_edges);
        return v;
    }
    v.status = CellStatus::Accept;
    v.cell = pruned;
    return v;
}

/// True when every node already lies on an INPUT->OUTPUT path (validate_cell would not prune).
inline bool is_fully_connected(const CellSpec& c) {
    const std::uint32_t all = (1u << c.num_nodes) - 1u;
    return (detail::forward_reach(c, 0) & detail::backward_reach(c, c.num_nodes - 1)) == all;
}

// ---------------------------------------------------------------------------
// Accelerator space
// ---------------------------------------------------------------------------

inline constexpr std::array<int, 2> kFilterParOptions{8, 16};
inline constexpr std::array<int, 5> kPixelParOptions{4, 8, 16, 32, 64};
inline constexpr std::array<int, 4> kInputBufferOptions{1024, 2048, 4096, 8192};
inline constexpr std::array<int, 3> kWeightsBufferOptions{1024, 2048, 4096};
inline constexpr std::array<int, 3> kOutputBufferOptions{1024, 2048, 4096};
inline constexpr std::array<int, 2> kMemWidthOptions{256, 512};
inline constexpr std::array<bool, 2> kPoolEnOptions{false, true};
inline constexpr std::array<double, 6> kRatioOptions{1.0, 0.75, 0.67, 0.5, 0.33, 0.25};

/// Option counts of the eight accelerator fields, in declaration order.
inline constexpr std::array<int, 8> kHwOptionCounts{2, 5, 4, 3, 3, 2, 2, 6};
inline constexpr int kNumHwConfigs = 2 * 5 * 4 * 3 * 3 * 2 * 2 * 6;
/// Fields that the latency model depends on: filter_par, pixel_par, mem width, ratio, pool_en.
inline constexpr int kNumLatencyProjections = 2 * 5 * 2 * 6 * 2;

inline constexpr std::array<std::string_view, 8> kHwFieldNames{
    "filter_par",          "pixel_par",          "input_buffer_depth", "weights_buffer_depth",
    "output_buffer_depth", "mem_interface_width", "pool_en",           "ratio_conv_engines"};

/// One accelerator configuration. Buffer depths are in words (1K = 1024).
struct HwConfig {
    int filter_par = 8;
    int pixel_par = 4;
    int input_buffer_depth = 1024;
    int weights_buffer_depth = 1024;
    int output_buffer_depth = 1024;
    int mem_interface_width = 256;
    bool pool_en = false;
    double ratio_conv_engines = 1.0;

    bool has_dual_engines() const { return ratio_conv_engines < 1.0; }

    friend bool operator==(const HwConfig&, const HwConfig&) = default;
};

namespace detail {

template <typename T, std::size_t N>
constexpr int option_index(const std::array<T, N>& options, T value) {
    for (std::size_t i = 0; i < N; ++i)
        if (options[i] == value) return static_cast<int>(i);
    return -1;
}

} // namespace detail

/// Per-field option indices of `hw`; an entry is -1 when the value is not in its set.
inline std::array<int, 8> hw_option_indices(const HwConfig& hw) {
    return {detail::option_index(kFilterParOptions, hw.filter_par),
            detail::option_index(kPixelParOptions, hw.pixel_par),
            detail::option_index(kInputBufferOptions, hw.input_buffer_depth),
            detail::option_index(kWeightsBufferOptions, hw.weights_buffer_depth),
            detail::option_index(kOutputBufferOptions, hw.output_buffer_depth),
            detail::option_index(kMemWidthOptions, hw.mem_interface_width),
            detail::option_index(kPoolEnOptions, hw.pool_en),
            detail::option_index(kRatioOptions, hw.ratio_conv_engines)};
}

inline bool is_valid_hw(const HwConfig& hw) {
    for (int idx : hw_option_indices(hw))
        if (idx < 0) return false;
    return true;
}

inline HwConfig hw_from_option_indices(const std::array<int, 8>& idx) {
    HwConfig hw;
    hw.filter_par = kFilterParOptions.at(idx[0]);
    hw.pixel_par = kPixelParOptions.at(idx[1]);
    hw.input_buffer_depth = kInputBufferOptions.at(idx[2]);
    hw.weights_buffer_depth = kWeightsBufferOptions.at(idx[3]);
    hw.output_buffer_depth = kOutputBufferOptions.at(idx[4]);
    hw.mem_interface_width = kMemWidthOptions.at(idx[5]);
    hw.pool_en = kPoolEnOptions.at(idx[6]);
    hw.ratio_conv_engines = kRatioOptions.at(idx[7]);
    return hw;
}

/// Dense rank of a valid config in the lexicographic enumeration order
/// (fields in declaration order, options in listed order, first field most significant).
inline int hw_index(const HwConfig& hw) {
    const auto idx = hw_option_indices(hw);
    int rank = 0;
    for (int f = 0; f < 8; ++f) {
        if (idx[f] < 0) throw Error("hw config field " + std::string(kHwFieldNames[f]) + " has an invalid value");
        rank = rank * kHwOptionCounts[f] + idx[f];
    }
    return rank;
}

inline HwConfig hw_from_index(int rank) {
    if (rank < 0 || rank >= kNumHwConfigs) throw Error("hw index out of range");
    std::array<int, 8> idx{};
    for (int f = 7; f >= 0; --f) {
        idx[f] = rank % kHwOptionCounts[f];
        rank /= kHwOptionCounts[f];
    }
    return hw_from_option_indices(idx);
}

/// Every valid accelerator configuration exactly once, in hw_index order.
inline std::vector<HwConfig> enumerate_hw() {
    std::vector<HwConfig> all;
    all.reserve(kNumHwConfigs);
    for (int i = 0; i < kNumHwConfigs; ++i) all.push_back(hw_from_index(i));
    return all;
}

/// Index of the latency-relevant projection (filter_par, pixel_par, mem width, ratio, pool_en).
inline int latency_projection(const HwConfig& hw) {
    const auto idx = hw_option_indices(hw);
    return (((idx[0] * 5 + idx[1]) * 2 + idx[5]) * 6 + idx[7]) * 2 + idx[6];
}

/// A representative config (minimum buffers) for a projection index.
inline HwConfig hw_from_projection(int projection) {
    std::array<int, 8> idx{};
    idx[6] = projection % 2;
    projection /= 2;
    idx[7] = projection % 6;
    projection /= 6;
    idx[5] = projection % 2;
    projection /= 2;
    idx[1] = projection % 5;
    idx[0] = projection / 5;
    return hw_from_option_indices(idx);
}

// ---------------------------------------------------------------------------
// Joint space
// ---------------------------------------------------------------------------

struct SearchPoint {
    CellSpec cell;
    HwConfig hw;

    friend bool operator==(const SearchPoint&, const SearchPoint&) = default;
};

/// Fixed outer network hosting the cell: a stem conv, then stacks of cells
/// separated by a 2x2 max-pool that halves resolution and doubles channels.
struct SkeletonSpec {
    int num_stacks = 3;
    int cells_per_stack = 3;
    int stem_channels = 128;
    int input_resolution = 32;
    int input_channels = 3;

    bool valid() const {
        if (num_stacks < 1 || cells_per_stack < 1 || stem_channels < 1 || input_channels < 1) return false;
        if (num_stacks > 20) return false;
        return (input_resolution >> (num_stacks - 1)) >= 1;
    }

    friend bool operator==(const SkeletonSpec&, const SkeletonSpec&) = default;
};

// ---------------------------------------------------------------------------
// Controller decision schema
// ---------------------------------------------------------------------------

enum class SpaceKind { Cell, Hw, Joint };

struct Decision {
    std::string name;
    int options = 0;
};

/// Ordered decisions: cell edges row-major over the upper triangle, then interior
/// ops by node index, then the accelerator fields in declaration order.
struct DecisionSchema {
    SpaceKind space = SpaceKind::Joint;
    int max_nodes = kMaxNodes;
    std::vector<Decision> decisions;

    std::size_t size() const { return decisions.size(); }
    int num_edge_decisions() const {
        return space == SpaceKind::Hw ? 0 : max_nodes * (max_nodes - 1) / 2;
    }
    int num_cell_decisions() const {
        return space == SpaceKind::Hw ? 0 : num_edge_decisions() + (max_nodes - 2);
    }

    /// Stable textual identity used to reject checkpoints taken on another schema.
    std::string fingerprint() const {
        std::ostringstream out;
        out << "schema-v1";
        for (const auto& d : decisions) out << '|' << d.name << ':' << d.options;
        return out.str();
    }
};

inline DecisionSchema decision_schema(SpaceKind space, int max_nodes = kMaxNodes) {
    if (max_nodes < 2 || max_nodes > kMaxNodes) throw Error("max_nodes must lie in [2,7]");
    DecisionSchema s;
    s.space = space;
    s.max_nodes = max_nodes;
    if (space != SpaceKind::Hw) {
        for (int i = 0; i < max_nodes; ++i)
            for (int j = i + 1; j < max_nodes; ++j)
                s.decisions.push_back({"edge_" + std::to_string(i) + "_" + std::to_string(j), 2});
        for (int v = 1; v + 1 < max_nodes; ++v) s.decisions.push_back({"op_" + std::to_string(v), kNumCellOps});
    }
    if (space != SpaceKind::Cell)
        for (int f = 0; f < 8; ++f) s.decisions.push_back({"hw." + std::string(kHwFieldNames[f]), kHwOptionCounts[f]});
    return s;
}

/// Result of turning a decision vector into a design point.
struct DecodedPoint {
    std::optional<CellSpec> raw_cell; ///< as sampled, before pruning
    CellVerdict verdict;              ///< meaningful when raw_cell is set
    std::optional<HwConfig> hw;

    bool cell_ok() const { return raw_cell && verdict.accepted(); }
};

/// Decodes a decision vector. Malformed vectors (wrong length, option out of range)
/// throw; structurally invalid cells come back as a REJECT verdict.
inline DecodedPoint decode(const DecisionSchema& schema, std::span<const int> choices) {
    if (choices.size() != schema.size()) throw Error("decision vector length does not match schema");
    for (std::size_t i = 0; i < choices.size(); ++i)
        if (choices[i] < 0 || choices[i] >= schema.decisions[i].options)
            throw Error("decision " + schema.decisions[i].name + " out of range");
    DecodedPoint out;
    std::size_t k = 0;
    if (schema.space != SpaceKind::Hw) {
        CellSpec c;
        c.num_nodes = schema.max_nodes;
        for (int i = 0; i < c.num_nodes; ++i)
            for (int j = i + 1; j < c.num_nodes; ++j)
                if (choices[k++]) c.set_edge(i, j);
        for (int v = 1; v + 1 < c.num_nodes; ++v) c.set_op(v, static_cast<CellOp>(choices[k++]));
        out.raw_cell = c;
        out.verdict = validate_cell(c);
    }
    if (schema.space != SpaceKind::Cell) {
        std::array<int, 8> idx{};
        for (int f = 0; f < 8; ++f) idx[f] = choices[k++];
        out.hw = hw_from_option_indices(idx);
    }
    return out;
}

/// Inverse of decode for the cell part: decisions that reproduce `cell` exactly
/// (the cell must fit in schema.max_nodes; OUTPUT maps to the schema's last node).
inline std::vector<int> encode_cell_decisions(const DecisionSchema& schema, const CellSpec& cell) {
    if (cell.num_nodes > schema.max_nodes) throw Error("cell has more nodes than the schema allows");
    const int n = schema.max_nodes;
    auto place = [&](int node) { return node == cell.num_nodes - 1 ? n - 1 : node; };
    CellSpec wide;
    wide.num_nodes = n;
    for (int i = 0; i < cell.num_nodes; ++i)
        for (int j = i + 1; j < cell.num_nodes; ++j)
            if (cell.has_edge(i, j)) wide.set_edge(place(i), place(j));
    for (int v = 1; v + 1 < cell.num_nodes; ++v) wide.set_op(v, cell.op(v));
    std::vector<int> out;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) out.push_back(wide.has_edge(i, j));
    for (int v = 1; v + 1 < n; ++v) out.push_back(static_cast<int>(wide.op(v)));
    return out;
}

inline std::vector<int> encode_hw_decisions(const HwConfig& hw) {
    const auto idx = hw_option_indices(hw);
    return {idx.begin(), idx.end()};
}

// ---------------------------------------------------------------------------
// Canonical text encoding: `cell=<21 edge bits>:<5 op digits> hw=<8 values>`
// ---------------------------------------------------------------------------

/// Lays a cell out on the 7-node grid used by the text encoding.
inline CellSpec widen_cell(const CellSpec& cell) {
    const DecisionSchema s = decision_schema(SpaceKind::Cell, kMaxNodes);
    const auto d = encode_cell_decisions(s, cell);
    return *decode(s, d).raw_cell;
}

inline std::string format_ratio(double r) {
    if (r == 1.0) return "1";
    std::ostringstream out;
    out << r;
    return out.str();
}

inline std::string encode_cell_text(const CellSpec& cell) {
    const CellSpec wide = widen_cell(cell);
    std::string s;
    s.reserve(kMaxEdgeSlots + 1 + kMaxInterior);
    for (int i = 0; i < kMaxNodes; ++i)
        for (int j = i + 1; j < kMaxNodes; ++j) s.push_back(wide.has_edge(i, j) ? '1' : '0');
    s.push_back(':');
    for (int v = 1; v <= kMaxInterior; ++v) s.push_back(static_cast<char>('0' + static_cast<int>(wide.op(v))));
    return s;
}

inline std::string encode_hw_text(const HwConfig& hw) {
    std::ostringstream out;
    out << hw.filter_par << ',' << hw.pixel_par << ',' << hw.input_buffer_depth << ',' << hw.weights_buffer_depth
        << ',' << hw.output_buffer_depth << ',' << hw.mem_interface_width << ',' << (hw.pool_en ? 1 : 0) << ','
        << format_ratio(hw.ratio_conv_engines);
    return out.str();
}

inline std::string encode_point(const SearchPoint& p) {
    return "cell=" + encode_cell_text(p.cell) + " hw=" + encode_hw_text(p.hw);
}

/// Parses the cell half; returns the raw 7-node cell (not yet validated).
inline CellSpec parse_cell_text(std::string_view text) {
    if (text.size() != static_cast<std::size_t>(kMaxEdgeSlots + 1 + kMaxInterior) || text[kMaxEdgeSlots] != ':')
        throw ParseError("cell encoding must be 21 bits, ':' and 5 op digits");
    CellSpec c;
    c.num_nodes = kMaxNodes;
    int k = 0;
    for (int i = 0; i < kMaxNodes; ++i)
        for (int j = i + 1; j < kMaxNodes; ++j) {
            const char ch = text[k++];
            if (ch != '0' && ch != '1') throw ParseError("cell edge bits must be 0 or 1");
            c.set_edge(i, j, ch == '1');
        }
    for (int v = 1; v <= kMaxInterior; ++v) {
        const char ch = text[kMaxEdgeSlots + v];
        if (ch < '0' || ch > '2') throw ParseError("cell op digits must be 0, 1 or 2");
        c.set_op(v, static_cast<CellOp>(ch - '0'));
    }
    return c;
}

inline HwConfig parse_hw_text(std::string_view text) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : text) {
        if (ch == ',') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    parts.push_back(cur);
    if (parts.size() != 8) throw ParseError("hw encoding needs 8 comma-separated values");
    auto to_int = [](const std::string& s) {
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(s, &used);
        } catch (const std::exception&) {
            throw ParseError("bad integer '" + s + "' in hw encoding");
        }
        if (used != s.size()) throw ParseError("bad integer '" + s + "' in hw encoding");
        return v;
    };
    HwConfig hw;
    hw.filter_par = to_int(parts[0]);
    hw.pixel_par = to_int(parts[1]);
    hw.input_buffer_depth = to_int(parts[2]);
    hw.weights_buffer_depth = to_int(parts[3]);
    hw.output_buffer_depth = to_int(parts[4]);
    hw.mem_interface_width = to_int(parts[5]);
    const int pool = to_int(parts[6]);
    if (pool != 0 && pool != 1) throw ParseError("pool_en must be 0 or 1");
    hw.pool_en = pool == 1;
    hw.ratio_conv_engines = -1.0;
    for (double r : kRatioOptions)
        if (format_ratio(r) == parts[7]) hw.ratio_conv_engines = r;
    if (!is_valid_hw(hw)) throw ParseError("hw encoding has a value outside its option set");
    return hw;
}

/// A parsed point before cell validation.
struct RawPoint {
    CellSpec cell;
    HwConfig hw;
};

inline RawPoint parse_point_raw(std::string_view text) {
    const auto space = text.find(' ');
    if (space == std::string_view::npos) throw ParseError("point encoding needs 'cell=... hw=...'");
    auto cell_part = text.substr(0, space);
    auto hw_part = text.substr(space + 1);
    while (!hw_part.empty() && hw_part.front() == ' ') hw_part.remove_prefix(1);
    while (!hw_part.empty() && (hw_part.back() == ' ' || hw_part.back() == '\r' || hw_part.back() == '\n'))
        hw_part.remove_suffix(1);
    if (!cell_part.starts_with("cell=") || !hw_part.starts_with("hw="))
        throw ParseError("point encoding needs 'cell=... hw=...'");
    return {parse_cell_text(cell_part.substr(5)), parse_hw_text(hw_part.substr(3))};
}

/// Parses and canonicalizes; throws ParseError when the cell does not validate.
inline SearchPoint parse_point(std::string_view text) {
    const RawPoint raw = parse_point_raw(text);
    const CellVerdict v = validate_cell(raw.cell);
    if (!v.accepted()) throw ParseError("cell rejected: " + std::string(to_string(v.status)) + " (" + v.reason + ")");
    return {v.cell, raw.hw};
}

} // namespace codesign
