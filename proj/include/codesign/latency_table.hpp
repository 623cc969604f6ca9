#pragma once

#include "codesign/area_model.hpp"
#include "codesign/calibration.hpp"
#include "codesign/cell_enum.hpp"
#include "codesign/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <variant>
#include <vector>

namespace codesign {

/// Roofline latency estimate for one op on the unit it is assigned to:
///
///   accelerator: overhead + max(work / (lanes * f_clk), bytes / (mem_width/8 * f_mem))
///   CPU:         overhead + bytes / cpu_bandwidth
///
/// where lanes is the DSP count of the convolution engine running the op (the
/// whole filter_par * pixel_par array when ratio = 1) or pixel_par for the
/// pooling engine.
class SyntheticLatencyModel {
public:
    explicit SyntheticLatencyModel(Calibration cal = {}) : cal_(cal) {}

    const Calibration& calibration() const { return cal_; }

    static double macs(const OpVariant& v) {
        const double k = v.kernel();
        return static_cast<double>(v.out_height()) * v.out_width() * v.out_channels * v.in_channels * k * k;
    }

    double bytes_moved(const OpVariant& v) const {
        const double in = static_cast<double>(v.height) * v.width * v.in_channels;
        const double out = static_cast<double>(v.out_height()) * v.out_width() * v.out_channels;
        double weights = 0.0;
        if (v.kind == NetOpKind::Conv3x3 || v.kind == NetOpKind::Conv1x1 || v.kind == NetOpKind::StemConv) {
            const double k = v.kernel();
            weights = k * k * v.in_channels * v.out_channels;
        }
        return (in + out + weights) * cal_.bytes_per_word;
    }

    double latency_ms(const OpVariant& v, const HwConfig& hw) const {
        const ExecUnit unit = unit_for(v.kind, hw);
        if (unit == ExecUnit::Cpu) return cal_.cpu_overhead_ms + bytes_moved(v) / (cal_.cpu_bandwidth_gbps * 1e9) * 1e3;
        double lanes = 0.0;
        double work = 0.0;
        const EngineSplit split = engine_split(hw);
        switch (unit) {
        case ExecUnit::ConvGeneral: lanes = split.general; break;
        case ExecUnit::Conv3x3: lanes = split.conv3x3; break;
        case ExecUnit::Conv1x1: lanes = split.conv1x1; break;
        default: lanes = hw.pixel_par; break;
        }
        if (unit == ExecUnit::PoolEngine) {
            const double k = v.kernel();
            work = static_cast<double>(v.out_height()) * v.out_width() * v.out_channels * k * k;
        } else {
            work = macs(v);
        }
        const double compute_s = work / (lanes * cal_.f_clk_mhz * 1e6);
        const double memory_s = bytes_moved(v) / (hw.mem_interface_width / 8.0 * cal_.f_mem_mhz * 1e6);
        return cal_.accel_overhead_ms + std::max(compute_s, memory_s) * 1e3;
    }

private:
    Calibration cal_;
};

enum class Provenance : std::uint8_t { MeasuredImport, Synthetic };

/// Every op variant any valid cell (up to `max_nodes`) can produce inside the skeleton,
/// including the skeleton's own stem and downsampling ops. Sorted, unique.
inline std::vector<OpVariant> reachable_variants(const SkeletonSpec& sk, int max_nodes = kMaxNodes,
                                                 int max_edges = kMaxEdges) {
    if (!sk.valid()) throw Error("invalid skeleton");
    std::set<OpVariant> found;
    std::set<std::tuple<int, int, int>> slots; // (resolution, in channels, out channels)
    int res = sk.input_resolution;
    int channels = sk.stem_channels;
    found.insert(OpVariant{NetOpKind::StemConv, res, res, sk.input_channels, channels});
    for (int stack = 0; stack < sk.num_stacks; ++stack) {
        int in_ch = channels;
        if (stack > 0) {
            found.insert(OpVariant{NetOpKind::Downsample, res, res, channels, channels});
            res /= 2;
            channels *= 2;
        }
        for (int c = 0; c < sk.cells_per_stack; ++c) {
            slots.insert({res, in_ch, channels});
            in_ch = channels;
        }
    }
    // Interior labels never change channels or structure, so expand the all-3x3
    // labelling and add the other two op kinds for each interior op shape.
    auto emit = [&](const OpVariant& v, const std::vector<int>&) {
        found.insert(v);
        if (v.kind == NetOpKind::Conv3x3) {
            found.insert(OpVariant{NetOpKind::Conv1x1, v.height, v.width, v.in_channels, v.out_channels});
            found.insert(OpVariant{NetOpKind::MaxPool3x3, v.height, v.width, v.in_channels, v.out_channels});
        }
        return 0;
    };
    for (int n = 2; n <= max_nodes; ++n)
        for_each_connected_matrix(n, max_edges, [&](const CellSpec& shape) {
            for (const auto& [r, in, out] : slots) expand_cell(shape, r, in, out, 0, emit);
        });
    return {found.begin(), found.end()};
}

/// Latency lookup table keyed by (op variant, latency projection of the hw config).
/// Immutable after construction. Queries for missing entries fall back to the
/// synthetic model when one is attached and raise CoverageGap otherwise.
class LatencyTable {
public:
    LatencyTable() = default;

    /// Registers a variant (idempotent) and returns its dense id.
    int add_variant(const OpVariant& v) {
        auto [it, inserted] = ids_.try_emplace(v, static_cast<int>(variants_.size()));
        if (inserted) {
            variants_.push_back(v);
            values_.resize(values_.size() + kNumLatencyProjections, std::numeric_limits<double>::quiet_NaN());
            provenance_.resize(values_.size(), Provenance::Synthetic);
        }
        return it->second;
    }

    void set(int id, int projection, double latency_ms, Provenance p) {
        if (!(latency_ms > 0.0) || !std::isfinite(latency_ms)) throw Error("latency entries must be finite and > 0");
        values_[index(id, projection)] = latency_ms;
        provenance_[index(id, projection)] = p;
    }

    void set_fallback(std::optional<SyntheticLatencyModel> model) { fallback_ = std::move(model); }
    const std::optional<SyntheticLatencyModel>& fallback() const { return fallback_; }

    /// Dense id of a variant, or -1 if the table has never seen it.
    int variant_id(const OpVariant& v) const {
        auto it = ids_.find(v);
        return it == ids_.end() ? -1 : it->second;
    }

    const OpVariant& variant(int id) const { return variants_.at(id); }
    std::size_t num_variants() const { return variants_.size(); }

    bool has_entry(int id, int projection) const {
        return id >= 0 && !std::isnan(values_[index(id, projection)]);
    }

    Provenance provenance(int id, int projection) const { return provenance_[index(id, projection)]; }

    std::size_t num_entries() const {
        return static_cast<std::size_t>(std::count_if(values_.begin(), values_.end(), [](double x) { return !std::isnan(x); }));
    }

    std::size_t num_entries(Provenance p) const {
        std::size_t n = 0;
        for (std::size_t i = 0; i < values_.size(); ++i) n += !std::isnan(values_[i]) && provenance_[i] == p;
        return n;
    }

    double lookup(int id, int projection) const {
        if (id >= 0) {
            const double v = values_[index(id, projection)];
            if (!std::isnan(v)) return v;
            if (fallback_) return fallback_->latency_ms(variants_[id], hw_from_projection(projection));
            throw gap(variants_[id], projection);
        }
        throw Error("unknown variant id");
    }

    double lookup(const OpVariant& v, const HwConfig& hw) const {
        const int id = variant_id(v);
        const int projection = latency_projection(hw);
        if (id >= 0) return lookup(id, projection);
        if (fallback_) return fallback_->latency_ms(v, hw);
        throw gap(v, projection);
    }

private:
    static std::size_t index(int id, int projection) {
        return static_cast<std::size_t>(id) * kNumLatencyProjections + static_cast<std::size_t>(projection);
    }

    static CoverageGap gap(const OpVariant& v, int projection) {
        const HwConfig hw = hw_from_projection(projection);
        std::ostringstream msg;
        msg << "no latency entry for " << to_string(v.kind) << ' ' << v.height << 'x' << v.width << ' ' << v.in_channels
            << "->" << v.out_channels << " at filter_par=" << hw.filter_par << " pixel_par=" << hw.pixel_par
            << " mem_width=" << hw.mem_interface_width << " ratio=" << format_ratio(hw.ratio_conv_engines)
            << " pool_en=" << hw.pool_en;
        return CoverageGap(msg.str());
    }

    std::unordered_map<OpVariant, int, OpVariantHash> ids_;
    std::vector<OpVariant> variants_;
    std::vector<double> values_;
    std::vector<Provenance> provenance_;
    std::optional<SyntheticLatencyModel> fallback_;
};

// ---------------------------------------------------------------------------
// Import / export: kind,h,w,cin,cout,filter_par,pixel_par,mem_width,ratio,pool_en,latency_ms
// ---------------------------------------------------------------------------

inline constexpr std::string_view kLatencyCsvHeader = "kind,h,w,cin,cout,filter_par,pixel_par,mem_width,ratio,pool_en,latency_ms";

struct LatencyCsvRow {
    OpVariant variant;
    HwConfig hw; ///< buffers left at their minimum; only the projection matters
    double latency_ms = 0.0;
};

inline std::vector<LatencyCsvRow> parse_latency_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    std::vector<LatencyCsvRow> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (KeyValueFile::trim(line).empty()) continue;
        if (!header) {
            if (line != kLatencyCsvHeader) throw ParseError("expected header '" + std::string(kLatencyCsvHeader) + "'", line_no);
            header = true;
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(std::string(KeyValueFile::trim(cell)));
        if (f.size() != 11) throw ParseError("expected 11 fields, got " + std::to_string(f.size()), line_no);
        try {
            LatencyCsvRow r;
            r.variant.kind = net_op_kind_from_string(f[0]);
            r.variant.height = std::stoi(f[1]);
            r.variant.width = std::stoi(f[2]);
            r.variant.in_channels = std::stoi(f[3]);
            r.variant.out_channels = std::stoi(f[4]);
            r.hw.filter_par = std::stoi(f[5]);
            r.hw.pixel_par = std::stoi(f[6]);
            r.hw.mem_interface_width = std::stoi(f[7]);
            r.hw.ratio_conv_engines = -1.0;
            const double ratio = std::stod(f[8]);
            for (double opt : kRatioOptions)
                if (std::abs(opt - ratio) < 1e-9) r.hw.ratio_conv_engines = opt;
            const int pool = std::stoi(f[9]);
            if (pool != 0 && pool != 1) throw ParseError("pool_en must be 0 or 1", line_no);
            r.hw.pool_en = pool == 1;
            r.latency_ms = std::stod(f[10]);
            if (!is_valid_hw(r.hw)) throw ParseError("hw fields outside their option sets", line_no);
            if (r.variant.height <= 0 || r.variant.width <= 0 || r.variant.in_channels <= 0 || r.variant.out_channels <= 0)
                throw ParseError("dimensions must be positive", line_no);
            if (!(r.latency_ms > 0.0) || !std::isfinite(r.latency_ms)) throw ParseError("latency_ms must be > 0", line_no);
            rows.push_back(r);
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception& e) {
            throw ParseError(std::string("bad number: ") + e.what(), line_no);
        }
    }
    if (!header) throw ParseError("missing header line");
    return rows;
}

/// Writes every explicit entry (synthetic or imported) in variant-id, projection order.
inline void write_latency_csv(std::ostream& out, const LatencyTable& table) {
    out << kLatencyCsvHeader << '\n';
    out.precision(17);
    for (std::size_t id = 0; id < table.num_variants(); ++id) {
        const OpVariant& v = table.variant(static_cast<int>(id));
        for (int p = 0; p < kNumLatencyProjections; ++p) {
            if (!table.has_entry(static_cast<int>(id), p)) continue;
            const HwConfig hw = hw_from_projection(p);
            out << to_string(v.kind) << ',' << v.height << ',' << v.width << ',' << v.in_channels << ',' << v.out_channels
                << ',' << hw.filter_par << ',' << hw.pixel_par << ',' << hw.mem_interface_width << ','
                << format_ratio(hw.ratio_conv_engines) << ',' << (hw.pool_en ? 1 : 0) << ','
                << table.lookup(static_cast<int>(id), p) << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// Table construction
// ---------------------------------------------------------------------------

struct SyntheticSource {
    Calibration calibration;
};

struct ImportSource {
    std::string path;
    /// Fill entries the import lacks from this model; without it gaps are errors.
    std::optional<Calibration> fallback;
};

using LatencySource = std::variant<SyntheticSource, ImportSource>;

struct LatencyTableReport {
    std::size_t distinct_variants = 0;
    std::size_t measured_entries = 0;
    std::size_t synthetic_entries = 0;
};

/// Builds a table covering every variant reachable from valid cells (up to
/// `max_nodes`) under the skeleton, for all 240 latency projections.
inline LatencyTable build_latency_table(const SkeletonSpec& sk, const LatencySource& source, int max_nodes = kMaxNodes,
                                        LatencyTableReport* report = nullptr) {
    const auto variants = reachable_variants(sk, max_nodes);
    LatencyTable table;
    for (const auto& v : variants) table.add_variant(v);

    if (const auto* syn = std::get_if<SyntheticSource>(&source)) {
        const SyntheticLatencyModel model(syn->calibration);
        for (std::size_t id = 0; id < variants.size(); ++id)
            for (int p = 0; p < kNumLatencyProjections; ++p)
                table.set(static_cast<int>(id), p, model.latency_ms(variants[id], hw_from_projection(p)), Provenance::Synthetic);
        table.set_fallback(model);
    } else {
        const auto& imp = std::get<ImportSource>(source);
        std::ifstream in(imp.path);
        if (!in) throw ParseError("cannot open latency import '" + imp.path + "'");
        std::set<std::pair<int, int>> seen;
        for (const auto& row : parse_latency_csv(in)) {
            const int id = table.add_variant(row.variant);
            const int p = latency_projection(row.hw);
            if (!seen.insert({id, p}).second) throw ParseError("duplicate latency entry for " + std::string(to_string(row.variant.kind)));
            table.set(id, p, row.latency_ms, Provenance::MeasuredImport);
        }
        std::optional<SyntheticLatencyModel> model;
        if (imp.fallback) model.emplace(*imp.fallback);
        for (std::size_t id = 0; id < variants.size(); ++id)
            for (int p = 0; p < kNumLatencyProjections; ++p) {
                if (table.has_entry(static_cast<int>(id), p)) continue;
                if (!model) {
                    table.lookup(static_cast<int>(id), p); // throws CoverageGap with details
                }
                table.set(static_cast<int>(id), p, model->latency_ms(variants[id], hw_from_projection(p)), Provenance::Synthetic);
            }
        table.set_fallback(model);
    }
    if (report) {
        report->distinct_variants = variants.size();
        report->measured_entries = table.num_entries(Provenance::MeasuredImport);
        report->synthetic_entries = table.num_entries(Provenance::Synthetic);
    }
    return table;
}

} // namespace codesign
