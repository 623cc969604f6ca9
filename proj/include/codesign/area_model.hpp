#pragma once

#include "codesign/calibration.hpp"
#include "codesign/design_space.hpp"

#include <cmath>

namespace codesign {

/// FPGA resources of one accelerator component (or of the whole design).
struct ResourceVector {
    double clb = 0.0;
    double dsp = 0.0;
    double bram36 = 0.0;

    /// Relative-area units: a DSP tile is 10 CLBs, a BRAM36 tile 6 CLBs.
    double clb_equivalents() const { return clb + 10.0 * dsp + 6.0 * bram36; }

    ResourceVector& operator+=(const ResourceVector& o) {
        clb += o.clb;
        dsp += o.dsp;
        bram36 += o.bram36;
        return *this;
    }
    friend ResourceVector operator+(ResourceVector a, const ResourceVector& b) { return a += b; }
    friend bool operator==(const ResourceVector&, const ResourceVector&) = default;
};

// Zynq UltraScale+ tile areas.
inline constexpr double kClbTileMm2 = 0.0044;
inline constexpr double kDspTileMm2 = 0.044;
inline constexpr double kBramTileMm2 = 0.026;

inline double area_mm2(const ResourceVector& r) {
    return kClbTileMm2 * r.clb + kDspTileMm2 * r.dsp + kBramTileMm2 * r.bram36;
}

inline double clb_equivalents_to_mm2(double clb_equivalents) { return kClbTileMm2 * clb_equivalents; }

/// DSPs given to each convolution engine. With ratio = 1 there is one general
/// engine; otherwise round(ratio * total) go to the 3x3 engine and the rest to 1x1.
struct EngineSplit {
    int general = 0;
    int conv3x3 = 0;
    int conv1x1 = 0;
};

inline EngineSplit engine_split(const HwConfig& hw) {
    const int total = hw.filter_par * hw.pixel_par;
    EngineSplit s;
    if (!hw.has_dual_engines()) {
        s.general = total;
        return s;
    }
    s.conv3x3 = static_cast<int>(std::lround(hw.ratio_conv_engines * total));
    s.conv1x1 = total - s.conv3x3;
    return s;
}

struct AreaBreakdown {
    ResourceVector conv_engines;
    ResourceVector input_buffer;
    ResourceVector weights_buffer;
    ResourceVector output_buffer;
    ResourceVector pool_engine;
    ResourceVector mem_interface;
    ResourceVector total;
    double mm2 = 0.0;
};

namespace detail {

inline ResourceVector buffer_resources(int depth_words, int lanes, const Calibration& cal) {
    const double bits = static_cast<double>(depth_words) * lanes * cal.word_bits;
    return {cal.buffer_clb, 0.0, std::ceil(bits / cal.bram_bits)};
}

} // namespace detail

/// Component-wise resource and silicon-area estimate.
///
/// - conv engine(s): filter_par * pixel_par DSPs; CLBs = fixed cost per engine + per-DSP cost
/// - buffers: ceil(depth * port_bits / 36864) BRAMs; input and output ports are
///   pixel_par lanes wide, the weights port filter_par lanes
/// - pooling engine: fixed vector, present only when pool_en
/// - memory interface: CLBs linear in the interface width
inline AreaBreakdown area(const HwConfig& hw, const Calibration& cal = {}) {
    AreaBreakdown a;
    const EngineSplit split = engine_split(hw);
    const int engines = hw.has_dual_engines() ? 2 : 1;
    const double dsps = split.general + split.conv3x3 + split.conv1x1;
    a.conv_engines = {engines * cal.conv_clb_fixed + cal.conv_clb_per_dsp * dsps, dsps, 0.0};
    a.input_buffer = detail::buffer_resources(hw.input_buffer_depth, hw.pixel_par, cal);
    a.weights_buffer = detail::buffer_resources(hw.weights_buffer_depth, hw.filter_par, cal);
    a.output_buffer = detail::buffer_resources(hw.output_buffer_depth, hw.pixel_par, cal);
    if (hw.pool_en) a.pool_engine = {cal.pool_clb, 0.0, cal.pool_bram};
    a.mem_interface = {cal.mem_clb_fixed + cal.mem_clb_per_bit * hw.mem_interface_width, 0.0, 0.0};
    a.total = a.conv_engines + a.input_buffer + a.weights_buffer + a.output_buffer + a.pool_engine + a.mem_interface;
    a.mm2 = area_mm2(a.total);
    return a;
}

} // namespace codesign
