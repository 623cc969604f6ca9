#include "support.hpp"

#include <gtest/gtest.h>

#include "codesign/latency.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace codesign;
using namespace testing_support;

namespace {

HwConfig minimum_hw() { return hw_from_index(0); }

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
    const auto p = std::filesystem::temp_directory_path() / ("codesign_hw_" + name);
    std::ofstream(p, std::ios::binary) << content;
    return p;
}

} // namespace

TEST(Area, TileConversion) {
    EXPECT_DOUBLE_EQ(area_mm2({1, 0, 0}), 0.0044);
    EXPECT_NEAR(clb_equivalents_to_mm2(64922), 286.0, 286.0 * 0.002);
    EXPECT_DOUBLE_EQ(area_mm2({0, 1, 0}), 10 * area_mm2({1, 0, 0}));
    EXPECT_NEAR(area_mm2({0, 0, 1}), 6 * area_mm2({1, 0, 0}), 0.001);
    const ResourceVector r{120, 7, 3};
    EXPECT_NEAR(area_mm2(r), clb_equivalents_to_mm2(r.clb_equivalents()), 0.001 * 3);
}

TEST(Area, InputBufferDoublingMatchesBramFormula) {
    const HwConfig lo = minimum_hw();
    HwConfig hi = lo;
    hi.input_buffer_depth *= 2;
    const Calibration cal;
    // 1024 and 2048 words over pixel_par lanes of 16 bits, in 36 Kbit blocks
    const double bram_lo = std::ceil(1024.0 * lo.pixel_par * 16.0 / 36864.0);
    const double bram_hi = std::ceil(2048.0 * lo.pixel_par * 16.0 / 36864.0);
    const double delta = area(hi, cal).mm2 - area(lo, cal).mm2;
    EXPECT_GT(delta, 0.0);
    EXPECT_NEAR(delta, 0.026 * (bram_hi - bram_lo), 1e-12);
}

TEST(Area, AdditiveOverComponents) {
    for (const HwConfig& hw : enumerate_hw()) {
        const auto a = area(hw);
        const auto sum = a.conv_engines + a.input_buffer + a.weights_buffer + a.output_buffer + a.pool_engine + a.mem_interface;
        ASSERT_EQ(sum, a.total);
        ASSERT_DOUBLE_EQ(a.mm2, area_mm2(a.total));
    }
}

TEST(Area, MonotoneInEachSizingParameter) {
    for (const HwConfig& hw : enumerate_hw()) {
        const auto idx = hw_option_indices(hw);
        const double base = area(hw).mm2;
        // filter_par, pixel_par, three buffer depths, memory width
        for (int field : {0, 1, 2, 3, 4, 5}) {
            if (idx[field] + 1 >= kHwOptionCounts[field]) continue;
            auto next = idx;
            ++next[field];
            ASSERT_GE(area(hw_from_option_indices(next)).mm2, base) << encode_hw_text(hw) << " field " << field;
        }
        if (hw.pool_en) {
            HwConfig off = hw;
            off.pool_en = false;
            ASSERT_LE(area(off).mm2, base);
        }
    }
}

TEST(Area, EngineSplitCoversAllDsps) {
    for (const HwConfig& hw : enumerate_hw()) {
        const auto s = engine_split(hw);
        ASSERT_EQ(s.general + s.conv3x3 + s.conv1x1, hw.filter_par * hw.pixel_par);
        if (hw.has_dual_engines()) {
            ASSERT_EQ(s.general, 0);
            ASSERT_GT(s.conv3x3, 0);
            ASSERT_GT(s.conv1x1, 0);
        } else {
            ASSERT_EQ(s.conv3x3 + s.conv1x1, 0);
        }
    }
}

TEST(SyntheticLatency, ZeroWorkLimitIsOverhead) {
    const Calibration cal;
    const SyntheticLatencyModel model(cal);
    const OpVariant v{NetOpKind::Conv1x1, 1, 1, 1, 1};
    const HwConfig hw = minimum_hw();
    // 1 MAC and 6 bytes are negligible next to the fixed cost
    EXPECT_NEAR(model.latency_ms(v, hw), cal.accel_overhead_ms, 1e-6);
}

TEST(SyntheticLatency, DoublingPixelParHalvesComputeBoundConv) {
    const Calibration cal;
    const SyntheticLatencyModel model(cal);
    const OpVariant v{NetOpKind::Conv3x3, 32, 32, 128, 128};
    HwConfig hw = minimum_hw();
    const double t1 = model.latency_ms(v, hw) - cal.accel_overhead_ms;
    hw.pixel_par *= 2;
    const double t2 = model.latency_ms(v, hw) - cal.accel_overhead_ms;
    EXPECT_NEAR(t2 / t1, 0.5, 0.005);
    // closed form: 32*32*128*128*9 MACs over the full 8x8 array at 200 MHz
    EXPECT_NEAR(t2, 32.0 * 32 * 128 * 128 * 9 / (64 * 200e6) * 1e3, 1e-9);
}

TEST(SyntheticLatency, CpuOpsIgnoreAccelerator) {
    const SyntheticLatencyModel model;
    const OpVariant v{NetOpKind::EltwiseAdd, 16, 16, 256, 128};
    EXPECT_EQ(model.latency_ms(v, hw_from_index(0)), model.latency_ms(v, hw_from_index(8639)));
}

TEST(LatencyTable, CoversEveryReachableVariantAndReportsCount) {
    const SkeletonSpec sk;
    LatencyTableReport report;
    const auto table = build_latency_table(sk, SyntheticSource{}, kMaxNodes, &report);
    std::printf("distinct op variants (default skeleton): %zu\n", report.distinct_variants);
    EXPECT_EQ(report.distinct_variants, table.num_variants());
    EXPECT_EQ(report.synthetic_entries, table.num_variants() * kNumLatencyProjections);
    EXPECT_EQ(report.measured_entries, 0u);
    for (const CellSpec& c : sample_cells(200, 3)) {
        for (const NetOp& op : unroll(c, sk).ops) ASSERT_GE(table.variant_id(op.variant), 0);
    }
}

TEST(LatencyTable, LookupMatchesModelAtEveryProjection) {
    const SkeletonSpec sk;
    const Calibration cal;
    const auto table = build_latency_table(sk, SyntheticSource{cal}, 3);
    const SyntheticLatencyModel model(cal);
    for (const HwConfig& hw : enumerate_hw()) {
        const OpVariant& v = table.variant(static_cast<int>(hw_index(hw) % table.num_variants()));
        ASSERT_EQ(table.lookup(v, hw), model.latency_ms(v, hw));
    }
}

TEST(LatencyTable, CsvRoundTripThroughImport) {
    const SkeletonSpec sk;
    const auto table = build_latency_table(sk, SyntheticSource{}, 3);
    std::ostringstream out;
    write_latency_csv(out, table);
    const auto path = temp_file("roundtrip.csv", out.str());
    LatencyTableReport report;
    const auto imported = build_latency_table(sk, ImportSource{path.string(), std::nullopt}, 3, &report);
    EXPECT_EQ(report.measured_entries, table.num_variants() * kNumLatencyProjections);
    EXPECT_EQ(report.synthetic_entries, 0u);
    for (std::size_t id = 0; id < table.num_variants(); ++id)
        for (int p = 0; p < kNumLatencyProjections; ++p) {
            const int other = imported.variant_id(table.variant(static_cast<int>(id)));
            ASSERT_EQ(imported.lookup(other, p), table.lookup(static_cast<int>(id), p));
        }
    std::filesystem::remove(path);
}

TEST(LatencyTable, MissingEntriesWithoutFallbackAreCoverageGaps) {
    const auto path = temp_file("header_only.csv", std::string(kLatencyCsvHeader) + "\n");
    EXPECT_THROW(build_latency_table(SkeletonSpec{}, ImportSource{path.string(), std::nullopt}, 3), CoverageGap);
    LatencyTableReport report;
    const auto filled = build_latency_table(SkeletonSpec{}, ImportSource{path.string(), Calibration{}}, 3, &report);
    EXPECT_EQ(report.measured_entries, 0u);
    EXPECT_EQ(report.synthetic_entries, filled.num_variants() * kNumLatencyProjections);
    std::filesystem::remove(path);
}

TEST(LatencyTable, ImportOverridesAndFlagsProvenance) {
    const std::string row = "CONV3X3,32,32,128,128,8,4,256,1,0,7.5\n";
    const auto path = temp_file("one_row.csv", std::string(kLatencyCsvHeader) + "\n" + row);
    const auto t = build_latency_table(SkeletonSpec{}, ImportSource{path.string(), Calibration{}}, 3);
    const OpVariant v{NetOpKind::Conv3x3, 32, 32, 128, 128};
    EXPECT_EQ(t.lookup(v, minimum_hw()), 7.5);
    EXPECT_EQ(t.provenance(t.variant_id(v), latency_projection(minimum_hw())), Provenance::MeasuredImport);
    std::filesystem::remove(path);
}

TEST(LatencyTable, MalformedImports) {
    const std::string h = std::string(kLatencyCsvHeader) + "\n";
    const std::string good = "CONV3X3,32,32,128,128,8,4,256,1,0,7.5\n";
    for (const std::string& body : {std::string("kind,h\n"), h + good + good, h + "CONV3X3,32,32,128,128,8,4,256,1,0\n",
                                     h + "CONV3X3,32,32,128,128,8,5,256,1,0,7.5\n", h + "CONV3X3,32,32,128,128,8,4,256,1,0,-1\n",
                                     h + "conv9x9,32,32,128,128,8,4,256,1,0,7.5\n", h + "CONV3X3,32,x,128,128,8,4,256,1,0,7.5\n"}) {
        const auto path = temp_file("bad.csv", body);
        EXPECT_THROW(build_latency_table(SkeletonSpec{}, ImportSource{path.string(), Calibration{}}, 3), ParseError) << body;
    }
    EXPECT_THROW(build_latency_table(SkeletonSpec{}, ImportSource{"/nonexistent/latency.csv", std::nullopt}, 3), ParseError);
}

TEST(LatencyTable, UnknownVariantWithoutFallbackRaises) {
    LatencyTable t;
    t.add_variant(OpVariant{NetOpKind::Conv3x3, 8, 8, 4, 4});
    EXPECT_THROW(t.lookup(0, 0), CoverageGap);
    EXPECT_THROW(t.lookup(OpVariant{NetOpKind::Conv1x1, 8, 8, 4, 4}, minimum_hw()), CoverageGap);
}

TEST(NetworkLatency, DeterministicAndMonotoneInCriticalPathOps) {
    const SkeletonSpec sk;
    const auto table = build_latency_table(sk, SyntheticSource{}, 4);
    const auto a = make_cell(3, {{0, 1}, {1, 2}}, {CellOp::Conv3x3});
    const auto b = make_cell(4, {{0, 1}, {1, 2}, {2, 3}}, {CellOp::Conv3x3, CellOp::Conv3x3});
    for (const HwConfig& hw : enumerate_hw()) {
        const double la = latency(a, sk, hw, table);
        ASSERT_EQ(la, latency(a, sk, hw, table));
        ASSERT_GE(latency(b, sk, hw, table), la);
    }
}

TEST(NetworkLatency, MoreParallelismIsFasterOnConvHeavyCell) {
    const SkeletonSpec sk;
    const auto table = build_latency_table(sk, SyntheticSource{}, 5);
    const auto cell = make_cell(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}}, {CellOp::Conv3x3, CellOp::Conv3x3, CellOp::Conv3x3});
    HwConfig big = minimum_hw();
    big.filter_par = 16;
    big.pixel_par = 64;
    big.mem_interface_width = 512;
    EXPECT_LT(latency(cell, sk, big, table), latency(cell, sk, minimum_hw(), table));
}

TEST(NetworkLatency, ProjectionFactorsOutBuffers) {
    const SkeletonSpec sk;
    const auto table = build_latency_table(sk, SyntheticSource{}, 4);
    const auto net = compile_network(make_cell(4, {{0, 1}, {0, 2}, {1, 3}, {2, 3}}, {CellOp::Conv3x3, CellOp::Conv1x1}), sk, table);
    const auto by_projection = latency_by_projection(net, table);
    for (const HwConfig& hw : enumerate_hw()) ASSERT_EQ(latency(net, hw, table), by_projection[latency_projection(hw)]);
}
