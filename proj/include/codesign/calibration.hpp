#pragma once

#include "codesign/kv_file.hpp"

#include <string>

namespace codesign {

/// Every tunable constant of the surrogate models. Defaults are documented
/// estimates; a calibration file can replace any subset of them.
struct Calibration {
    // latency model
    double f_clk_mhz = 200.0;          ///< accelerator clock
    double f_mem_mhz = 200.0;          ///< memory interface clock
    double cpu_bandwidth_gbps = 1.0;   ///< effective CPU streaming bandwidth (GB/s)
    double cpu_overhead_ms = 0.05;     ///< fixed cost of dispatching an op to the CPU
    double accel_overhead_ms = 0.02;   ///< fixed cost of one accelerator invocation
    double bytes_per_word = 2.0;       ///< activation / weight element size

    // area model
    double word_bits = 16.0;           ///< buffer port bits per parallel lane
    double bram_bits = 36864.0;        ///< bits per BRAM36 block
    double conv_clb_fixed = 2000.0;    ///< control + sliding window per conv engine
    double conv_clb_per_dsp = 20.0;    ///< accumulation / routing logic per MAC lane
    double buffer_clb = 150.0;         ///< address generation per buffer
    double pool_clb = 3000.0;
    double pool_bram = 8.0;
    double mem_clb_fixed = 1500.0;
    double mem_clb_per_bit = 8.0;

    // synthetic accuracy surrogate
    double acc_bias = -0.8;
    double acc_depth = 0.45;
    double acc_conv3x3 = 0.35;
    double acc_conv1x1 = 0.15;
    double acc_pool = 0.1;
    double acc_noise_std = 0.004;

    static Calibration from_kv(const KeyValueFile& kv) {
        Calibration c;
        c.f_clk_mhz = kv.get_double("f_clk_mhz", c.f_clk_mhz);
        c.f_mem_mhz = kv.get_double("f_mem_mhz", c.f_mem_mhz);
        c.cpu_bandwidth_gbps = kv.get_double("cpu_bandwidth_gbps", c.cpu_bandwidth_gbps);
        c.cpu_overhead_ms = kv.get_double("cpu_overhead_ms", c.cpu_overhead_ms);
        c.accel_overhead_ms = kv.get_double("accel_overhead_ms", c.accel_overhead_ms);
        c.bytes_per_word = kv.get_double("bytes_per_word", c.bytes_per_word);
        c.word_bits = kv.get_double("area.word_bits", c.word_bits);
        c.bram_bits = kv.get_double("area.bram_bits", c.bram_bits);
        c.conv_clb_fixed = kv.get_double("area.conv_clb_fixed", c.conv_clb_fixed);
        c.conv_clb_per_dsp = kv.get_double("area.conv_clb_per_dsp", c.conv_clb_per_dsp);
        c.buffer_clb = kv.get_double("area.buffer_clb", c.buffer_clb);
        c.pool_clb = kv.get_double("area.pool_clb", c.pool_clb);
        c.pool_bram = kv.get_double("area.pool_bram", c.pool_bram);
        c.mem_clb_fixed = kv.get_double("area.mem_clb_fixed", c.mem_clb_fixed);
        c.mem_clb_per_bit = kv.get_double("area.mem_clb_per_bit", c.mem_clb_per_bit);
        c.acc_bias = kv.get_double("acc.bias", c.acc_bias);
        c.acc_depth = kv.get_double("acc.depth", c.acc_depth);
        c.acc_conv3x3 = kv.get_double("acc.conv3x3", c.acc_conv3x3);
        c.acc_conv1x1 = kv.get_double("acc.conv1x1", c.acc_conv1x1);
        c.acc_pool = kv.get_double("acc.pool", c.acc_pool);
        c.acc_noise_std = kv.get_double("acc.noise_std", c.acc_noise_std);
        for (const auto& key : kv.unused_keys()) throw ConfigError(key, "unknown calibration key", kv.line_of(key));
        c.check();
        return c;
    }

    static Calibration load(const std::string& path) { return from_kv(KeyValueFile::load(path)); }

    void check() const {
        auto positive = [](const char* key, double v) {
            if (!(v > 0.0)) throw ConfigError(key, "must be > 0");
        };
        auto non_negative = [](const char* key, double v) {
            if (!(v >= 0.0)) throw ConfigError(key, "must be >= 0");
        };
        positive("f_clk_mhz", f_clk_mhz);
        positive("f_mem_mhz", f_mem_mhz);
        positive("cpu_bandwidth_gbps", cpu_bandwidth_gbps);
        positive("cpu_overhead_ms", cpu_overhead_ms);
        positive("accel_overhead_ms", accel_overhead_ms);
        positive("bytes_per_word", bytes_per_word);
        positive("area.word_bits", word_bits);
        positive("area.bram_bits", bram_bits);
        non_negative("area.conv_clb_fixed", conv_clb_fixed);
        non_negative("area.conv_clb_per_dsp", conv_clb_per_dsp);
        non_negative("area.buffer_clb", buffer_clb);
        non_negative("area.pool_clb", pool_clb);
        non_negative("area.pool_bram", pool_bram);
        non_negative("area.mem_clb_fixed", mem_clb_fixed);
        non_negative("area.mem_clb_per_bit", mem_clb_per_bit);
        non_negative("acc.noise_std", acc_noise_std);
    }
};

} // namespace codesign
