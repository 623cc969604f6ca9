#pragma once

#include "codesign/cell_enum.hpp"
#include "codesign/evaluator.hpp"
#include "codesign/latency_table.hpp"
#include "codesign/search.hpp"

#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace codesign {

/// A run definition read from a flat `key = value` file.
struct ScenarioConfig {
    SearchSettings search;
    std::array<bool, 3> norm_from_sweep{true, true, true};
    std::size_t norm_sweep_points = 1000;

    std::string oracle_backend = "synthetic"; ///< synthetic | table
    std::string oracle_table;
    std::uint64_t oracle_seed = 0;

    SkeletonSpec skeleton;
    std::string calibration_path;
    Calibration calibration;

    std::string latency_source = "synthetic"; ///< synthetic | import
    std::string latency_import;
    bool latency_fallback = false;

    std::uint64_t seed = 0;
    int parallelism = 1;
    std::string output = "run";

    std::optional<std::size_t> pareto_cells = 500; ///< nullopt: every cell up to pareto_max_nodes
    std::optional<std::size_t> pareto_hw;          ///< nullopt: all 8640 configs
    int pareto_max_nodes = kMaxNodes;

    /// Command-line overrides keep the derived fields in step.
    void set_seed(std::uint64_t s) {
        seed = s;
        search.seed = s;
    }
    void set_parallelism(int p) {
        if (p < 1) throw ConfigError("parallelism", "must be >= 1");
        parallelism = p;
        search.parallelism = p;
    }
};

namespace detail {

inline std::string resolve_path(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) return p;
    const std::filesystem::path path(p);
    return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

inline std::optional<std::size_t> count_or_all(const KeyValueFile& kv, const std::string& key, std::optional<std::size_t> fallback) {
    const auto v = kv.get(key);
    if (!v) return fallback;
    if (*v == "all") return std::nullopt;
    const long long n = kv.get_int(key, 0);
    if (n < 0) throw ConfigError(key, "must be >= 0 or 'all'", kv.line_of(key));
    return static_cast<std::size_t>(n);
}

inline std::size_t non_negative(const KeyValueFile& kv, const std::string& key, std::size_t fallback) {
    const long long n = kv.get_int(key, static_cast<long long>(fallback));
    if (n < 0) throw ConfigError(key, "must be >= 0", kv.line_of(key));
    return static_cast<std::size_t>(n);
}

/// `t1:b1, t2:b2, ...`
inline std::vector<ThresholdRamp::Stage> parse_ramp(const std::string& text, std::size_t line) {
    std::vector<ThresholdRamp::Stage> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        const std::string item(KeyValueFile::trim(part));
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError("ramp.schedule", "expected threshold:budget pairs", line);
        try {
            std::size_t used = 0;
            const std::string t = item.substr(0, colon), b = item.substr(colon + 1);
            ThresholdRamp::Stage st;
            st.threshold = std::stod(t, &used);
            if (used != t.size()) throw std::invalid_argument(t);
            const long long budget = std::stoll(b, &used);
            if (used != b.size() || budget <= 0) throw std::invalid_argument(b);
            st.budget = static_cast<std::size_t>(budget);
            out.push_back(st);
        } catch (const std::exception&) {
            throw ConfigError("ramp.schedule", "bad stage '" + item + "'", line);
        }
    }
    try {
        ThresholdRamp check(out);
    } catch (const ConfigError& e) {
        throw ConfigError("ramp.schedule", e.what(), line);
    }
    return out;
}

} // namespace detail

/// Parses a scenario. Relative file paths resolve against `base_dir`; unknown keys
/// are errors; referenced files must exist.
inline ScenarioConfig parse_scenario(const KeyValueFile& kv, const std::filesystem::path& base_dir = ".") {
    ScenarioConfig c;
    SearchSettings& s = c.search;
    auto line = [&](const std::string& key) { return kv.line_of(key); };

    s.strategy = kv.has("strategy") ? [&] {
        try {
            return strategy_from_string(*kv.get("strategy"));
        } catch (const ConfigError&) {
            throw ConfigError("strategy", "expected combined, phase or separate", line("strategy"));
        }
    }() : Strategy::Combined;

    s.total_steps = detail::non_negative(kv, "budget.total", 10000);
    if (s.strategy == Strategy::Separate) {
        const std::size_t default_cnn = (s.total_steps * 8333 + 5000) / 10000;
        s.cnn_steps = detail::non_negative(kv, "budget.cnn_steps", default_cnn);
        s.hw_steps = detail::non_negative(kv, "budget.hw_steps", s.total_steps - std::min(s.total_steps, s.cnn_steps));
        if (s.cnn_steps + s.hw_steps != s.total_steps)
            throw ConfigError("budget.total", "budget.cnn_steps + budget.hw_steps must equal budget.total", line("budget.total"));
    } else {
        s.cnn_steps = detail::non_negative(kv, "budget.cnn_steps", 1000);
        s.hw_steps = detail::non_negative(kv, "budget.hw_steps", 200);
    }
    if (s.strategy != Strategy::Combined && (s.cnn_steps == 0 || s.hw_steps == 0))
        throw ConfigError("budget.cnn_steps", "phase budgets must be > 0", line("budget.cnn_steps"));
    s.batch = detail::non_negative(kv, "search.batch", 1);
    if (s.batch < 1) throw ConfigError("search.batch", "must be >= 1", line("search.batch"));
    s.max_nodes = static_cast<int>(kv.get_int("search.max_nodes", kMaxNodes));
    if (s.max_nodes < 2 || s.max_nodes > kMaxNodes) throw ConfigError("search.max_nodes", "must lie in [2,7]", line("search.max_nodes"));
    if (auto hw = kv.get("search.initial_hw")) {
        try {
            s.initial_hw = parse_hw_text(*hw);
        } catch (const ParseError& e) {
            throw ConfigError("search.initial_hw", e.what(), line("search.initial_hw"));
        }
    }

    if (auto w = kv.get_doubles("reward.weights")) {
        if (w->size() != 3)
            throw ConfigError("reward.weights", "expected 3 weights (area, latency, accuracy), got " + std::to_string(w->size()),
                              line("reward.weights"));
        s.reward.weights = {(*w)[0], (*w)[1], (*w)[2]};
    }
    auto threshold = [&](const std::string& key) -> std::optional<double> {
        if (!kv.has(key)) return std::nullopt;
        return kv.get_double(key, 0.0);
    };
    s.reward.max_area = threshold("reward.threshold.area");
    s.reward.max_latency = threshold("reward.threshold.latency");
    s.reward.min_accuracy = threshold("reward.threshold.accuracy");
    s.reward.min_perf_per_area = threshold("reward.threshold.perf_per_area");
    const std::array<std::string, 3> norm_keys{"reward.norm.area", "reward.norm.latency", "reward.norm.accuracy"};
    for (int m = 0; m < 3; ++m) {
        auto b = kv.get_doubles(norm_keys[m]);
        if (!b) continue;
        if (b->size() != 2) throw ConfigError(norm_keys[m], "expected 'lo, hi'", line(norm_keys[m]));
        if (!((*b)[0] < (*b)[1])) throw ConfigError(norm_keys[m], "needs lo < hi", line(norm_keys[m]));
        s.reward.norm[m] = {(*b)[0], (*b)[1]};
        c.norm_from_sweep[m] = false;
    }
    c.norm_sweep_points = detail::non_negative(kv, "reward.norm.sweep_points", 1000);
    if (c.norm_sweep_points < 2) throw ConfigError("reward.norm.sweep_points", "must be >= 2", line("reward.norm.sweep_points"));
    s.reward.punishment_scale = kv.get_double("reward.punishment_scale", 1.0);
    try {
        s.reward.check();
    } catch (const ConfigError& e) {
        throw ConfigError(e.key(), e.what(), line(e.key()));
    }
    if (auto r = kv.get("ramp.schedule")) {
        if (s.reward.min_perf_per_area)
            throw ConfigError("ramp.schedule", "conflicts with reward.threshold.perf_per_area", line("ramp.schedule"));
        s.ramp = RampSpec{detail::parse_ramp(*r, line("ramp.schedule"))};
    }

    ControllerOptions& co = s.controller;
    co.hidden = static_cast<int>(kv.get_int("controller.hidden", co.hidden));
    co.embedding = static_cast<int>(kv.get_int("controller.embedding", co.embedding));
    co.learning_rate = kv.get_double("controller.learning_rate", co.learning_rate);
    co.baseline_decay = kv.get_double("controller.baseline_decay", co.baseline_decay);
    co.entropy_weight = kv.get_double("controller.entropy_weight", co.entropy_weight);
    co.init_scale = kv.get_double("controller.init_scale", co.init_scale);
    co.normalize_advantage = kv.get_bool("controller.normalize_advantage", co.normalize_advantage);
    co.advantage_floor = kv.get_double("controller.advantage_floor", co.advantage_floor);
    try {
        co.check();
    } catch (const ConfigError& e) {
        throw ConfigError(e.key(), e.what(), line(e.key()));
    }

    c.oracle_backend = kv.get_string("oracle.backend", "synthetic");
    if (c.oracle_backend != "synthetic" && c.oracle_backend != "table")
        throw ConfigError("oracle.backend", "expected synthetic or table", line("oracle.backend"));
    c.oracle_table = detail::resolve_path(base_dir, kv.get_string("oracle.table", ""));
    if (c.oracle_backend == "table" && c.oracle_table.empty())
        throw ConfigError("oracle.table", "required when oracle.backend = table", line("oracle.backend"));
    c.oracle_seed = static_cast<std::uint64_t>(kv.get_int("oracle.seed", 0));

    c.skeleton.num_stacks = static_cast<int>(kv.get_int("skeleton.num_stacks", c.skeleton.num_stacks));
    c.skeleton.cells_per_stack = static_cast<int>(kv.get_int("skeleton.cells_per_stack", c.skeleton.cells_per_stack));
    c.skeleton.stem_channels = static_cast<int>(kv.get_int("skeleton.stem_channels", c.skeleton.stem_channels));
    c.skeleton.input_resolution = static_cast<int>(kv.get_int("skeleton.input_resolution", c.skeleton.input_resolution));
    c.skeleton.input_channels = static_cast<int>(kv.get_int("skeleton.input_channels", c.skeleton.input_channels));
    if (!c.skeleton.valid()) throw ConfigError("skeleton", "invalid skeleton dimensions");

    c.calibration_path = detail::resolve_path(base_dir, kv.get_string("calibration", ""));
    c.latency_source = kv.get_string("latency.source", "synthetic");
    if (c.latency_source != "synthetic" && c.latency_source != "import")
        throw ConfigError("latency.source", "expected synthetic or import", line("latency.source"));
    c.latency_import = detail::resolve_path(base_dir, kv.get_string("latency.import", ""));
    if (c.latency_source == "import" && c.latency_import.empty())
        throw ConfigError("latency.import", "required when latency.source = import", line("latency.source"));
    c.latency_fallback = kv.get_bool("latency.fallback", false);

    const long long seed = kv.get_int("seed", 0);
    if (seed < 0) throw ConfigError("seed", "must be >= 0", line("seed"));
    c.set_seed(static_cast<std::uint64_t>(seed));
    const long long par = kv.get_int("parallelism", 1);
    if (par < 1) throw ConfigError("parallelism", "must be >= 1", line("parallelism"));
    c.set_parallelism(static_cast<int>(par));
    c.output = detail::resolve_path(base_dir, kv.get_string("output", "run"));

    c.pareto_cells = detail::count_or_all(kv, "pareto.cells", 500);
    c.pareto_hw = detail::count_or_all(kv, "pareto.hw", std::nullopt);
    if (c.pareto_hw && *c.pareto_hw > static_cast<std::size_t>(kNumHwConfigs))
        throw ConfigError("pareto.hw", "at most 8640", line("pareto.hw"));
    c.pareto_max_nodes = static_cast<int>(kv.get_int("pareto.max_nodes", kMaxNodes));
    if (c.pareto_max_nodes < 2 || c.pareto_max_nodes > kMaxNodes)
        throw ConfigError("pareto.max_nodes", "must lie in [2,7]", line("pareto.max_nodes"));

    for (const auto& key : kv.unused_keys()) throw ConfigError(key, "unknown key", line(key));

    auto must_exist = [&](const std::string& key, const std::string& path) {
        if (!path.empty() && !std::filesystem::exists(path)) throw ConfigError(key, "file not found: " + path, line(key));
    };
    must_exist("calibration", c.calibration_path);
    if (c.oracle_backend == "table") must_exist("oracle.table", c.oracle_table);
    if (c.latency_source == "import") must_exist("latency.import", c.latency_import);
    if (!c.calibration_path.empty()) c.calibration = Calibration::load(c.calibration_path);
    return c;
}

inline ScenarioConfig load_scenario(const std::string& path) {
    const KeyValueFile kv = KeyValueFile::load(path);
    return parse_scenario(kv, std::filesystem::path(path).parent_path());
}

/// The evaluator stack a scenario describes.
struct Runtime {
    std::shared_ptr<const LatencyTable> table;
    std::shared_ptr<const AccuracyOracle> oracle;
    std::unique_ptr<Evaluator> evaluator;
    LatencyTableReport latency_report;
};

inline Runtime make_runtime(const ScenarioConfig& c) {
    Runtime rt;
    LatencySource source = SyntheticSource{c.calibration};
    if (c.latency_source == "import")
        source = ImportSource{c.latency_import, c.latency_fallback ? std::optional<Calibration>(c.calibration) : std::nullopt};
    rt.table = std::make_shared<const LatencyTable>(build_latency_table(c.skeleton, source, kMaxNodes, &rt.latency_report));
    rt.oracle = std::make_shared<const AccuracyOracle>(c.oracle_backend == "table"
                                                           ? AccuracyOracle::from_table(AccuracyTable::load(c.oracle_table))
                                                           : AccuracyOracle::synthetic(c.calibration, c.oracle_seed));
    rt.evaluator = std::make_unique<Evaluator>(rt.table, rt.oracle, Evaluator::Options{c.skeleton, c.calibration, 0});
    return rt;
}

/// Per-metric (min, max) over `count` valid points drawn uniformly from the joint
/// decision space; degenerate ranges are widened so that lo < hi.
inline std::array<NormBounds, 3> sweep_norm_bounds(Evaluator& ev, std::size_t count, std::uint64_t seed,
                                                   int max_nodes = kMaxNodes, int parallelism = 1) {
    const DecisionSchema schema = decision_schema(SpaceKind::Joint, max_nodes);
    std::mt19937_64 rng(seed);
    std::vector<SearchPoint> points;
    const std::size_t max_draws = count * 1000;
    for (std::size_t draw = 0; draw < max_draws && points.size() < count; ++draw) {
        std::vector<int> choices;
        for (const auto& d : schema.decisions) choices.push_back(static_cast<int>(uniform01(rng) * d.options));
        const DecodedPoint p = decode(schema, choices);
        if (p.cell_ok()) points.push_back({p.verdict.cell, *p.hw});
    }
    if (points.empty()) throw Error("normalization sweep found no valid cell");
    const auto metrics = ev.evaluate_batch(points, parallelism);
    std::array<NormBounds, 3> out;
    for (int m = 0; m < 3; ++m) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const Metrics& x : metrics) {
            const double v = m == 0 ? x.area_mm2 : m == 1 ? x.latency_ms : x.accuracy;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (!(lo < hi)) {
            const double pad = std::max(1e-9, std::abs(lo) * 1e-6);
            lo -= pad;
            hi += pad;
        }
        out[m] = {lo, hi};
    }
    return out;
}

/// Fills any normalization bounds the scenario left to the sweep.
inline void resolve_norm_bounds(ScenarioConfig& c, Evaluator& ev) {
    if (!c.norm_from_sweep[0] && !c.norm_from_sweep[1] && !c.norm_from_sweep[2]) return;
    const auto swept = sweep_norm_bounds(ev, c.norm_sweep_points, detail::derive_seed(c.seed, 0x5eed), c.search.max_nodes, c.parallelism);
    for (int m = 0; m < 3; ++m)
        if (c.norm_from_sweep[m]) c.search.reward.norm[m] = swept[m];
}

} // namespace codesign
