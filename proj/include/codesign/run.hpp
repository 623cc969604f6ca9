#pragma once

#include "codesign/config.hpp"
#include "codesign/pareto.hpp"
#include "codesign/search.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace codesign {

inline constexpr int kStepLogVersion = 1;

/// One JSONL line per step; field order is fixed so identical runs give identical bytes.
inline std::string step_json(const StepRecord& r) {
    nlohmann::ordered_json j;
    j["v"] = kStepLogVersion;
    j["step"] = r.step;
    j["phase"] = std::string(to_string(r.phase));
    j["point"] = encode_point(r.point);
    if (r.valid) {
        j["area_mm2"] = r.metrics.area_mm2;
        j["latency_ms"] = r.metrics.latency_ms;
        j["accuracy"] = r.metrics.accuracy;
    } else {
        j["area_mm2"] = nullptr;
        j["latency_ms"] = nullptr;
        j["accuracy"] = nullptr;
    }
    j["reward"] = r.outcome.value;
    j["feasible"] = r.outcome.feasible;
    j["cache_hit"] = r.cache_hit;
    return j.dump();
}

/// Inverse of step_json. The point is kept verbatim (raw cells may not validate).
struct LoggedStep {
    std::uint64_t step = 0;
    std::string phase;
    std::string point;
    std::optional<Metrics> metrics;
    double reward = 0.0;
    bool feasible = false;
    bool cache_hit = false;
};

inline LoggedStep parse_step_json(const std::string& line, std::size_t line_no = 0) {
    try {
        const auto j = nlohmann::json::parse(line);
        if (j.at("v").get<int>() != kStepLogVersion) throw ParseError("unsupported step log version", line_no);
        LoggedStep s;
        s.step = j.at("step").get<std::uint64_t>();
        s.phase = j.at("phase").get<std::string>();
        search_phase_from_string(s.phase);
        s.point = j.at("point").get<std::string>();
        if (!j.at("area_mm2").is_null())
            s.metrics = Metrics{j.at("area_mm2").get<double>(), j.at("latency_ms").get<double>(), j.at("accuracy").get<double>()};
        s.reward = j.at("reward").get<double>();
        s.feasible = j.at("feasible").get<bool>();
        s.cache_hit = j.at("cache_hit").get<bool>();
        if (s.feasible && !s.metrics) throw ParseError("feasible step without metrics", line_no);
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad step record: ") + e.what(), line_no);
    } catch (const ParseError& e) {
        throw ParseError(e.what(), line_no);
    }
}

inline std::vector<LoggedStep> read_step_log(std::istream& in) {
    std::vector<LoggedStep> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        out.push_back(parse_step_json(line, line_no));
    }
    return out;
}

inline std::vector<LoggedStep> read_step_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open step log '" + path.string() + "'");
    return read_step_log(in);
}

inline nlohmann::ordered_json summary_json(const ScenarioConfig& c, const SearchResult& r) {
    nlohmann::ordered_json j;
    j["format"] = "codesign-summary-v1";
    j["strategy"] = std::string(to_string(c.search.strategy));
    j["seed"] = c.seed;
    j["steps"] = r.trajectory.steps.size();
    std::size_t feasible = 0, invalid = 0;
    for (const auto& s : r.trajectory.steps) {
        feasible += s.outcome.feasible && counts_for_best(s);
        invalid += !s.valid;
    }
    j["feasible_steps"] = feasible;
    j["invalid_steps"] = invalid;
    j["norm"] = {{"area_mm2", {c.search.reward.norm[0].lo, c.search.reward.norm[0].hi}},
                 {"latency_ms", {c.search.reward.norm[1].lo, c.search.reward.norm[1].hi}},
                 {"accuracy", {c.search.reward.norm[2].lo, c.search.reward.norm[2].hi}}};
    if (const StepRecord* b = r.best_step()) {
        j["found_feasible"] = true;
        j["best"] = {{"step", b->step},
                     {"phase", std::string(to_string(b->phase))},
                     {"point", encode_point(b->point)},
                     {"area_mm2", b->metrics.area_mm2},
                     {"latency_ms", b->metrics.latency_ms},
                     {"accuracy", b->metrics.accuracy},
                     {"perf_per_area", perf_per_area(b->metrics)},
                     {"reward", b->outcome.value}};
    } else {
        j["found_feasible"] = false;
        j["best"] = nullptr;
    }
    return j;
}

struct SearchArtifacts {
    std::filesystem::path log, summary, checkpoint;
};

/// Runs a scenario's search, streaming the JSONL log and writing the summary and
/// final controller checkpoint into `dir`.
inline SearchArtifacts run_search_to(ScenarioConfig c, Evaluator& ev, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    SearchArtifacts a{dir / "steps.jsonl", dir / "summary.json", dir / "checkpoint.json"};
    resolve_norm_bounds(c, ev);
    std::ofstream log(a.log, std::ios::binary | std::ios::trunc);
    if (!log) throw Error("cannot write " + a.log.string());
    const SearchResult r = run_search(c.search, ev, [&](const StepRecord& s) { log << step_json(s) << '\n'; });
    log.close();
    std::ofstream(a.summary, std::ios::binary | std::ios::trunc) << summary_json(c, r).dump(2) << '\n';
    std::ofstream(a.checkpoint, std::ios::binary | std::ios::trunc) << r.checkpoint.dump() << '\n';
    return a;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

/// Exponential moving average with span w (alpha = 2 / (w + 1)); w = 1 reproduces the input.
inline std::vector<double> ema(const std::vector<double>& xs, std::size_t span) {
    if (span < 1) throw Error("smoothing span must be >= 1");
    const double alpha = 2.0 / (static_cast<double>(span) + 1.0);
    std::vector<double> out;
    double acc = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        acc = i == 0 ? xs[i] : alpha * xs[i] + (1.0 - alpha) * acc;
        out.push_back(acc);
    }
    return out;
}

struct ReportFiles {
    std::filesystem::path reward, scatter, best;
};

/// Plot-ready CSVs from a run directory: reward per feasible step (raw and smoothed),
/// accuracy-vs-latency scatter of every evaluated step with a feasibility flag, and
/// the best distinct feasible points.
inline ReportFiles write_report(const std::filesystem::path& run_dir, std::size_t span = 50, std::size_t best_rows = 10) {
    const auto steps = read_step_log(run_dir / "steps.jsonl");
    ReportFiles f{run_dir / "reward_vs_step.csv", run_dir / "scatter.csv", run_dir / "best_points.csv"};
    std::ofstream rw(f.reward), sc(f.scatter), bp(f.best);
    for (auto* o : {&rw, &sc, &bp}) o->precision(std::numeric_limits<double>::max_digits10);

    // One smoothed series per phase label, so the accuracy-only phase of a separate
    // run does not bleed into the MOO curve.
    std::map<std::string, std::vector<double>> series;
    for (const auto& s : steps)
        if (s.feasible) series[s.phase].push_back(s.reward);
    std::map<std::string, std::vector<double>> smoothed;
    for (const auto& [phase, xs] : series) smoothed[phase] = ema(xs, span);
    std::map<std::string, std::size_t> cursor;
    rw << "step,phase,reward,reward_ema\n";
    for (const auto& s : steps) {
        if (!s.feasible) continue;
        const std::size_t k = cursor[s.phase]++;
        rw << s.step << ',' << s.phase << ',' << s.reward << ',' << smoothed[s.phase][k] << '\n';
    }

    sc << "step,phase,latency_ms,accuracy,area_mm2,feasible\n";
    for (const auto& s : steps) {
        if (!s.metrics) continue;
        sc << s.step << ',' << s.phase << ',' << s.metrics->latency_ms << ',' << s.metrics->accuracy << ','
           << s.metrics->area_mm2 << ',' << (s.feasible ? 1 : 0) << '\n';
    }

    std::vector<const LoggedStep*> ranked;
    for (const auto& s : steps)
        if (s.feasible && s.phase != "cnn-acc") ranked.push_back(&s);
    std::stable_sort(ranked.begin(), ranked.end(), [](const LoggedStep* a, const LoggedStep* b) { return a->reward > b->reward; });
    bp << "rank,step,point,area_mm2,latency_ms,accuracy,perf_per_area,reward\n";
    std::set<std::string> shown;
    std::size_t rank = 0;
    for (const LoggedStep* s : ranked) {
        if (rank == best_rows) break;
        if (!shown.insert(s->point).second) continue;
        bp << ++rank << ',' << s->step << ",\"" << s->point << "\"," << s->metrics->area_mm2 << ',' << s->metrics->latency_ms
           << ',' << s->metrics->accuracy << ',' << perf_per_area(*s->metrics) << ',' << s->reward << '\n';
    }
    return f;
}

// ---------------------------------------------------------------------------
// Pareto
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json pareto_stats_json(const JointEnumeration& e) {
    const FrontierStats st = frontier_stats(e.frontier);
    nlohmann::ordered_json j;
    j["format"] = "codesign-pareto-stats-v1";
    j["cells"] = e.cells;
    j["hw_configs"] = e.hw_configs;
    j["points_enumerated"] = e.evaluated;
    j["frontier_size"] = st.size;
    j["distinct_cells"] = st.distinct_cells;
    j["distinct_hw"] = st.distinct_hw;
    j["duplicate_points"] = e.duplicates;
    return j;
}

/// Cell and accelerator sets a scenario's pareto section selects.
inline std::pair<std::vector<CellSpec>, std::vector<HwConfig>> pareto_inputs(const ScenarioConfig& c) {
    std::vector<CellSpec> cells = c.pareto_cells ? sample_cells(*c.pareto_cells, c.seed, c.pareto_max_nodes)
                                                 : enumerate_cells(c.pareto_max_nodes);
    std::vector<HwConfig> hws = enumerate_hw();
    if (c.pareto_hw && *c.pareto_hw < hws.size()) {
        std::mt19937_64 rng(detail::derive_seed(c.seed, 0x4877));
        std::shuffle(hws.begin(), hws.end(), rng);
        hws.resize(*c.pareto_hw);
        std::sort(hws.begin(), hws.end(), [](const HwConfig& a, const HwConfig& b) { return hw_index(a) < hw_index(b); });
    }
    return {std::move(cells), std::move(hws)};
}

} // namespace codesign
