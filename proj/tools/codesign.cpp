#include "codesign/run.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace codesign;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kCoverage = 3 };

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> parallelism;
    std::string out;
};

ScenarioConfig load(const Globals& g, bool required) {
    ScenarioConfig c;
    if (!g.config.empty())
        c = load_scenario(g.config);
    else if (required)
        throw ConfigError("--config", "a scenario file is required");
    if (g.seed) c.set_seed(*g.seed);
    if (g.parallelism) c.set_parallelism(*g.parallelism);
    if (!g.out.empty()) c.output = g.out;
    return c;
}

int cmd_search(const Globals& g) {
    ScenarioConfig c = load(g, true);
    Runtime rt = make_runtime(c);
    const auto a = run_search_to(c, *rt.evaluator, c.output);
    std::cout << "log: " << a.log.string() << "\nsummary: " << a.summary.string() << "\ncheckpoint: " << a.checkpoint.string() << '\n';
    return kOk;
}

int cmd_pareto(const Globals& g) {
    ScenarioConfig c = load(g, true);
    Runtime rt = make_runtime(c);
    const auto [cells, hws] = pareto_inputs(c);
    const JointEnumeration e = enumerate_joint(cells, hws, *rt.evaluator, c.parallelism, [&](std::size_t done, std::size_t total) {
        if (done == total || done % 50 == 0) std::cerr << "\rcells " << done << '/' << total << std::flush;
    });
    if (!cells.empty()) std::cerr << '\n';
    std::filesystem::create_directories(c.output);
    const auto csv = std::filesystem::path(c.output) / "frontier.csv";
    const auto stats = std::filesystem::path(c.output) / "pareto_stats.json";
    {
        std::ofstream out(csv, std::ios::binary | std::ios::trunc);
        write_frontier_csv(out, e.frontier);
    }
    const auto j = pareto_stats_json(e);
    std::ofstream(stats, std::ios::binary | std::ios::trunc) << j.dump(2) << '\n';
    std::cout << j.dump(2) << "\nfrontier: " << csv.string() << '\n';
    return kOk;
}

int cmd_eval(const Globals& g, const std::string& text) {
    ScenarioConfig c = load(g, false);
    const SearchPoint p = parse_point(text);
    Runtime rt = make_runtime(c);
    resolve_norm_bounds(c, *rt.evaluator);
    const Metrics m = rt.evaluator->evaluate(p);
    const RewardOutcome r = reward(m, c.search.reward);
    std::printf("point=%s\n", encode_point(p).c_str());
    std::printf("area_mm2=%.17g\nlatency_ms=%.17g\naccuracy=%.17g\nperf_per_area=%.17g\n", m.area_mm2, m.latency_ms, m.accuracy,
                perf_per_area(m));
    std::printf("feasible=%s\nreward=%.17g\n", r.feasible ? "true" : "false", r.value);
    return kOk;
}

int cmd_report(const std::string& dir, std::size_t window) {
    const auto f = write_report(dir, window);
    std::cout << f.reward.string() << '\n' << f.scatter.string() << '\n' << f.best.string() << '\n';
    return kOk;
}

bool is_coverage(const std::exception_ptr& p) {
    try {
        std::rethrow_exception(p);
    } catch (const CoverageGap&) {
        return true;
    } catch (const BatchError& e) {
        return e.cause() && is_coverage(e.cause());
    } catch (...) {
        return false;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint CNN cell / FPGA accelerator search"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "scenario file")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "override the scenario seed");
    app.add_option("--parallelism", g.parallelism, "evaluation worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", g.out, "output directory");

    auto* search = app.add_subcommand("search", "run the scenario's search strategy");
    auto* pareto = app.add_subcommand("pareto", "enumerate cells x accelerators and export the frontier");
    std::string point;
    auto* eval = app.add_subcommand("eval", "evaluate one encoded point");
    eval->add_option("point", point, "e.g. 'cell=<21 bits>:<5 ops> hw=8,16,1024,1024,1024,64,1,1'")->required();
    std::string run_dir;
    std::size_t window = 50;
    auto* report = app.add_subcommand("report", "write plot-ready CSVs for a run directory");
    report->add_option("run_dir", run_dir, "directory holding steps.jsonl")->required();
    report->add_option("--window", window, "EMA span for the smoothed reward")->check(CLI::PositiveNumber);
    app.fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*search) return cmd_search(g);
        if (*pareto) return cmd_pareto(g);
        if (*eval) return cmd_eval(g, point);
        if (*report) return cmd_report(run_dir, window);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kConfig;
    } catch (const std::exception& e) {
        if (is_coverage(std::current_exception())) {
            std::cerr << "coverage error: " << e.what() << '\n';
            return kCoverage;
        }
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kFailure;
}
