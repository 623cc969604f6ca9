#include "support.hpp"

#include <gtest/gtest.h>

#include "codesign/search.hpp"

#include <set>

using namespace codesign;
using namespace testing_support;

namespace {

SearchSettings small(Strategy strategy, std::size_t total, std::uint64_t seed = 1) {
    SearchSettings s;
    s.strategy = strategy;
    s.total_steps = total;
    s.max_nodes = 4;
    s.seed = seed;
    s.reward.norm = {NormBounds{0, 300}, NormBounds{0, 400}, NormBounds{0.3, 1.0}};
    if (strategy == Strategy::Separate) {
        s.cnn_steps = total * 5 / 6;
        s.hw_steps = total - s.cnn_steps;
    }
    return s;
}

} // namespace

TEST(Search, ZeroBudgetGivesEmptyTrajectory) {
    auto ev = make_evaluator(4);
    for (Strategy st : {Strategy::Combined, Strategy::Phase}) {
        const auto r = run_search(small(st, 0), *ev);
        EXPECT_TRUE(r.trajectory.steps.empty());
        EXPECT_FALSE(r.best);
        EXPECT_EQ(r.best_step(), nullptr);
    }
}

TEST(Search, ImpossibleThresholdsNeverFeasible) {
    auto ev = make_evaluator(4);
    for (Strategy st : {Strategy::Combined, Strategy::Phase, Strategy::Separate}) {
        auto s = small(st, 300);
        s.reward.max_latency = 1e-9;
        const auto r = run_search(s, *ev);
        EXPECT_EQ(r.trajectory.steps.size(), 300u);
        EXPECT_FALSE(r.best);
        for (const auto& step : r.trajectory.steps) {
            if (step.phase == SearchPhase::CnnAccuracy) continue;
            EXPECT_FALSE(step.outcome.feasible);
            EXPECT_LT(step.outcome.value, 0.0);
        }
    }
}

TEST(Search, PhaseBoundariesFollowSchedule) {
    auto ev = make_evaluator(4);
    SearchSettings s = small(Strategy::Phase, 5000);
    s.cnn_steps = 1000;
    s.hw_steps = 200;
    const auto spans = phase_schedule(s);
    ASSERT_GE(spans.size(), 4u);
    EXPECT_EQ(spans[1].begin, 1000u);
    EXPECT_EQ(spans[2].begin, 1200u);
    EXPECT_EQ(spans[3].begin, 2200u);
    EXPECT_EQ(spans[4].begin, 2400u);
    std::size_t covered = 0;
    for (const auto& sp : spans) covered += sp.length;
    EXPECT_EQ(covered, 5000u);

    const auto r = run_search(s, *ev);
    ASSERT_EQ(r.trajectory.steps.size(), 5000u);
    for (const auto& sp : spans) {
        std::set<int> hws;
        std::set<std::string> cells;
        for (std::size_t i = sp.begin; i < sp.begin + sp.length; ++i) {
            const auto& step = r.trajectory.steps[i];
            ASSERT_EQ(step.phase, sp.phase);
            ASSERT_EQ(step.step, i + 1);
            hws.insert(hw_index(step.point.hw));
            cells.insert(encode_cell_text(step.point.cell));
        }
        if (sp.phase == SearchPhase::Cnn) {
            EXPECT_EQ(hws.size(), 1u) << "hw frozen during cnn phase";
        }
        if (sp.phase == SearchPhase::Hw) {
            EXPECT_EQ(cells.size(), 1u) << "cell frozen during hw phase";
        }
    }
}

TEST(Search, PhaseFreezesToBestSoFar) {
    auto ev = make_evaluator(4);
    SearchSettings s = small(Strategy::Phase, 700);
    s.cnn_steps = 200;
    s.hw_steps = 100;
    const auto r = run_search(s, *ev);
    const auto& steps = r.trajectory.steps;
    // the hw phase starting at step 201 freezes the best cell of the first 200 steps
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < 200; ++i) {
        if (!steps[i].valid) continue;
        if (!best || (steps[i].outcome.feasible && !steps[*best].outcome.feasible) ||
            (steps[i].outcome.feasible == steps[*best].outcome.feasible && steps[i].outcome.value > steps[*best].outcome.value))
            best = i;
    }
    ASSERT_TRUE(best);
    EXPECT_EQ(steps[200].point.cell, steps[*best].point.cell);
    EXPECT_EQ(hw_index(steps[0].point.hw), hw_index(s.initial_hw));
}

TEST(Search, SeparatePhaseOneIgnoresHardware) {
    auto ev = make_evaluator(4);
    SearchSettings a = small(Strategy::Separate, 600);
    SearchSettings b = a;
    b.initial_hw = hw_from_index(8639);
    auto ev2 = make_evaluator(4, 1, [] {
        Calibration c;
        c.f_clk_mhz = 50;
        c.conv_clb_fixed = 9000;
        return c;
    }());
    const auto ra = run_search(a, *ev);
    const auto rb = run_search(b, *ev2);
    for (std::size_t i = 0; i < a.cnn_steps; ++i) {
        const auto &x = ra.trajectory.steps[i], &y = rb.trajectory.steps[i];
        ASSERT_EQ(x.phase, SearchPhase::CnnAccuracy);
        EXPECT_EQ(x.point.cell, y.point.cell);
        EXPECT_EQ(x.outcome.value, y.outcome.value);
    }
    // phase two shares the most accurate phase-one cell
    double best_acc = -1;
    CellSpec best_cell;
    for (std::size_t i = 0; i < a.cnn_steps; ++i) {
        const auto& st = ra.trajectory.steps[i];
        if (st.valid && st.metrics.accuracy > best_acc) {
            best_acc = st.metrics.accuracy;
            best_cell = st.point.cell;
        }
    }
    for (std::size_t i = a.cnn_steps; i < ra.trajectory.steps.size(); ++i) {
        EXPECT_EQ(ra.trajectory.steps[i].phase, SearchPhase::Hw);
        EXPECT_EQ(ra.trajectory.steps[i].point.cell, best_cell);
    }
    // s* comes from the MOO phase only
    ASSERT_TRUE(ra.best);
    EXPECT_GE(*ra.best, a.cnn_steps);
}

TEST(Search, BestPointIsFeasibleArgmax) {
    auto ev = make_evaluator(4);
    auto s = small(Strategy::Combined, 800, 3);
    s.reward.max_latency = 60;
    const auto r = run_search(s, *ev);
    double best = -1e300;
    std::optional<std::size_t> arg;
    for (std::size_t i = 0; i < r.trajectory.steps.size(); ++i) {
        const auto& st = r.trajectory.steps[i];
        if (st.outcome.feasible && st.outcome.value > best) {
            best = st.outcome.value;
            arg = i;
        }
    }
    EXPECT_EQ(r.best, arg);
}

TEST(Search, InvalidCellsArePunishedNotEvaluated) {
    auto ev = make_evaluator(4);
    auto s = small(Strategy::Combined, 500, 2);
    s.reward.punishment_scale = 0.7;
    const auto r = run_search(s, *ev);
    int invalid = 0;
    for (const auto& st : r.trajectory.steps)
        if (!st.valid) {
            ++invalid;
            EXPECT_FALSE(st.outcome.feasible);
            EXPECT_EQ(st.outcome.value, -0.7);
            EXPECT_EQ(st.metrics, Metrics{});
        } else {
            EXPECT_TRUE(validate_cell(st.point.cell).accepted());
        }
    EXPECT_GT(invalid, 0);
}

TEST(Search, CacheHitMeansSeenEarlierInRun) {
    auto ev = make_evaluator(4);
    const auto r = run_search(small(Strategy::Combined, 1500, 4), *ev);
    std::set<std::pair<Digest128, int>> seen;
    int hits = 0;
    for (const auto& st : r.trajectory.steps) {
        if (!st.valid) continue;
        const bool fresh = seen.insert({cell_hash(st.point.cell), hw_index(st.point.hw)}).second;
        EXPECT_EQ(st.cache_hit, !fresh);
        hits += st.cache_hit;
    }
    EXPECT_GT(hits, 0);
}

TEST(Search, ReproducibleAndParallelismInvariant) {
    for (Strategy st : {Strategy::Combined, Strategy::Phase, Strategy::Separate}) {
        auto s = small(st, 400, 11);
        s.batch = 8;
        auto ev1 = make_evaluator(4);
        auto ev2 = make_evaluator(4);
        const auto a = run_search(s, *ev1);
        s.parallelism = 8;
        const auto b = run_search(s, *ev2);
        ASSERT_EQ(a.trajectory.steps.size(), b.trajectory.steps.size());
        for (std::size_t i = 0; i < a.trajectory.steps.size(); ++i) {
            EXPECT_EQ(a.trajectory.steps[i].point, b.trajectory.steps[i].point);
            EXPECT_EQ(a.trajectory.steps[i].metrics, b.trajectory.steps[i].metrics);
            EXPECT_EQ(a.trajectory.steps[i].outcome.value, b.trajectory.steps[i].outcome.value);
        }
        EXPECT_EQ(a.checkpoint.dump(), b.checkpoint.dump());
    }
}

TEST(Search, DifferentSeedsDiffer) {
    auto ev = make_evaluator(4);
    const auto a = run_search(small(Strategy::Combined, 50, 1), *ev);
    const auto b = run_search(small(Strategy::Combined, 50, 2), *ev);
    int same = 0;
    for (std::size_t i = 0; i < 50; ++i) same += a.trajectory.steps[i].point == b.trajectory.steps[i].point;
    EXPECT_LT(same, 50);
}

TEST(Search, RampThresholdRecordedAndAdvanced) {
    auto ev = make_evaluator(4);
    auto s = small(Strategy::Combined, 600, 5);
    s.ramp = RampSpec{{{0.5, 20}, {1.0, 20}, {1e9, 1}}};
    const auto r = run_search(s, *ev);
    ThresholdRamp oracle(s.ramp->stages);
    for (const auto& st : r.trajectory.steps) {
        ASSERT_TRUE(st.threshold);
        EXPECT_EQ(*st.threshold, oracle.active());
        if (st.valid) {
            EXPECT_EQ(st.outcome.feasible, perf_per_area(st.metrics) > *st.threshold);
            oracle.record(st.outcome.feasible);
        }
    }
    EXPECT_EQ(oracle.stage(), 2u);
}

TEST(Search, SettingsValidation) {
    auto ev = make_evaluator(4);
    auto s = small(Strategy::Separate, 100);
    s.hw_steps += 1;
    EXPECT_THROW(run_search(s, *ev), ConfigError);
    s = small(Strategy::Phase, 100);
    s.hw_steps = 0;
    EXPECT_THROW(run_search(s, *ev), ConfigError);
    s = small(Strategy::Combined, 100);
    s.batch = 0;
    EXPECT_THROW(run_search(s, *ev), ConfigError);
    EXPECT_THROW(strategy_from_string("joint"), ConfigError);
    EXPECT_EQ(strategy_from_string("separate"), Strategy::Separate);
}

TEST(Search, CheckpointHoldsControllers) {
    auto ev = make_evaluator(4);
    const auto r = run_search(small(Strategy::Phase, 100), *ev);
    EXPECT_EQ(r.checkpoint.at("format"), "codesign-checkpoint-v1");
    EXPECT_EQ(r.checkpoint.at("steps"), 100);
    Policy cnn(decision_schema(SpaceKind::Cell, 4), {}, 0);
    EXPECT_NO_THROW(cnn.load_json(r.checkpoint.at("controllers").at("cnn")));
    Policy hw(decision_schema(SpaceKind::Hw), {}, 0);
    EXPECT_NO_THROW(hw.load_json(r.checkpoint.at("controllers").at("hw")));
}
