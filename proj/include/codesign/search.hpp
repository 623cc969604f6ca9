#pragma once

#include "codesign/evaluator.hpp"
#include "codesign/policy.hpp"
#include "codesign/reward.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

namespace codesign {

enum class Strategy { Combined, Phase, Separate };

inline constexpr std::string_view to_string(Strategy s) {
    switch (s) {
    case Strategy::Combined: return "combined";
    case Strategy::Phase: return "phase";
    case Strategy::Separate: return "separate";
    }
    return "?";
}

inline Strategy strategy_from_string(std::string_view s) {
    if (s == "combined") return Strategy::Combined;
    if (s == "phase") return Strategy::Phase;
    if (s == "separate") return Strategy::Separate;
    throw ConfigError("strategy", "expected combined, phase or separate");
}

/// Which controller produced a step and under which objective.
enum class SearchPhase { Joint, Cnn, Hw, CnnAccuracy };

inline constexpr std::string_view to_string(SearchPhase p) {
    switch (p) {
    case SearchPhase::Joint: return "joint";
    case SearchPhase::Cnn: return "cnn";
    case SearchPhase::Hw: return "hw";
    case SearchPhase::CnnAccuracy: return "cnn-acc";
    }
    return "?";
}

inline SearchPhase search_phase_from_string(std::string_view s) {
    if (s == "joint") return SearchPhase::Joint;
    if (s == "cnn") return SearchPhase::Cnn;
    if (s == "hw") return SearchPhase::Hw;
    if (s == "cnn-acc") return SearchPhase::CnnAccuracy;
    throw ParseError("unknown phase '" + std::string(s) + "'");
}

struct RampSpec {
    std::vector<ThresholdRamp::Stage> stages; ///< perf/area thresholds
};

struct SearchSettings {
    Strategy strategy = Strategy::Combined;
    std::size_t total_steps = 10000;
    std::size_t cnn_steps = 1000; ///< phase: per CNN phase; separate: accuracy-only phase
    std::size_t hw_steps = 200;   ///< phase: per HW phase; separate: HW phase
    std::size_t batch = 1;        ///< points sampled per round before the updates are applied
    int max_nodes = kMaxNodes;
    RewardSpec reward;
    std::optional<RampSpec> ramp;
    ControllerOptions controller;
    std::uint64_t seed = 0;
    int parallelism = 1;
    HwConfig initial_hw = hw_from_index(0);

    /// Budgets as run_phase / run_separate use them by default.
    static SearchSettings phase_defaults() {
        SearchSettings s;
        s.strategy = Strategy::Phase;
        return s;
    }
    static SearchSettings separate_defaults() {
        SearchSettings s;
        s.strategy = Strategy::Separate;
        s.cnn_steps = 8333;
        s.hw_steps = 1667;
        return s;
    }

    void check() const {
        reward.check();
        controller.check();
        if (batch < 1) throw ConfigError("search.batch", "must be >= 1");
        if (parallelism < 1) throw ConfigError("parallelism", "must be >= 1");
        if (max_nodes < 2 || max_nodes > kMaxNodes) throw ConfigError("search.max_nodes", "must lie in [2,7]");
        if (!is_valid_hw(initial_hw)) throw ConfigError("search.initial_hw", "not a valid accelerator config");
        if (strategy == Strategy::Phase && (cnn_steps == 0 || hw_steps == 0))
            throw ConfigError("budget.cnn_steps", "phase budgets must be > 0");
        if (strategy == Strategy::Separate) {
            if (cnn_steps == 0 || hw_steps == 0) throw ConfigError("budget.cnn_steps", "separate budgets must be > 0");
            if (cnn_steps + hw_steps != total_steps) throw ConfigError("budget.total", "cnn_steps + hw_steps must equal total");
        }
        if (ramp) ThresholdRamp check_ramp(ramp->stages);
    }
};

struct StepRecord {
    std::uint64_t step = 0; ///< 1-based
    SearchPhase phase = SearchPhase::Joint;
    SearchPoint point;      ///< as decoded; the cell is the raw sample when it failed validation
    bool valid = false;     ///< the cell passed validation and was evaluated
    Metrics metrics;        ///< zero when !valid
    RewardOutcome outcome;
    bool cache_hit = false; ///< the same (cell, hw) pair was evaluated at an earlier step
    std::optional<double> threshold; ///< active perf/area threshold under a ramp
};

struct Trajectory {
    std::vector<StepRecord> steps;
};

struct SearchResult {
    Trajectory trajectory;
    std::optional<std::size_t> best; ///< index of s* in trajectory.steps
    nlohmann::json checkpoint;       ///< final controller states

    const StepRecord* best_step() const { return best ? &trajectory.steps[*best] : nullptr; }
};

/// Steps that take part in the s* argmax: every MOO-rewarded step.
inline bool counts_for_best(const StepRecord& r) { return r.phase != SearchPhase::CnnAccuracy; }

/// s* = argmax over feasible MOO steps of the reward value; first occurrence wins ties.
inline std::optional<std::size_t> best_point(const Trajectory& t) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
        const StepRecord& r = t.steps[i];
        if (!counts_for_best(r) || !r.outcome.feasible) continue;
        if (!best || r.outcome.value > t.steps[*best].outcome.value) best = i;
    }
    return best;
}

/// Phase boundaries of the alternating schedule: (phase, first step, steps in phase).
struct PhaseSpan {
    SearchPhase phase;
    std::size_t begin; ///< 0-based index of the first step
    std::size_t length;
};

inline std::vector<PhaseSpan> phase_schedule(const SearchSettings& s) {
    std::vector<PhaseSpan> out;
    if (s.total_steps == 0) return out;
    switch (s.strategy) {
    case Strategy::Combined: out.push_back({SearchPhase::Joint, 0, s.total_steps}); break;
    case Strategy::Separate:
        out.push_back({SearchPhase::CnnAccuracy, 0, std::min(s.cnn_steps, s.total_steps)});
        if (s.total_steps > s.cnn_steps) out.push_back({SearchPhase::Hw, s.cnn_steps, s.total_steps - s.cnn_steps});
        break;
    case Strategy::Phase: {
        std::size_t at = 0;
        bool cnn = true;
        while (at < s.total_steps) {
            const std::size_t len = std::min(cnn ? s.cnn_steps : s.hw_steps, s.total_steps - at);
            out.push_back({cnn ? SearchPhase::Cnn : SearchPhase::Hw, at, len});
            at += len;
            cnn = !cnn;
        }
        break;
    }
    }
    return out;
}

namespace detail {

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t state = seed ^ (stream * 0xa0761d6478bd642full);
    return splitmix64(state);
}

/// Stand-in cell for freezing when no valid cell has been seen yet.
inline CellSpec fallback_cell() { return make_cell(3, {{0, 1}, {1, 2}}, {CellOp::Conv3x3}); }

class SearchRun {
public:
    SearchRun(const SearchSettings& s, Evaluator& ev, const std::function<void(const StepRecord&)>& observer)
        : s_(s), ev_(ev), observer_(observer) {
        if (s_.ramp) ramp_.emplace(s_.ramp->stages);
    }

    SearchResult run() {
        s_.check();
        SearchResult result;
        const auto schedule = phase_schedule(s_);
        nlohmann::json controllers = nlohmann::json::object();
        switch (s_.strategy) {
        case Strategy::Combined: {
            Policy joint(decision_schema(SpaceKind::Joint, s_.max_nodes), s_.controller, derive_seed(s_.seed, 1));
            for (const auto& span : schedule) run_span(span, joint, {}, {});
            controllers["joint"] = joint.to_json();
            break;
        }
        case Strategy::Phase: {
            Policy cnn(decision_schema(SpaceKind::Cell, s_.max_nodes), s_.controller, derive_seed(s_.seed, 2));
            Policy hw(decision_schema(SpaceKind::Hw), s_.controller, derive_seed(s_.seed, 3));
            for (const auto& span : schedule) {
                if (span.phase == SearchPhase::Cnn) {
                    const HwConfig frozen = incumbent_ ? steps_[*incumbent_].point.hw : s_.initial_hw;
                    run_span(span, cnn, {}, frozen);
                } else {
                    const CellSpec frozen = incumbent_ ? steps_[*incumbent_].point.cell : fallback_cell();
                    run_span(span, hw, frozen, {});
                }
            }
            controllers["cnn"] = cnn.to_json();
            controllers["hw"] = hw.to_json();
            break;
        }
        case Strategy::Separate: {
            Policy cnn(decision_schema(SpaceKind::Cell, s_.max_nodes), s_.controller, derive_seed(s_.seed, 2));
            Policy hw(decision_schema(SpaceKind::Hw), s_.controller, derive_seed(s_.seed, 3));
            for (const auto& span : schedule) {
                if (span.phase == SearchPhase::CnnAccuracy) {
                    run_span(span, cnn, {}, s_.initial_hw);
                } else {
                    const CellSpec frozen = most_accurate_ ? steps_[*most_accurate_].point.cell : fallback_cell();
                    run_span(span, hw, frozen, {});
                }
            }
            controllers["cnn"] = cnn.to_json();
            controllers["hw"] = hw.to_json();
            break;
        }
        }
        result.trajectory.steps = std::move(steps_);
        result.best = best_point(result.trajectory);
        result.checkpoint = {{"format", "codesign-checkpoint-v1"},
                             {"strategy", std::string(to_string(s_.strategy))},
                             {"seed", s_.seed},
                             {"steps", result.trajectory.steps.size()},
                             {"controllers", std::move(controllers)}};
        return result;
    }

private:
    void run_span(const PhaseSpan& span, Policy& policy, std::optional<CellSpec> frozen_cell, std::optional<HwConfig> frozen_hw) {
        std::size_t done = 0;
        while (done < span.length) {
            const std::size_t n = std::min(s_.batch, span.length - done);
            std::vector<PolicySample> samples;
            std::vector<StepRecord> records(n);
            std::vector<SearchPoint> to_eval;
            std::vector<std::size_t> eval_slot;
            for (std::size_t b = 0; b < n; ++b) {
                samples.push_back(policy.sample());
                const DecodedPoint d = decode(policy.schema(), samples.back().choices);
                StepRecord& r = records[b];
                r.phase = span.phase;
                r.point.cell = d.raw_cell ? *d.raw_cell : *frozen_cell;
                r.point.hw = d.hw ? *d.hw : *frozen_hw;
                r.valid = d.raw_cell ? d.cell_ok() : true;
                if (r.valid) {
                    if (d.raw_cell) r.point.cell = d.verdict.cell;
                    to_eval.push_back(r.point);
                    eval_slot.push_back(b);
                }
            }
            const std::vector<Metrics> metrics = ev_.evaluate_batch(to_eval, s_.parallelism);
            for (std::size_t k = 0; k < metrics.size(); ++k) records[eval_slot[k]].metrics = metrics[k];

            for (std::size_t b = 0; b < n; ++b) {
                StepRecord& r = records[b];
                r.step = steps_.size() + 1;
                judge(r);
                policy.update(samples[b].choices, r.outcome.value);
                track(r);
                steps_.push_back(r);
                if (observer_) observer_(steps_.back());
            }
            done += n;
        }
    }

    void judge(StepRecord& r) {
        if (!r.valid) {
            r.outcome.feasible = false;
            r.outcome.value = -s_.reward.punishment_scale;
            if (ramp_) r.threshold = ramp_->active();
            return;
        }
        const Digest128 digest = cell_hash(r.point.cell);
        r.cache_hit = !seen_.insert(PairKey{digest, hw_index(r.point.hw)}).second;
        if (r.phase == SearchPhase::CnnAccuracy) {
            RewardSpec acc_only;
            acc_only.weights = {0.0, 0.0, 1.0};
            acc_only.norm = s_.reward.norm;
            acc_only.punishment_scale = s_.reward.punishment_scale;
            r.outcome = reward(r.metrics, acc_only);
            return;
        }
        RewardSpec spec = s_.reward;
        if (ramp_) {
            r.threshold = ramp_->active();
            spec.min_perf_per_area = *r.threshold;
        }
        r.outcome = reward(r.metrics, spec);
        if (ramp_) ramp_->record(r.outcome.feasible);
    }

    /// Maintains the incumbent used for freezing: the best feasible point, or the
    /// highest-valued evaluated point while nothing is feasible.
    void track(const StepRecord& r) {
        const std::size_t idx = steps_.size();
        if (!r.valid) return;
        if (r.phase == SearchPhase::CnnAccuracy) {
            if (!most_accurate_ || r.metrics.accuracy > steps_[*most_accurate_].metrics.accuracy) most_accurate_ = idx;
            return;
        }
        if (!incumbent_) {
            incumbent_ = idx;
            return;
        }
        const StepRecord& cur = steps_[*incumbent_];
        if (r.outcome.feasible != cur.outcome.feasible) {
            if (r.outcome.feasible) incumbent_ = idx;
            return;
        }
        if (r.outcome.value > cur.outcome.value) incumbent_ = idx;
    }

    SearchSettings s_;
    Evaluator& ev_;
    const std::function<void(const StepRecord&)>& observer_;
    std::optional<ThresholdRamp> ramp_;
    std::vector<StepRecord> steps_;
    std::optional<std::size_t> incumbent_;
    std::optional<std::size_t> most_accurate_;
    std::unordered_set<PairKey, PairKeyHash> seen_;
};

} // namespace detail

/// Runs the configured strategy. `observer` sees every step as soon as it is final.
inline SearchResult run_search(const SearchSettings& settings, Evaluator& ev,
                               const std::function<void(const StepRecord&)>& observer = {}) {
    return detail::SearchRun(settings, ev, observer).run();
}

inline SearchResult run_combined(SearchSettings s, Evaluator& ev) {
    s.strategy = Strategy::Combined;
    return run_search(s, ev);
}

inline SearchResult run_phase(SearchSettings s, Evaluator& ev) {
    s.strategy = Strategy::Phase;
    return run_search(s, ev);
}

inline SearchResult run_separate(SearchSettings s, Evaluator& ev) {
    s.strategy = Strategy::Separate;
    return run_search(s, ev);
}

} // namespace codesign
