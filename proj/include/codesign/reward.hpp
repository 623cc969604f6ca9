#pragma once

#include "codesign/evaluator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <vector>

namespace codesign {

enum class Metric { Area = 0, Latency = 1, Accuracy = 2 };

/// Raw-unit range (lo < hi) over which a metric is normalized.
struct NormBounds {
    double lo = 0.0;
    double hi = 1.0;
};

/// Weighted-sum reward with per-metric constraints. Weights and bounds are ordered
/// (area, latency, accuracy). Constraints are strict: area < max_area,
/// latency < max_latency, accuracy > min_accuracy, perf/area > min_perf_per_area.
struct RewardSpec {
    std::array<double, 3> weights{0.1, 0.8, 0.1};
    std::optional<double> max_area;
    std::optional<double> max_latency;
    std::optional<double> min_accuracy;
    std::optional<double> min_perf_per_area;
    std::array<NormBounds, 3> norm{NormBounds{0.0, 300.0}, NormBounds{0.0, 1000.0}, NormBounds{0.0, 1.0}};
    double punishment_scale = 1.0;

    void check() const {
        double sum = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("reward.weights", "weights must be finite and >= 0");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-6) throw ConfigError("reward.weights", "weights must sum to 1");
        for (const auto& b : norm)
            if (!(b.lo < b.hi)) throw ConfigError("reward.norm", "normalization bounds need lo < hi");
        if (!(punishment_scale > 0.0)) throw ConfigError("reward.punishment_scale", "must be > 0");
    }

    /// Bounds in the oriented space (-area, -latency, +accuracy), where larger is better.
    std::pair<double, double> oriented_bounds(Metric m) const {
        const NormBounds& b = norm[static_cast<int>(m)];
        if (m == Metric::Accuracy) return {b.lo, b.hi};
        return {-b.hi, -b.lo};
    }
};

/// Smallest punishment fraction; keeps a point sitting exactly on a strict bound
/// strictly negative.
inline constexpr double kMinPunishmentFraction = 1e-3;

struct RewardOutcome {
    bool feasible = false;
    double value = 0.0;
    std::array<double, 3> normalized{};
};

inline double oriented(const Metrics& m, Metric which) {
    switch (which) {
    case Metric::Area: return -m.area_mm2;
    case Metric::Latency: return -m.latency_ms;
    case Metric::Accuracy: return m.accuracy;
    }
    return 0.0;
}

/// Linear map of each oriented metric from (x_min, x_max) to (0, 1), clamped.
inline std::array<double, 3> normalize(const Metrics& m, const RewardSpec& spec) {
    std::array<double, 3> out{};
    for (int i = 0; i < 3; ++i) {
        const auto which = static_cast<Metric>(i);
        const auto [x_min, x_max] = spec.oriented_bounds(which);
        out[i] = std::clamp((oriented(m, which) - x_min) / (x_max - x_min), 0.0, 1.0);
    }
    return out;
}

/// Throughput at batch 1 over area: (1000 / latency_ms) / (area_mm2 / 100), img/s/cm^2.
inline double perf_per_area(const Metrics& m) { return (1000.0 / m.latency_ms) / (m.area_mm2 / 100.0); }

/// w . N(m) when every constraint holds; otherwise the punishment
/// -scale * mean over violated constraints of min(1, |violation| / |threshold|).
inline RewardOutcome reward(const Metrics& m, const RewardSpec& spec) {
    RewardOutcome r;
    r.normalized = normalize(m, spec);
    double punish_sum = 0.0;
    int violated = 0;
    auto charge = [&](double violation, double threshold) {
        const double scale = std::abs(threshold) > 0.0 ? std::abs(threshold) : 1.0;
        punish_sum += std::clamp(std::abs(violation) / scale, kMinPunishmentFraction, 1.0);
        ++violated;
    };
    if (spec.max_area && !(m.area_mm2 < *spec.max_area)) charge(m.area_mm2 - *spec.max_area, *spec.max_area);
    if (spec.max_latency && !(m.latency_ms < *spec.max_latency)) charge(m.latency_ms - *spec.max_latency, *spec.max_latency);
    if (spec.min_accuracy && !(m.accuracy > *spec.min_accuracy)) charge(*spec.min_accuracy - m.accuracy, *spec.min_accuracy);
    if (spec.min_perf_per_area) {
        const double ppa = perf_per_area(m);
        if (!(ppa > *spec.min_perf_per_area)) charge(*spec.min_perf_per_area - ppa, *spec.min_perf_per_area);
    }
    if (violated) {
        r.feasible = false;
        r.value = -spec.punishment_scale * punish_sum / violated;
        return r;
    }
    r.feasible = true;
    r.value = 0.0;
    for (int i = 0; i < 3; ++i) r.value += spec.weights[i] * r.normalized[i];
    return r;
}

/// Stepwise constraint schedule: each stage's threshold stays active until that
/// stage has seen `budget` feasible points; the last stage never ends.
class ThresholdRamp {
public:
    struct Stage {
        double threshold = 0.0;
        std::size_t budget = 1;
    };

    explicit ThresholdRamp(std::vector<Stage> stages) : stages_(std::move(stages)) {
        if (stages_.empty()) throw ConfigError("ramp.schedule", "needs at least one stage");
        for (std::size_t i = 0; i < stages_.size(); ++i) {
            if (stages_[i].budget == 0) throw ConfigError("ramp.schedule", "stage budgets must be > 0");
            if (i && stages_[i].threshold < stages_[i - 1].threshold)
                throw ConfigError("ramp.schedule", "thresholds must be nondecreasing");
        }
    }

    double active() const { return stages_[stage_].threshold; }
    std::size_t stage() const { return stage_; }
    std::size_t feasible_in_stage() const { return count_; }
    const std::vector<Stage>& stages() const { return stages_; }

    /// Counts one judged point; advances after the stage's budget-th feasible one.
    void record(bool feasible) {
        if (!feasible) return;
        ++count_;
        if (count_ >= stages_[stage_].budget && stage_ + 1 < stages_.size()) {
            ++stage_;
            count_ = 0;
        }
    }

private:
    std::vector<Stage> stages_;
    std::size_t stage_ = 0;
    std::size_t count_ = 0;
};

} // namespace codesign
