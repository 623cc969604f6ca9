#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace codesign;
using namespace testing_support;

namespace {

DecisionSchema tiny_schema() {
    DecisionSchema s;
    s.space = SpaceKind::Cell;
    s.decisions = {{"a", 3}, {"b", 2}};
    return s;
}

ControllerOptions tiny_options() {
    ControllerOptions o;
    o.hidden = 4;
    o.embedding = 3;
    o.init_scale = 0.5;
    return o;
}

} // namespace

TEST(Policy, ZeroInitSamplesUniformly) {
    ControllerOptions o;
    o.init_scale = 0.0;
    Policy p(decision_schema(SpaceKind::Joint), o, 17);
    const auto& decisions = p.schema().decisions;
    std::vector<std::vector<int>> counts;
    for (const auto& d : decisions) counts.emplace_back(d.options, 0);
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const auto s = p.sample();
        for (std::size_t d = 0; d < decisions.size(); ++d) ++counts[d][s.choices[d]];
    }
    for (std::size_t d = 0; d < decisions.size(); ++d) {
        const double q = 1.0 / decisions[d].options;
        const double sigma = std::sqrt(n * q * (1 - q));
        for (int k = 0; k < decisions[d].options; ++k)
            EXPECT_LE(std::abs(counts[d][k] - n * q), 3 * sigma) << decisions[d].name << " option " << k;
    }
}

TEST(Policy, SamplingIsReproducible) {
    Policy a(decision_schema(SpaceKind::Joint), {}, 5);
    Policy b(decision_schema(SpaceKind::Joint), {}, 5);
    for (int i = 0; i < 20; ++i) {
        const auto x = a.sample(), y = b.sample();
        EXPECT_EQ(x.choices, y.choices);
        EXPECT_EQ(x.log_probs, y.log_probs);
    }
    Policy c(decision_schema(SpaceKind::Joint), {}, 6);
    EXPECT_NE(Policy(decision_schema(SpaceKind::Joint), {}, 5).sample().choices, c.sample().choices);
}

TEST(Policy, HeadsAreNormalizedAndLogProbsConsistent) {
    Policy p(decision_schema(SpaceKind::Joint), {}, 3);
    for (int i = 0; i < 50; ++i) {
        const auto s = p.sample();
        const auto dist = p.distributions(s.choices);
        ASSERT_EQ(dist.size(), p.schema().size());
        double lp = 0.0;
        for (std::size_t d = 0; d < dist.size(); ++d) {
            ASSERT_EQ(static_cast<int>(dist[d].size()), p.schema().decisions[d].options);
            double sum = 0.0;
            for (double q : dist[d]) sum += q;
            EXPECT_NEAR(sum, 1.0, 1e-6);
            EXPECT_NEAR(std::log(dist[d][s.choices[d]]), s.log_probs[d], 1e-12);
            lp += s.log_probs[d];
        }
        EXPECT_NEAR(p.log_prob(s.choices), lp, 1e-9);
    }
}

TEST(Policy, GradientMatchesFiniteDifferences) {
    Policy p(tiny_schema(), tiny_options(), 7);
    for (const std::vector<int>& c : {std::vector<int>{2, 0}, std::vector<int>{0, 1}, std::vector<int>{1, 1}}) {
        EXPECT_LT(worst_fd_gap(p, c, 0.0), 1e-4);
        EXPECT_LT(worst_fd_gap(p, c, 0.3), 1e-4);
    }
}

TEST(Policy, GradientScalesWithAdvantage) {
    Policy p(tiny_schema(), tiny_options(), 8);
    const std::vector<int> c{1, 0};
    const auto g1 = p.gradient(c, 1.0), g3 = p.gradient(c, -3.0);
    for (std::size_t k = 0; k < g1.size(); ++k) EXPECT_NEAR(g3[k], -3.0 * g1[k], 1e-12 + 1e-12 * std::abs(g1[k]));
}

TEST(Policy, PositiveAdvantageRaisesProbability) {
    DecisionSchema s;
    s.space = SpaceKind::Cell;
    s.decisions = {{"arm", 4}};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Policy p(s, {}, seed);
        for (int arm = 0; arm < 4; ++arm) {
            Policy q = p;
            const std::vector<int> c{arm};
            const double before = q.distributions(c)[0][arm];
            q.update(c, 1.0);
            EXPECT_GT(q.distributions(c)[0][arm], before);
            Policy r = p;
            r.update(c, -1.0);
            EXPECT_LT(r.distributions(c)[0][arm], before);
        }
    }
}

TEST(Policy, RewardEqualToBaselineLeavesParameters) {
    Policy p(decision_schema(SpaceKind::Joint), {}, 2);
    for (int i = 0; i < 5; ++i) {
        const auto s = p.sample();
        p.update(s.choices, 0.1 * i);
    }
    const std::vector<double> before(p.parameters().begin(), p.parameters().end());
    const auto s = p.sample();
    const auto info = p.update(s.choices, p.baseline());
    EXPECT_EQ(info.advantage, 0.0);
    EXPECT_EQ(std::vector<double>(p.parameters().begin(), p.parameters().end()), before);
}

TEST(Policy, BaselineIsExponentialAverage) {
    ControllerOptions o;
    o.baseline_decay = 0.9;
    Policy p(tiny_schema(), o, 1);
    double b = 0.0;
    for (double r : {1.0, 0.5, -0.25, 2.0}) {
        p.update(std::vector<int>{0, 0}, r);
        b = 0.9 * b + 0.1 * r;
        EXPECT_NEAR(p.baseline(), b, 1e-15);
    }
    EXPECT_EQ(p.step(), 4u);
}

TEST(Policy, NonFiniteUpdatesRaise) {
    Policy p(tiny_schema(), tiny_options(), 1);
    const std::vector<int> c{0, 0};
    EXPECT_THROW(p.update(c, std::numeric_limits<double>::quiet_NaN()), NonFiniteGradient);
    EXPECT_THROW(p.update(c, std::numeric_limits<double>::infinity()), NonFiniteGradient);
    // a huge step eventually overflows; the failing update must leave parameters untouched
    bool raised = false;
    for (int i = 0; i < 10 && !raised; ++i) {
        const std::vector<double> before(p.parameters().begin(), p.parameters().end());
        try {
            p.update(c, i % 2 == 0 ? 1.0 : -1.0, std::numeric_limits<double>::max());
        } catch (const NonFiniteGradient&) {
            raised = true;
            EXPECT_EQ(std::vector<double>(p.parameters().begin(), p.parameters().end()), before);
        }
    }
    EXPECT_TRUE(raised);
}

TEST(Policy, RejectsBadChoicesAndOptions) {
    Policy p(tiny_schema(), tiny_options(), 1);
    EXPECT_THROW(p.log_prob(std::vector<int>{3, 0}), Error);
    EXPECT_THROW(p.log_prob(std::vector<int>{0}), Error);
    ControllerOptions bad;
    bad.learning_rate = 0;
    EXPECT_THROW(Policy(tiny_schema(), bad, 1), ConfigError);
    EXPECT_THROW(Policy(DecisionSchema{}, {}, 1), Error);
}

TEST(Policy, CheckpointRoundTrip) {
    Policy p(decision_schema(SpaceKind::Joint, 5), {}, 4);
    for (int i = 0; i < 30; ++i) {
        const auto s = p.sample();
        p.update(s.choices, std::sin(i));
    }
    const auto text = p.to_json().dump();
    Policy q(decision_schema(SpaceKind::Joint, 5), {}, 99);
    q.load_json(nlohmann::json::parse(text));
    EXPECT_EQ(std::vector<double>(q.parameters().begin(), q.parameters().end()),
              std::vector<double>(p.parameters().begin(), p.parameters().end()));
    EXPECT_EQ(q.baseline(), p.baseline());
    EXPECT_EQ(q.deviation(), p.deviation());
    EXPECT_EQ(q.step(), p.step());
    for (int i = 0; i < 10; ++i) {
        const auto a = p.sample(), b = q.sample();
        EXPECT_EQ(a.choices, b.choices);
        p.update(a.choices, 0.5);
        q.update(b.choices, 0.5);
    }
}

TEST(Policy, CheckpointMismatchesAreParseErrors) {
    Policy p(decision_schema(SpaceKind::Joint, 5), {}, 4);
    const auto j = p.to_json();
    Policy other_schema(decision_schema(SpaceKind::Joint, 6), {}, 4);
    EXPECT_THROW(other_schema.load_json(j), ParseError);
    ControllerOptions small;
    small.hidden = 8;
    Policy other_size(decision_schema(SpaceKind::Joint, 5), small, 4);
    EXPECT_THROW(other_size.load_json(j), ParseError);
    Policy q(decision_schema(SpaceKind::Joint, 5), {}, 4);
    auto broken = j;
    broken["parameters"][0]["values"].erase(0);
    EXPECT_THROW(q.load_json(broken), ParseError);
    broken = j;
    broken.erase("rng");
    EXPECT_THROW(q.load_json(broken), ParseError);
    broken = j;
    broken["format"] = "other";
    EXPECT_THROW(q.load_json(broken), ParseError);
}

TEST(Policy, BanditConvergesForMostSeeds) {
    int converged = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) converged += bandit_steps_to_converge(seed) > 0;
    EXPECT_GE(converged, 9);
}
