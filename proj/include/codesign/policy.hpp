#pragma once

#include "codesign/design_space.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace codesign {

struct ControllerOptions {
    int hidden = 64;
    int embedding = 16;
    double learning_rate = 0.01;
    double baseline_decay = 0.95;
    double entropy_weight = 0.0;
    double init_scale = 0.1;        ///< parameters start uniform in [-s, s]; 0 gives an all-zero policy
    bool normalize_advantage = true; ///< divide (reward - baseline) by a running deviation
    double advantage_floor = 1e-3;   ///< lower bound on that deviation

    void check() const {
        if (hidden < 1) throw ConfigError("controller.hidden", "must be >= 1");
        if (embedding < 1) throw ConfigError("controller.embedding", "must be >= 1");
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("controller.learning_rate", "must be > 0");
        if (!(baseline_decay >= 0.0 && baseline_decay < 1.0)) throw ConfigError("controller.baseline_decay", "must lie in [0,1)");
        if (!(entropy_weight >= 0.0)) throw ConfigError("controller.entropy_weight", "must be >= 0");
        if (!(init_scale >= 0.0)) throw ConfigError("controller.init_scale", "must be >= 0");
        if (!(advantage_floor > 0.0)) throw ConfigError("controller.advantage_floor", "must be > 0");
    }
};

struct PolicySample {
    std::vector<int> choices;
    std::vector<double> log_probs;
};

struct UpdateInfo {
    double advantage = 0.0; ///< reward - baseline, before any normalization
    double scaled_advantage = 0.0;
    double baseline = 0.0;  ///< after the update
};

/// Uniform double in [0,1) from the top 53 bits of one generator draw.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Autoregressive controller: one LSTM cell shared across decisions, a learned
/// start token, an embedding per (decision, option) feeding the next step, and a
/// linear head per decision. All parameters live in one flat vector.
class Policy {
public:
    Policy(DecisionSchema schema, ControllerOptions opts, std::uint64_t seed)
        : schema_(std::move(schema)), opts_(opts), rng_(seed) {
        opts_.check();
        if (schema_.decisions.empty()) throw Error("policy needs at least one decision");
        build_layout();
        params_.assign(total_, 0.0);
        if (opts_.init_scale > 0.0) {
            std::mt19937_64 init(seed ^ 0x5bd1e9955bd1e995ull);
            for (double& p : params_) p = (2.0 * uniform01(init) - 1.0) * opts_.init_scale;
        }
    }

    const DecisionSchema& schema() const { return schema_; }
    const ControllerOptions& options() const { return opts_; }
    std::span<const double> parameters() const { return params_; }
    std::span<double> parameters() { return params_; }
    double baseline() const { return baseline_; }
    double deviation() const { return std::sqrt(variance_); }
    std::uint64_t step() const { return step_; }

    /// Draws one decision vector using the internal generator.
    PolicySample sample() {
        PolicySample s;
        Forward f = start_forward();
        for (std::size_t d = 0; d < schema_.size(); ++d) {
            advance(f, d, d ? embedding_of(d - 1, s.choices.back()) : start_token());
            const std::vector<double> p = softmax(logits(f.h, d));
            const double u = uniform01(rng_);
            int pick = static_cast<int>(p.size()) - 1;
            double acc = 0.0;
            for (std::size_t k = 0; k < p.size(); ++k) {
                acc += p[k];
                if (u < acc) {
                    pick = static_cast<int>(k);
                    break;
                }
            }
            s.choices.push_back(pick);
            s.log_probs.push_back(std::log(p[pick]));
        }
        return s;
    }

    /// Per-decision option probabilities along a fixed decision vector (teacher forcing).
    std::vector<std::vector<double>> distributions(std::span<const int> choices) const {
        check_choices(choices);
        std::vector<std::vector<double>> out;
        Forward f = start_forward();
        for (std::size_t d = 0; d < schema_.size(); ++d) {
            advance(f, d, d ? embedding_of(d - 1, choices[d - 1]) : start_token());
            out.push_back(softmax(logits(f.h, d)));
        }
        return out;
    }

    double log_prob(std::span<const int> choices) const {
        const auto dist = distributions(choices);
        double lp = 0.0;
        for (std::size_t d = 0; d < dist.size(); ++d) lp += std::log(dist[d][choices[d]]);
        return lp;
    }

    double entropy(std::span<const int> choices) const {
        double h = 0.0;
        for (const auto& p : distributions(choices))
            for (double q : p)
                if (q > 0.0) h -= q * std::log(q);
        return h;
    }

    /// Gradient of advantage * sum_t log pi(choice_t) + entropy_weight * sum_t H(pi_t)
    /// with respect to the flat parameter vector, by backpropagation through time.
    std::vector<double> gradient(std::span<const int> choices, double advantage, double entropy_weight = 0.0) const {
        check_choices(choices);
        const std::size_t T = schema_.size();
        const int H = opts_.hidden;
        std::vector<Forward> steps;
        std::vector<std::vector<double>> probs;
        Forward f = start_forward();
        for (std::size_t d = 0; d < T; ++d) {
            advance(f, d, d ? embedding_of(d - 1, choices[d - 1]) : start_token());
            steps.push_back(f);
            probs.push_back(softmax(logits(f.h, d)));
        }

        std::vector<double> g(total_, 0.0);
        std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0);
        for (std::size_t t = T; t-- > 0;) {
            const Forward& s = steps[t];
            const std::vector<double>& p = probs[t];
            const int n = static_cast<int>(p.size());
            std::vector<double> dlogit(n);
            double ent = 0.0;
            for (double q : p)
                if (q > 0.0) ent -= q * std::log(q);
            for (int k = 0; k < n; ++k) {
                dlogit[k] = advantage * ((k == choices[t] ? 1.0 : 0.0) - p[k]);
                if (entropy_weight != 0.0 && p[k] > 0.0) dlogit[k] -= entropy_weight * p[k] * (std::log(p[k]) + ent);
            }
            std::vector<double> dh = dh_next;
            const double* W = &params_[head_w_[t]];
            for (int k = 0; k < n; ++k) {
                g[head_b_[t] + k] += dlogit[k];
                for (int j = 0; j < H; ++j) {
                    g[head_w_[t] + k * H + j] += dlogit[k] * s.h[j];
                    dh[j] += W[k * H + j] * dlogit[k];
                }
            }
            // gate order in z: i, f, g, o
            std::vector<double> dz(4 * H);
            for (int j = 0; j < H; ++j) {
                const double tc = std::tanh(s.c[j]);
                const double dc = dc_next[j] + dh[j] * s.o[j] * (1.0 - tc * tc);
                const double di = dc * s.g[j];
                const double dgv = dc * s.i[j];
                const double df = dc * s.c_prev[j];
                const double dov = dh[j] * tc;
                dz[j] = di * s.i[j] * (1.0 - s.i[j]);
                dz[H + j] = df * s.f[j] * (1.0 - s.f[j]);
                dz[2 * H + j] = dgv * (1.0 - s.g[j] * s.g[j]);
                dz[3 * H + j] = dov * s.o[j] * (1.0 - s.o[j]);
                dc_next[j] = dc * s.f[j];
            }
            const int E = opts_.embedding;
            const std::size_t x_off = t ? emb_[t - 1] + static_cast<std::size_t>(choices[t - 1]) * E : start_;
            std::fill(dh_next.begin(), dh_next.end(), 0.0);
            for (int r = 0; r < 4 * H; ++r) {
                const double dzr = dz[r];
                if (dzr == 0.0) continue;
                g[lstm_b_ + r] += dzr;
                for (int e = 0; e < E; ++e) {
                    g[lstm_wx_ + r * E + e] += dzr * s.x[e];
                    g[x_off + e] += params_[lstm_wx_ + r * E + e] * dzr;
                }
                for (int j = 0; j < H; ++j) {
                    g[lstm_wh_ + r * H + j] += dzr * s.h_prev[j];
                    dh_next[j] += params_[lstm_wh_ + r * H + j] * dzr;
                }
            }
        }
        return g;
    }

    /// REINFORCE step: theta += lr * grad[(r - b) * sum log pi + beta * H], then the
    /// baseline moves toward r. A reward equal to the baseline leaves theta unchanged
    /// (when the entropy weight is 0).
    UpdateInfo update(std::span<const int> choices, double reward) { return update(choices, reward, opts_.learning_rate); }

    UpdateInfo update(std::span<const int> choices, double reward, double learning_rate) {
        if (!std::isfinite(reward)) throw NonFiniteGradient("reward is not finite");
        UpdateInfo info;
        info.advantage = reward - baseline_;
        info.scaled_advantage = info.advantage;
        if (opts_.normalize_advantage) info.scaled_advantage /= std::max(std::sqrt(variance_), opts_.advantage_floor);
        if (info.scaled_advantage != 0.0 || opts_.entropy_weight != 0.0) {
            const std::vector<double> g = gradient(choices, info.scaled_advantage, opts_.entropy_weight);
            std::vector<double> next = params_;
            for (std::size_t k = 0; k < next.size(); ++k) {
                next[k] += learning_rate * g[k];
                if (!std::isfinite(next[k])) throw NonFiniteGradient("parameter " + std::to_string(k) + " became non-finite");
            }
            params_ = std::move(next);
        }
        const double a = opts_.baseline_decay;
        variance_ = a * variance_ + (1.0 - a) * info.advantage * info.advantage;
        baseline_ = a * baseline_ + (1.0 - a) * reward;
        info.baseline = baseline_;
        ++step_;
        return info;
    }

    // -- checkpointing ------------------------------------------------------

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["format"] = "codesign-policy-v1";
        j["schema"] = schema_.fingerprint();
        j["hidden"] = opts_.hidden;
        j["embedding"] = opts_.embedding;
        j["baseline"] = baseline_;
        j["variance"] = variance_;
        j["step"] = step_;
        std::ostringstream rng;
        rng << rng_;
        j["rng"] = rng.str();
        nlohmann::json arrays = nlohmann::json::array();
        for (const auto& b : blocks_) {
            nlohmann::json a;
            a["name"] = b.name;
            a["dims"] = {b.rows, b.cols};
            a["values"] = std::vector<double>(params_.begin() + static_cast<std::ptrdiff_t>(b.offset),
                                              params_.begin() + static_cast<std::ptrdiff_t>(b.offset + b.rows * b.cols));
            arrays.push_back(std::move(a));
        }
        j["parameters"] = std::move(arrays);
        return j;
    }

    /// Restores parameters, baseline, step and RNG state. The checkpoint must come
    /// from a policy over the same schema and sizes.
    void load_json(const nlohmann::json& j) {
        try {
            if (j.at("format") != "codesign-policy-v1") throw ParseError("unknown checkpoint format");
            if (j.at("schema").get<std::string>() != schema_.fingerprint())
                throw ParseError("checkpoint was taken on a different decision schema");
            if (j.at("hidden").get<int>() != opts_.hidden || j.at("embedding").get<int>() != opts_.embedding)
                throw ParseError("checkpoint controller sizes differ");
            const auto& arrays = j.at("parameters");
            if (arrays.size() != blocks_.size()) throw ParseError("checkpoint has the wrong number of parameter arrays");
            std::vector<double> next(total_);
            for (std::size_t b = 0; b < blocks_.size(); ++b) {
                const auto& a = arrays[b];
                const Block& blk = blocks_[b];
                if (a.at("name").get<std::string>() != blk.name) throw ParseError("unexpected parameter array " + a.at("name").get<std::string>());
                const auto dims = a.at("dims").get<std::vector<std::size_t>>();
                if (dims != std::vector<std::size_t>{blk.rows, blk.cols}) throw ParseError("dimension mismatch in " + blk.name);
                const auto values = a.at("values").get<std::vector<double>>();
                if (values.size() != blk.rows * blk.cols) throw ParseError("value count mismatch in " + blk.name);
                for (double v : values)
                    if (!std::isfinite(v)) throw ParseError("non-finite value in " + blk.name);
                std::copy(values.begin(), values.end(), next.begin() + static_cast<std::ptrdiff_t>(blk.offset));
            }
            std::mt19937_64 rng;
            std::istringstream rs(j.at("rng").get<std::string>());
            rs >> rng;
            if (!rs) throw ParseError("bad rng state");
            params_ = std::move(next);
            baseline_ = j.at("baseline").get<double>();
            variance_ = j.at("variance").get<double>();
            step_ = j.at("step").get<std::uint64_t>();
            rng_ = rng;
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("checkpoint: ") + e.what());
        }
    }

private:
    struct Forward {
        std::vector<double> x, h_prev, c_prev, i, f, g, o, c, h;
    };
    struct Block {
        std::string name;
        std::size_t offset, rows, cols;
    };

    void build_layout() {
        const std::size_t H = opts_.hidden, E = opts_.embedding;
        auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
            blocks_.push_back({std::move(name), total_, rows, cols});
            total_ += rows * cols;
            return blocks_.back().offset;
        };
        start_ = add("start", 1, E);
        for (const auto& d : schema_.decisions) emb_.push_back(add("embed." + d.name, d.options, E));
        lstm_wx_ = add("lstm.wx", 4 * H, E);
        lstm_wh_ = add("lstm.wh", 4 * H, H);
        lstm_b_ = add("lstm.b", 1, 4 * H);
        for (const auto& d : schema_.decisions) {
            head_w_.push_back(add("head." + d.name + ".w", d.options, H));
            head_b_.push_back(add("head." + d.name + ".b", 1, d.options));
        }
    }

    void check_choices(std::span<const int> choices) const {
        if (choices.size() != schema_.size()) throw Error("decision vector length does not match schema");
        for (std::size_t d = 0; d < choices.size(); ++d)
            if (choices[d] < 0 || choices[d] >= schema_.decisions[d].options) throw Error("decision out of range");
    }

    std::span<const double> start_token() const { return {params_.data() + start_, static_cast<std::size_t>(opts_.embedding)}; }
    std::span<const double> embedding_of(std::size_t d, int option) const {
        return {params_.data() + emb_[d] + static_cast<std::size_t>(option) * opts_.embedding, static_cast<std::size_t>(opts_.embedding)};
    }

    Forward start_forward() const {
        Forward f;
        f.h.assign(opts_.hidden, 0.0);
        f.c.assign(opts_.hidden, 0.0);
        return f;
    }

    static double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

    void advance(Forward& f, std::size_t, std::span<const double> x) const {
        const int H = opts_.hidden, E = opts_.embedding;
        f.x.assign(x.begin(), x.end());
        f.h_prev = f.h;
        f.c_prev = f.c;
        std::vector<double> z(4 * H);
        for (int r = 0; r < 4 * H; ++r) {
            double s = params_[lstm_b_ + r];
            const double* wx = &params_[lstm_wx_ + r * E];
            for (int e = 0; e < E; ++e) s += wx[e] * f.x[e];
            const double* wh = &params_[lstm_wh_ + r * H];
            for (int j = 0; j < H; ++j) s += wh[j] * f.h_prev[j];
            z[r] = s;
        }
        f.i.resize(H);
        f.f.resize(H);
        f.g.resize(H);
        f.o.resize(H);
        for (int j = 0; j < H; ++j) {
            f.i[j] = sigmoid(z[j]);
            f.f[j] = sigmoid(z[H + j]);
            f.g[j] = std::tanh(z[2 * H + j]);
            f.o[j] = sigmoid(z[3 * H + j]);
            f.c[j] = f.f[j] * f.c_prev[j] + f.i[j] * f.g[j];
            f.h[j] = f.o[j] * std::tanh(f.c[j]);
        }
    }

    std::vector<double> logits(const std::vector<double>& h, std::size_t d) const {
        const int n = schema_.decisions[d].options, H = opts_.hidden;
        std::vector<double> out(n);
        for (int k = 0; k < n; ++k) {
            double s = params_[head_b_[d] + k];
            const double* w = &params_[head_w_[d] + k * H];
            for (int j = 0; j < H; ++j) s += w[j] * h[j];
            out[k] = s;
        }
        return out;
    }

    static std::vector<double> softmax(std::vector<double> z) {
        const double m = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (double& v : z) sum += (v = std::exp(v - m));
        for (double& v : z) v /= sum;
        return z;
    }

    DecisionSchema schema_;
    ControllerOptions opts_;
    std::mt19937_64 rng_;
    std::vector<double> params_;
    std::vector<Block> blocks_;
    std::size_t total_ = 0;
    std::size_t start_ = 0, lstm_wx_ = 0, lstm_wh_ = 0, lstm_b_ = 0;
    std::vector<std::size_t> emb_, head_w_, head_b_;
    double baseline_ = 0.0;
    double variance_ = 1.0;
    std::uint64_t step_ = 0;
};

} // namespace codesign
