#pragma once

#include "codesign/accuracy.hpp"
#include "codesign/area_model.hpp"
#include "codesign/latency.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <unordered_map>
#include <vector>

namespace codesign {

/// The metric triple of one design point.
struct Metrics {
    double area_mm2 = 0.0;
    double latency_ms = 0.0;
    double accuracy = 0.0;

    bool valid() const {
        return std::isfinite(area_mm2) && std::isfinite(latency_ms) && std::isfinite(accuracy) && area_mm2 > 0.0 &&
               latency_ms > 0.0 && accuracy >= 0.0 && accuracy <= 1.0;
    }

    friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// Thread-safe memo table with optional LRU bound (capacity 0 = unbounded).
template <typename Key, typename Value, typename Hash = std::hash<Key>>
class MemoCache {
public:
    explicit MemoCache(std::size_t capacity = 0) : capacity_(capacity) {}

    std::optional<Value> get(const Key& k) {
        std::lock_guard lock(mu_);
        auto it = index_.find(k);
        if (it == index_.end()) {
            ++misses_;
            return std::nullopt;
        }
        ++hits_;
        if (capacity_) order_.splice(order_.begin(), order_, it->second);
        return it->second->second;
    }

    void put(const Key& k, const Value& v) {
        std::lock_guard lock(mu_);
        auto it = index_.find(k);
        if (it != index_.end()) return;
        order_.emplace_front(k, v);
        index_.emplace(k, order_.begin());
        if (capacity_ && order_.size() > capacity_) {
            index_.erase(order_.back().first);
            order_.pop_back();
        }
    }

    std::size_t size() const {
        std::lock_guard lock(mu_);
        return order_.size();
    }
    std::uint64_t hits() const {
        std::lock_guard lock(mu_);
        return hits_;
    }
    std::uint64_t misses() const {
        std::lock_guard lock(mu_);
        return misses_;
    }

private:
    std::size_t capacity_;
    mutable std::mutex mu_;
    std::list<std::pair<Key, Value>> order_;
    std::unordered_map<Key, typename std::list<std::pair<Key, Value>>::iterator, Hash> index_;
    std::uint64_t hits_ = 0;
    std::uint64_t misses_ = 0;
};

struct PairKey {
    Digest128 cell;
    int hw = 0;
    friend bool operator==(const PairKey&, const PairKey&) = default;
};

struct PairKeyHash {
    std::size_t operator()(const PairKey& k) const noexcept {
        return DigestHash{}(k.cell) ^ (static_cast<std::size_t>(k.hw) * 0x9e3779b97f4a7c15ull);
    }
};

struct CacheCounters {
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
};

struct EvaluatorStats {
    CacheCounters accuracy;
    CacheCounters area;
    CacheCounters latency;
};

struct Evaluation {
    Metrics metrics;
    Digest128 digest;
    bool cache_hit = false; ///< the (cell, hw) latency was already memoized
};

/// Assembles Metrics from the accuracy oracle, the area model and the scheduled
/// latency, memoizing each on the inputs it actually depends on: accuracy by cell
/// digest, area by hw, latency by (cell digest, hw). Isomorphic cells share entries.
class Evaluator {
public:
    struct Options {
        SkeletonSpec skeleton;
        Calibration calibration;
        std::size_t latency_cache_capacity = 0;
    };

    Evaluator(std::shared_ptr<const LatencyTable> table, std::shared_ptr<const AccuracyOracle> oracle, Options opts)
        : table_(std::move(table)), oracle_(std::move(oracle)), opts_(opts), latency_cache_(opts.latency_cache_capacity) {
        if (!table_ || !oracle_) throw Error("evaluator needs a latency table and an accuracy oracle");
        if (!opts_.skeleton.valid()) throw Error("invalid skeleton");
    }

    const Options& options() const { return opts_; }
    const LatencyTable& table() const { return *table_; }
    const AccuracyOracle& oracle() const { return *oracle_; }

    Evaluation evaluate_detailed(const SearchPoint& point) {
        const CellVerdict v = validate_cell(point.cell);
        if (!v.accepted()) throw InvalidPoint("cell rejected: " + std::string(to_string(v.status)) + " (" + v.reason + ")");
        if (!is_valid_hw(point.hw)) throw InvalidPoint("hw config has a value outside its option set");
        const Digest128 digest = cell_hash(v.cell);
        Evaluation e;
        e.digest = digest;
        e.metrics.accuracy = accuracy(v.cell, digest).accuracy;
        e.metrics.area_mm2 = area(point.hw).mm2;
        const PairKey key{digest, hw_index(point.hw)};
        if (auto hit = latency_cache_.get(key)) {
            e.metrics.latency_ms = *hit;
            e.cache_hit = true;
        } else {
            e.metrics.latency_ms = latency(*network(v.cell, digest), point.hw, *table_);
            latency_cache_.put(key, e.metrics.latency_ms);
        }
        return e;
    }

    Metrics evaluate(const SearchPoint& point) { return evaluate_detailed(point).metrics; }

    /// Evaluates in parallel; output order follows input order and values equal the
    /// sequential results. The lowest-index failure is rethrown as BatchError.
    std::vector<Metrics> evaluate_batch(std::span<const SearchPoint> points, int parallelism = 1) {
        if (parallelism < 1) throw Error("parallelism must be >= 1");
        std::vector<Metrics> out(points.size());
        std::vector<std::exception_ptr> errors(points.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i = next++; i < points.size(); i = next++) {
                try {
                    out[i] = evaluate(points[i]);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        };
        const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(parallelism), points.size());
        if (workers <= 1) {
            worker();
        } else {
            std::vector<std::jthread> pool;
            for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        }
        for (std::size_t i = 0; i < errors.size(); ++i) {
            if (!errors[i]) continue;
            try {
                std::rethrow_exception(errors[i]);
            } catch (const std::exception& e) {
                throw BatchError(i, e.what(), errors[i]);
            }
        }
        return out;
    }

    AccuracyRecord accuracy(const CellSpec& canonical, const Digest128& digest) {
        if (auto hit = accuracy_cache_.get(digest)) return {digest, *hit, oracle_->source()};
        const AccuracyRecord r = oracle_->accuracy(canonical, digest);
        accuracy_cache_.put(digest, r.accuracy);
        return r;
    }

    AreaBreakdown area(const HwConfig& hw) {
        const int key = hw_index(hw);
        if (auto hit = area_cache_.get(key)) return *hit;
        const AreaBreakdown a = codesign::area(hw, opts_.calibration);
        area_cache_.put(key, a);
        return a;
    }

    /// Compiled network of a canonical cell, memoized by digest.
    std::shared_ptr<const CompiledNetwork> network(const CellSpec& canonical, const Digest128& digest) {
        if (auto hit = network_cache_.get(digest)) return *hit;
        auto net = std::make_shared<const CompiledNetwork>(compile_network(canonical, opts_.skeleton, *table_));
        network_cache_.put(digest, net);
        return net;
    }

    /// Latency of a canonical cell under every latency projection, bypassing the pair
    /// cache (used by exhaustive enumeration, where pairs are visited once).
    std::array<double, kNumLatencyProjections> latency_by_projection(const CellSpec& canonical, const Digest128& digest) {
        return codesign::latency_by_projection(*network(canonical, digest), *table_);
    }

    EvaluatorStats stats() const {
        return {{accuracy_cache_.hits(), accuracy_cache_.misses()},
                {area_cache_.hits(), area_cache_.misses()},
                {latency_cache_.hits(), latency_cache_.misses()}};
    }

private:
    std::shared_ptr<const LatencyTable> table_;
    std::shared_ptr<const AccuracyOracle> oracle_;
    Options opts_;
    MemoCache<Digest128, double, DigestHash> accuracy_cache_;
    MemoCache<int, AreaBreakdown> area_cache_;
    MemoCache<PairKey, double, PairKeyHash> latency_cache_;
    MemoCache<Digest128, std::shared_ptr<const CompiledNetwork>, DigestHash> network_cache_;
};

} // namespace codesign
