#pragma once

#include "codesign/evaluator.hpp"
#include "codesign/reward.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <mutex>
#include <set>
#include <sstream>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace codesign {

/// a dominates b: no worse in area, latency and accuracy, strictly better in one.
inline bool dominates(const Metrics& a, const Metrics& b) {
    if (a.area_mm2 > b.area_mm2 || a.latency_ms > b.latency_ms || a.accuracy < b.accuracy) return false;
    return a.area_mm2 < b.area_mm2 || a.latency_ms < b.latency_ms || a.accuracy > b.accuracy;
}

/// Ascending area, then latency, then descending accuracy.
inline bool frontier_order(const Metrics& a, const Metrics& b) {
    if (a.area_mm2 != b.area_mm2) return a.area_mm2 < b.area_mm2;
    if (a.latency_ms != b.latency_ms) return a.latency_ms < b.latency_ms;
    return a.accuracy > b.accuracy;
}

/// Streaming non-dominated archive. An incoming point is dropped if an archived
/// point dominates it or has identical metrics (counted as a duplicate; the
/// first-seen point is kept); otherwise it is added and every archived point it
/// dominates is evicted. Insertion order of survivors is preserved.
template <typename Payload>
class ParetoArchive {
public:
    struct Item {
        Payload payload;
        Metrics metrics;
    };

    bool insert(const Payload& payload, const Metrics& m) {
        ++seen_;
        for (const Item& it : items_) {
            if (it.metrics == m) {
                ++duplicates_;
                return false;
            }
            if (dominates(it.metrics, m)) return false;
        }
        std::erase_if(items_, [&](const Item& it) { return dominates(m, it.metrics); });
        items_.push_back({payload, m});
        return true;
    }

    /// Folds another archive in; the result is the archive of this stream followed by `other`'s.
    void merge(const ParetoArchive& other) {
        for (const Item& it : other.items_) insert(it.payload, it.metrics);
        duplicates_ += other.duplicates_;
        seen_ += other.seen_ - other.items_.size();
    }

    const std::vector<Item>& items() const { return items_; }
    std::uint64_t duplicates() const { return duplicates_; }
    std::uint64_t seen() const { return seen_; }

    std::vector<Item> sorted() const {
        std::vector<Item> out = items_;
        std::stable_sort(out.begin(), out.end(), [](const Item& a, const Item& b) { return frontier_order(a.metrics, b.metrics); });
        return out;
    }

private:
    std::vector<Item> items_;
    std::uint64_t duplicates_ = 0;
    std::uint64_t seen_ = 0;
};

struct FrontierEntry {
    SearchPoint point;
    Metrics metrics;
};

/// Exactly the non-dominated subset, ordered by ascending area then latency.
template <typename Range>
std::vector<FrontierEntry> frontier(const Range& points) {
    ParetoArchive<SearchPoint> archive;
    for (const auto& [point, metrics] : points) archive.insert(point, metrics);
    std::vector<FrontierEntry> out;
    for (auto& it : archive.sorted()) out.push_back({it.payload, it.metrics});
    return out;
}

struct JointEnumeration {
    std::vector<FrontierEntry> frontier;
    std::uint64_t evaluated = 0;  ///< cell x hw pairs pushed through the filter
    std::size_t cells = 0;
    std::size_t hw_configs = 0;
    std::uint64_t duplicates = 0; ///< pairs dropped for repeating a kept metric triple
};

/// Streams every (cell, hw) pair through the archive. Accuracy is computed once
/// per cell, area once per hw, latency once per (cell, latency projection).
/// Each cell's pairs are filtered locally first (a pair dominated inside its cell
/// is dominated globally), then survivors are merged in cell order, so the result
/// does not depend on `parallelism`.
inline JointEnumeration enumerate_joint(std::span<const CellSpec> cells, std::span<const HwConfig> hws, Evaluator& ev,
                                        int parallelism = 1,
                                        const std::function<void(std::size_t, std::size_t)>& progress = {}) {
    if (parallelism < 1) throw Error("parallelism must be >= 1");
    for (const auto& hw : hws)
        if (!is_valid_hw(hw)) throw InvalidPoint("hw config has a value outside its option set");
    std::vector<double> area(hws.size());
    std::vector<int> projection(hws.size());
    for (std::size_t h = 0; h < hws.size(); ++h) {
        area[h] = ev.area(hws[h]).mm2;
        projection[h] = latency_projection(hws[h]);
    }

    struct Local {
        CellSpec cell;
        ParetoArchive<int> archive;
    };
    std::vector<Local> local(cells.size());
    std::vector<std::exception_ptr> errors(cells.size());
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::mutex progress_mu;
    auto worker = [&] {
        for (std::size_t c = next++; c < cells.size(); c = next++) {
            try {
                const CellVerdict v = validate_cell(cells[c]);
                if (!v.accepted()) throw InvalidPoint("cell " + std::to_string(c) + " rejected: " + std::string(to_string(v.status)));
                const Digest128 digest = cell_hash(v.cell);
                const double acc = ev.accuracy(v.cell, digest).accuracy;
                const auto lat = ev.latency_by_projection(v.cell, digest);
                local[c].cell = v.cell;
                for (std::size_t h = 0; h < hws.size(); ++h)
                    local[c].archive.insert(static_cast<int>(h), Metrics{area[h], lat[projection[h]], acc});
            } catch (...) {
                errors[c] = std::current_exception();
            }
            const std::size_t d = ++done;
            if (progress) {
                std::lock_guard lock(progress_mu);
                progress(d, cells.size());
            }
        }
    };
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(parallelism), std::max<std::size_t>(cells.size(), 1));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    ParetoArchive<SearchPoint> global;
    JointEnumeration out;
    for (const Local& l : local) {
        out.duplicates += l.archive.duplicates();
        for (const auto& it : l.archive.items()) global.insert(SearchPoint{l.cell, hws[it.payload]}, it.metrics);
    }
    out.duplicates += global.duplicates();
    for (auto& it : global.sorted()) out.frontier.push_back({it.payload, it.metrics});
    out.cells = cells.size();
    out.hw_configs = hws.size();
    out.evaluated = static_cast<std::uint64_t>(cells.size()) * hws.size();
    return out;
}

/// Every cell against the full accelerator space.
inline JointEnumeration enumerate_joint(std::span<const CellSpec> cells, Evaluator& ev, int parallelism = 1,
                                        const std::function<void(std::size_t, std::size_t)>& progress = {}) {
    const std::vector<HwConfig> hws = enumerate_hw();
    return enumerate_joint(cells, hws, ev, parallelism, progress);
}

/// Feasible entries by reward, best first (ties keep frontier order), at most k.
inline std::vector<std::pair<FrontierEntry, RewardOutcome>> top_k_by_reward(std::span<const FrontierEntry> front,
                                                                            const RewardSpec& spec, std::size_t k) {
    if (k < 1) throw Error("k must be >= 1");
    std::vector<std::pair<FrontierEntry, RewardOutcome>> ranked;
    for (const auto& e : front) {
        const RewardOutcome r = reward(e.metrics, spec);
        if (r.feasible) ranked.push_back({e, r});
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second.value > b.second.value; });
    if (ranked.size() > k) ranked.resize(k);
    return ranked;
}

struct FrontierStats {
    std::size_t size = 0;
    std::size_t distinct_cells = 0;
    std::size_t distinct_hw = 0;
};

inline FrontierStats frontier_stats(std::span<const FrontierEntry> front) {
    std::set<Digest128> cells;
    std::set<int> hws;
    for (const auto& e : front) {
        cells.insert(cell_hash(e.point.cell));
        hws.insert(hw_index(e.point.hw));
    }
    return {front.size(), cells.size(), hws.size()};
}

// ---------------------------------------------------------------------------
// Frontier CSV
// ---------------------------------------------------------------------------

inline constexpr std::string_view kFrontierCsvMagic = "#codesign-frontier-v1";
inline constexpr std::string_view kFrontierCsvColumns = "point,area_mm2,latency_ms,accuracy,perf_per_area";

inline void write_frontier_csv(std::ostream& out, std::span<const FrontierEntry> front) {
    out << kFrontierCsvMagic << '\n' << kFrontierCsvColumns << '\n';
    out.precision(std::numeric_limits<double>::max_digits10);
    for (const auto& e : front)
        out << '"' << encode_point(e.point) << "\"," << e.metrics.area_mm2 << ',' << e.metrics.latency_ms << ','
            << e.metrics.accuracy << ',' << perf_per_area(e.metrics) << '\n';
}

inline std::vector<FrontierEntry> read_frontier_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<FrontierEntry> out;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1) {
            if (line != kFrontierCsvMagic) throw ParseError("expected '" + std::string(kFrontierCsvMagic) + "'", line_no);
            continue;
        }
        if (line_no == 2) {
            if (line != kFrontierCsvColumns) throw ParseError("unexpected column header", line_no);
            continue;
        }
        if (line.empty()) continue;
        if (line.front() != '"') throw ParseError("point field must be quoted", line_no);
        const auto close = line.find('"', 1);
        if (close == std::string::npos || close + 1 >= line.size() || line[close + 1] != ',')
            throw ParseError("unterminated point field", line_no);
        FrontierEntry e;
        try {
            e.point = parse_point(line.substr(1, close - 1));
        } catch (const ParseError& err) {
            throw ParseError(err.what(), line_no);
        }
        std::vector<double> nums;
        std::stringstream ss(line.substr(close + 2));
        std::string field;
        while (std::getline(ss, field, ',')) {
            try {
                nums.push_back(std::stod(field));
            } catch (const std::exception&) {
                throw ParseError("bad number '" + field + "'", line_no);
            }
        }
        if (nums.size() != 4) throw ParseError("expected 4 numeric fields", line_no);
        e.metrics = {nums[0], nums[1], nums[2]};
        out.push_back(e);
    }
    if (line_no < 2) throw ParseError("missing frontier header");
    return out;
}

} // namespace codesign
