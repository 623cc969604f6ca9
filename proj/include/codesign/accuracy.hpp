#pragma once

#include "codesign/calibration.hpp"
#include "codesign/cell_hash.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace codesign {

enum class AccuracySource { Table, Synthetic };

struct AccuracyRecord {
    Digest128 cell_digest;
    double accuracy = 0.0;
    AccuracySource source = AccuracySource::Synthetic;
};

inline constexpr std::string_view kAccuracyTableHeader = "#codesign-acc-v1";

/// digest -> accuracy map backed by a TSV file (`digest<TAB>accuracy`).
class AccuracyTable {
public:
    void insert(const Digest128& d, double accuracy) {
        if (!(accuracy >= 0.0 && accuracy <= 1.0)) throw Error("accuracy must lie in [0,1]");
        if (!map_.emplace(d, accuracy).second) throw DuplicateDigest("duplicate digest " + d.hex());
    }

    const double* find(const Digest128& d) const {
        auto it = map_.find(d);
        return it == map_.end() ? nullptr : &it->second;
    }

    std::size_t size() const { return map_.size(); }
    const std::unordered_map<Digest128, double, DigestHash>& records() const { return map_; }

    static AccuracyTable parse(std::istream& in) {
        AccuracyTable t;
        std::string line;
        std::size_t line_no = 0;
        bool header = false;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!header) {
                if (line != kAccuracyTableHeader) throw ParseError("expected header '" + std::string(kAccuracyTableHeader) + "'", line_no);
                header = true;
                continue;
            }
            if (line.empty()) continue;
            const auto tab = line.find('\t');
            if (tab == std::string::npos) throw ParseError("expected 'digest<TAB>accuracy'", line_no);
            Digest128 d;
            double acc = 0.0;
            try {
                d = Digest128::from_hex(line.substr(0, tab));
                std::size_t used = 0;
                const std::string value = line.substr(tab + 1);
                acc = std::stod(value, &used);
                if (used != value.size()) throw ParseError("trailing characters after accuracy", line_no);
            } catch (const ParseError& e) {
                throw ParseError(e.what(), line_no);
            } catch (const std::exception&) {
                throw ParseError("bad accuracy value", line_no);
            }
            if (!(acc >= 0.0 && acc <= 1.0)) throw ParseError("accuracy outside [0,1]", line_no);
            try {
                t.insert(d, acc);
            } catch (const DuplicateDigest&) {
                throw DuplicateDigest("line " + std::to_string(line_no) + ": duplicate digest " + d.hex());
            }
        }
        if (!header) throw ParseError("missing header line");
        return t;
    }

    static AccuracyTable load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ParseError("cannot open accuracy table '" + path + "'");
        return parse(in);
    }

    /// Writes rows sorted by digest, with enough digits to reload bit-exactly.
    void dump(std::ostream& out) const {
        std::vector<std::pair<Digest128, double>> rows(map_.begin(), map_.end());
        std::sort(rows.begin(), rows.end());
        out << kAccuracyTableHeader << '\n';
        out.precision(std::numeric_limits<double>::max_digits10);
        for (const auto& [d, acc] : rows) out << d.hex() << '\t' << acc << '\n';
    }

private:
    std::unordered_map<Digest128, double, DigestHash> map_;
};

/// Structural features the synthetic surrogate reads.
struct CellFeatures {
    int effective_depth = 0; ///< interior ops on the longest INPUT->OUTPUT path
    int conv3x3 = 0;
    int conv1x1 = 0;
    int pool = 0;
};

inline CellFeatures cell_features(const CellSpec& cell) {
    CellFeatures f;
    std::array<int, kMaxNodes> depth{};
    for (int v = 1; v < cell.num_nodes; ++v) {
        int best = -1;
        for (int u = 0; u < v; ++u)
            if (cell.has_edge(u, v)) best = std::max(best, depth[u]);
        const bool interior = v + 1 < cell.num_nodes;
        depth[v] = best < 0 ? 0 : best + (interior ? 1 : 0);
        if (interior) {
            switch (cell.op(v)) {
            case CellOp::Conv3x3: ++f.conv3x3; break;
            case CellOp::Conv1x1: ++f.conv1x1; break;
            case CellOp::MaxPool3x3: ++f.pool; break;
            }
        }
    }
    f.effective_depth = depth[cell.num_nodes - 1];
    return f;
}

/// Noise-free part of the surrogate:
/// sigmoid(bias + depth*d + conv3x3*b + conv1x1*c - pool*p).
inline double synthetic_accuracy_mean(const CellFeatures& f, const Calibration& cal) {
    const double z = cal.acc_bias + cal.acc_depth * f.effective_depth + cal.acc_conv3x3 * f.conv3x3 +
                     cal.acc_conv1x1 * f.conv1x1 - cal.acc_pool * f.pool;
    return 1.0 / (1.0 + std::exp(-z));
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Uniform in (0,1), 53 bits.
inline double unit_open(std::uint64_t bits) { return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53; }

} // namespace detail

/// Standard normal draw that depends only on (seed, digest); portable across platforms.
inline double digest_noise(std::uint64_t seed, const Digest128& d) {
    std::uint64_t state = seed ^ d.low64() ^ (d.high64() * 0xd1b54a32d192ed03ull);
    const double u1 = detail::unit_open(detail::splitmix64(state));
    const double u2 = detail::unit_open(detail::splitmix64(state));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// acc(cell): either an exact table lookup by digest or the seeded synthetic surrogate.
/// Accuracy never depends on the accelerator.
class AccuracyOracle {
public:
    struct Synthetic {
        Calibration calibration;
        std::uint64_t seed = 0;
    };

    static AccuracyOracle from_table(AccuracyTable table) { return AccuracyOracle(std::move(table)); }
    static AccuracyOracle synthetic(Calibration cal, std::uint64_t seed) { return AccuracyOracle(Synthetic{cal, seed}); }

    AccuracySource source() const {
        return std::holds_alternative<AccuracyTable>(backend_) ? AccuracySource::Table : AccuracySource::Synthetic;
    }

    AccuracyRecord accuracy(const CellSpec& cell) const { return accuracy(cell, cell_hash(cell)); }

    /// Same as accuracy(cell) when `digest` is cell_hash(cell); saves rehashing.
    AccuracyRecord accuracy(const CellSpec& cell, const Digest128& digest) const {
        if (const auto* t = std::get_if<AccuracyTable>(&backend_)) {
            const double* acc = t->find(digest);
            if (!acc) throw NotInTable("cell " + digest.hex() + " not in accuracy table");
            return {digest, *acc, AccuracySource::Table};
        }
        const auto& s = std::get<Synthetic>(backend_);
        const double mean = synthetic_accuracy_mean(cell_features(cell), s.calibration);
        const double noisy = mean + s.calibration.acc_noise_std * digest_noise(s.seed, digest);
        return {digest, std::clamp(noisy, 0.0, 1.0), AccuracySource::Synthetic};
    }

private:
    explicit AccuracyOracle(AccuracyTable t) : backend_(std::move(t)) {}
    explicit AccuracyOracle(Synthetic s) : backend_(s) {}

    std::variant<AccuracyTable, Synthetic> backend_;
};

} // namespace codesign
