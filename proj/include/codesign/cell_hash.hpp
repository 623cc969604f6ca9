#pragma once

#include "codesign/design_space.hpp"

#include <sodium.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace codesign {

/// 128-bit digest identifying a cell up to isomorphism.
struct Digest128 {
    std::array<std::uint8_t, 16> bytes{};

    std::string hex() const {
        static constexpr char kHex[] = "0123456789abcdef";
        std::string s(32, '0');
        for (int i = 0; i < 16; ++i) {
            s[2 * i] = kHex[bytes[i] >> 4];
            s[2 * i + 1] = kHex[bytes[i] & 0xf];
        }
        return s;
    }

    static Digest128 from_hex(std::string_view text) {
        if (text.size() != 32) throw ParseError("digest must be 32 hex characters");
        auto nibble = [](char c) -> int {
            if (c >= '0' && c <= '9') return c - '0';
            if (c >= 'a' && c <= 'f') return c - 'a' + 10;
            if (c >= 'A' && c <= 'F') return c - 'A' + 10;
            throw ParseError(std::string("bad hex character '") + c + "'");
        };
        Digest128 d;
        for (int i = 0; i < 16; ++i) d.bytes[i] = static_cast<std::uint8_t>(nibble(text[2 * i]) << 4 | nibble(text[2 * i + 1]));
        return d;
    }

    std::uint64_t low64() const {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
        return v;
    }
    std::uint64_t high64() const {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[8 + i]) << (8 * i);
        return v;
    }

    friend auto operator<=>(const Digest128&, const Digest128&) = default;
};

struct DigestHash {
    std::size_t operator()(const Digest128& d) const noexcept { return static_cast<std::size_t>(d.low64() ^ (d.high64() * 0x9e3779b97f4a7c15ull)); }
};

namespace detail {

inline void ensure_sodium() {
    static const int ok = sodium_init();
    if (ok < 0) throw Error("libsodium failed to initialise");
}

inline void put_u64(std::vector<unsigned char>& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

inline std::uint64_t short_hash(const std::vector<unsigned char>& buf) {
    // fixed key: colours must be reproducible across runs and machines
    static constexpr unsigned char kKey[crypto_shorthash_KEYBYTES] = {'c', 'e', 'l', 'l', '-', 'w', 'l', '-',
                                                                      'c', 'o', 'l', 'o', 'u', 'r', 's', '1'};
    unsigned char out[crypto_shorthash_BYTES];
    crypto_shorthash(out, buf.data(), buf.size(), kKey);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(out[i]) << (8 * i);
    return v;
}

} // namespace detail

/// Isomorphism-invariant digest of a (pruned) cell.
///
/// Iterated neighbourhood refinement over the labelled DAG: each node starts from
/// (in-degree, out-degree, label) and is re-coloured num_nodes times from the sorted
/// colours of its predecessors and successors. The digest is BLAKE2b-128 over the
/// node count and the sorted final colours. Byte layouts are little-endian so the
/// digest is identical on every platform.
inline Digest128 cell_hash(const CellSpec& cell) {
    detail::ensure_sodium();
    const int n = cell.num_nodes;
    std::array<std::uint64_t, kMaxNodes> colour{};
    std::vector<unsigned char> buf;
    buf.reserve(8 * (2 * kMaxNodes + 3));
    for (int v = 0; v < n; ++v) {
        const int label = v == 0 ? 10 : v == n - 1 ? 11 : static_cast<int>(cell.op(v));
        buf.clear();
        buf.push_back(static_cast<unsigned char>(cell.in_degree(v)));
        buf.push_back(static_cast<unsigned char>(cell.out_degree(v)));
        buf.push_back(static_cast<unsigned char>(label));
        colour[v] = detail::short_hash(buf);
    }
    std::array<std::uint64_t, kMaxNodes> next{};
    std::array<std::uint64_t, kMaxNodes> scratch{};
    for (int round = 0; round < n; ++round) {
        for (int v = 0; v < n; ++v) {
            buf.clear();
            int k = 0;
            for (int u = 0; u < v; ++u)
                if (cell.has_edge(u, v)) scratch[k++] = colour[u];
            std::sort(scratch.begin(), scratch.begin() + k);
            for (int i = 0; i < k; ++i) detail::put_u64(buf, scratch[i]);
            buf.push_back('|');
            k = 0;
            for (int w = v + 1; w < n; ++w)
                if (cell.has_edge(v, w)) scratch[k++] = colour[w];
            std::sort(scratch.begin(), scratch.begin() + k);
            for (int i = 0; i < k; ++i) detail::put_u64(buf, scratch[i]);
            buf.push_back('|');
            detail::put_u64(buf, colour[v]);
            next[v] = detail::short_hash(buf);
        }
        colour = next;
    }
    std::sort(colour.begin(), colour.begin() + n);
    buf.clear();
    buf.push_back(static_cast<unsigned char>(n));
    for (int v = 0; v < n; ++v) detail::put_u64(buf, colour[v]);
    Digest128 d;
    crypto_generichash(d.bytes.data(), d.bytes.size(), buf.data(), buf.size(), nullptr, 0);
    return d;
}

} // namespace codesign

template <>
struct std::hash<codesign::Digest128> {
    std::size_t operator()(const codesign::Digest128& d) const noexcept { return codesign::DigestHash{}(d); }
};
