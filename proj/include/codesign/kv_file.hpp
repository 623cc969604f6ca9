#pragma once

#include "codesign/error.hpp"

#include <charconv>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace codesign {

/// Flat `key = value` text with dotted keys, `#` comments and blank lines.
/// Tracks the line of every key and which keys were read, so callers can
/// reject unknown keys with a precise diagnostic.
class KeyValueFile {
public:
    struct Entry {
        std::string value;
        std::size_t line = 0;
    };

    static KeyValueFile parse(std::string_view text) {
        KeyValueFile kv;
        std::size_t line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            const auto end = text.find('\n', pos);
            std::string_view line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
            pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
            ++line_no;
            if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) throw ConfigError(std::string(line), "expected 'key = value'", line_no);
            const std::string key(trim(line.substr(0, eq)));
            const std::string value(trim(line.substr(eq + 1)));
            if (key.empty()) throw ConfigError("", "empty key", line_no);
            if (kv.entries_.count(key)) throw ConfigError(key, "duplicate key", line_no);
            kv.entries_[key] = {value, line_no};
        }
        return kv;
    }

    static KeyValueFile load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError(path, "cannot open file");
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

    bool has(const std::string& key) const { return entries_.count(key) > 0; }

    std::optional<std::string> get(const std::string& key) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        used_.insert(key);
        return it->second.value;
    }

    std::size_t line_of(const std::string& key) const {
        auto it = entries_.find(key);
        return it == entries_.end() ? 0 : it->second.line;
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        return get(key).value_or(fallback);
    }

    double get_double(const std::string& key, double fallback) const {
        auto v = get(key);
        return v ? to_double(key, *v) : fallback;
    }

    long long get_int(const std::string& key, long long fallback) const {
        auto v = get(key);
        if (!v) return fallback;
        long long out = 0;
        auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
        if (ec != std::errc() || ptr != v->data() + v->size()) throw ConfigError(key, "expected an integer, got '" + *v + "'", line_of(key));
        return out;
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto v = get(key);
        if (!v) return fallback;
        if (*v == "true" || *v == "1" || *v == "yes") return true;
        if (*v == "false" || *v == "0" || *v == "no") return false;
        throw ConfigError(key, "expected a boolean, got '" + *v + "'", line_of(key));
    }

    /// Comma-separated reals; an empty value yields an empty list.
    std::optional<std::vector<double>> get_doubles(const std::string& key) const {
        auto v = get(key);
        if (!v) return std::nullopt;
        std::vector<double> out;
        if (v->empty()) return out;
        std::size_t start = 0;
        while (true) {
            const auto comma = v->find(',', start);
            const std::string part(trim(std::string_view(*v).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
            out.push_back(to_double(key, part));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        return out;
    }

    /// Keys present in the file that no getter has asked for.
    std::vector<std::string> unused_keys() const {
        std::vector<std::string> out;
        for (const auto& [k, e] : entries_)
            if (!used_.count(k)) out.push_back(k);
        return out;
    }

    const std::map<std::string, Entry>& entries() const { return entries_; }

    static std::string_view trim(std::string_view s) {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
        return s;
    }

private:
    double to_double(const std::string& key, const std::string& s) const {
        try {
            std::size_t used = 0;
            const double d = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return d;
        } catch (const std::exception&) {
            throw ConfigError(key, "expected a number, got '" + s + "'", line_of(key));
        }
    }

    std::map<std::string, Entry> entries_;
    mutable std::set<std::string> used_;
};

} // namespace codesign
