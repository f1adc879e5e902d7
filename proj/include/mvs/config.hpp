#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "mvs/error.hpp"

namespace mvs::config {

struct ConfigError : Error {
    using Error::Error;
};

// Plain-text key=value file with [section] headers. '#' and ';' start
// comments. Keys are addressed as "section.key"; keys before any header live
// in the "" section and are addressed bare.
class Config {
public:
    Config() = default;
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::string get(const std::string& key, const std::string& fallback) const;
    double get(const std::string& key, double fallback) const;
    int get(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get(const std::string& key, bool fallback) const;

    // FNV-1a over the sorted key=value pairs; whitespace/comment insensitive
    std::uint64_t hash() const;

    const std::map<std::string, std::string>& values() const { return values_; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

private:
    std::string require_raw(const std::string& key) const;
    std::map<std::string, std::string> values_;
};

}  // namespace mvs::config
