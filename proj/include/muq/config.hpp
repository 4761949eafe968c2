#pragma once

/// Flat key=value run configuration: one assignment per line, '#' comments.
/// Typed getters mark keys as consumed; finish() rejects unknown keys so
/// typos fail loudly before any work starts.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "muq/error.hpp"

namespace muq {

class Config {
  public:
    static Config from_file(const std::string& path);
    static Config from_string(const std::string& text);

    bool has(const std::string& key) const;
    void set(const std::string& key, const std::string& value);  // CLI overrides

    std::string get_string(const std::string& key);
    std::string get_string(const std::string& key, const std::string& fallback);
    double get_double(const std::string& key);
    double get_double(const std::string& key, double fallback);
    long get_int(const std::string& key);
    long get_int(const std::string& key, long fallback);
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
    bool get_bool(const std::string& key, bool fallback);
    /// Comma-separated integer list.
    std::vector<int> get_int_list(const std::string& key);

    /// Throws ConfigError listing any keys never consumed by a getter.
    void finish() const;

    /// Sorted key=value text, one per line; basis of the config hash.
    std::string canonical() const;
    /// FNV-1a over the canonical text.
    std::uint64_t hash() const;

  private:
    std::map<std::string, std::string> kv_;
    mutable std::set<std::string> consumed_;
};

}  // namespace muq
