#include "muq/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace muq {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

Config Config::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str());
}

Config Config::from_string(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line.erase(hash_pos);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        if (cfg.kv_.count(key)) throw ConfigError("duplicate key: " + key);
        cfg.kv_[key] = value;
    }
    return cfg;
}

bool Config::has(const std::string& key) const { return kv_.count(key) > 0; }

void Config::set(const std::string& key, const std::string& value) { kv_[key] = value; }

std::string Config::get_string(const std::string& key) {
    const auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("missing required key: " + key);
    consumed_.insert(key);
    return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) {
    consumed_.insert(key);
    const auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key) {
    const std::string v = get_string(key);
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0') throw ConfigError("key " + key + ": not a number: " + v);
    return d;
}

double Config::get_double(const std::string& key, double fallback) {
    consumed_.insert(key);
    return kv_.count(key) ? get_double(key) : fallback;
}

long Config::get_int(const std::string& key) {
    const std::string v = get_string(key);
    char* end = nullptr;
    const long l = std::strtol(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0') throw ConfigError("key " + key + ": not an integer: " + v);
    return l;
}

long Config::get_int(const std::string& key, long fallback) {
    consumed_.insert(key);
    return kv_.count(key) ? get_int(key) : fallback;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) {
    consumed_.insert(key);
    if (!kv_.count(key)) return fallback;
    const std::string v = get_string(key);
    char* end = nullptr;
    const unsigned long long u = std::strtoull(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0') throw ConfigError("key " + key + ": not an integer: " + v);
    return u;
}

bool Config::get_bool(const std::string& key, bool fallback) {
    consumed_.insert(key);
    if (!kv_.count(key)) return fallback;
    const std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key " + key + ": not a boolean: " + v);
}

std::vector<int> Config::get_int_list(const std::string& key) {
    const std::string v = get_string(key);
    std::vector<int> out;
    std::istringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string t = trim(item);
        if (t.empty()) continue;
        char* end = nullptr;
        const long l = std::strtol(t.c_str(), &end, 10);
        if (end == t.c_str() || *end != '\0') throw ConfigError("key " + key + ": bad list entry: " + t);
        out.push_back(static_cast<int>(l));
    }
    if (out.empty()) throw ConfigError("key " + key + ": empty list");
    return out;
}

void Config::finish() const {
    std::string unknown;
    for (const auto& [key, value] : kv_) {
        if (!consumed_.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
    }
    if (!unknown.empty()) throw ConfigError("unknown config keys: " + unknown);
}

std::string Config::canonical() const {
    std::string out;
    for (const auto& [key, value] : kv_) out += key + " = " + value + "\n";
    return out;
}

std::uint64_t Config::hash() const {
    const std::string text = canonical();
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace muq
