// Copyright (c) 2026 the SI-NR authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sinr/error.hpp"

namespace sinr {

// key = value run configuration. Lookup order: explicit overrides (CLI),
// then environment (SINR_<KEY> with dots/dashes as underscores, upper case),
// then the file, then the caller's default.
class Config {
public:
    Config() = default;

    static Config from_file(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot open config file " + path);
        Config c;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            std::string s = trim(line);
            if (s.empty() || s[0] == '#') continue;
            auto eq = s.find('=');
            if (eq == std::string::npos) {
                throw ConfigError("config " + path + ":" + std::to_string(lineno) +
                                  ": expected key = value");
            }
            c.file_[trim(s.substr(0, eq))] = trim(s.substr(eq + 1));
        }
        return c;
    }

    void set(const std::string& key, const std::string& value) { overrides_[key] = value; }

    bool has(const std::string& key) const {
        return overrides_.count(key) || env_value(key) || file_.count(key);
    }

    std::string get(const std::string& key, const std::string& fallback) const {
        used_.insert(key);
        if (auto it = overrides_.find(key); it != overrides_.end()) return it->second;
        if (auto v = env_value(key)) return *v;
        if (auto it = file_.find(key); it != file_.end()) return it->second;
        return fallback;
    }

    double get_double(const std::string& key, double fallback) const {
        std::string v = get(key, "");
        if (v.empty()) return fallback;
        try {
            std::size_t used = 0;
            double d = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return d;
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + ": cannot parse \"" + v + "\" as number");
        }
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        std::string v = get(key, "");
        if (v.empty()) return fallback;
        try {
            std::size_t used = 0;
            std::uint64_t r = std::stoull(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return r;
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + ": cannot parse \"" + v + "\" as integer");
        }
    }

    std::size_t get_size(const std::string& key, std::size_t fallback) const {
        return static_cast<std::size_t>(get_u64(key, fallback));
    }

    bool get_bool(const std::string& key, bool fallback) const {
        std::string v = get(key, "");
        if (v.empty()) return fallback;
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ConfigError("config key " + key + ": cannot parse \"" + v + "\" as bool");
    }

    std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const {
        std::string v = get(key, "");
        if (v.empty()) return fallback;
        std::vector<double> out;
        std::size_t start = 0;
        while (start <= v.size()) {
            auto comma = v.find(',', start);
            std::string item = trim(v.substr(start, comma == std::string::npos ? comma
                                                                               : comma - start));
            if (!item.empty()) {
                try {
                    out.push_back(std::stod(item));
                } catch (const std::exception&) {
                    throw ConfigError("config key " + key + ": bad list item \"" + item + "\"");
                }
            }
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        return out;
    }

    // Rejects file keys that were never consulted; catches typos like
    // "train.leraning_rate" early. Call after all gets.
    void reject_unknown_keys() const {
        for (const auto& [k, _] : file_) {
            if (!used_.count(k)) throw ConfigError("unknown config key: " + k);
        }
    }

    static std::string trim(const std::string& s) {
        std::size_t a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return "";
        std::size_t b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
    }

    static std::string env_name(const std::string& key) {
        std::string name = "SINR_";
        for (char c : key) {
            if (c == '.' || c == '-') {
                name += '_';
            } else {
                name += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            }
        }
        return name;
    }

private:
    std::optional<std::string> env_value(const std::string& key) const {
        if (const char* v = std::getenv(env_name(key).c_str())) return std::string(v);
        return std::nullopt;
    }

    std::map<std::string, std::string> file_;
    std::map<std::string, std::string> overrides_;
    mutable std::set<std::string> used_;
};

}  // namespace sinr
