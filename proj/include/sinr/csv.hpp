// Copyright (c) 2026 the SI-NR authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sinr/error.hpp"

namespace sinr {

// Minimal RFC-4180-style CSV. Header row is mandatory.

inline std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header) : f_(path) {
        if (!f_) throw FormatError("cannot open " + path + " for writing");
        columns_ = header.size();
        row(header);
    }

    void row(const std::vector<std::string>& fields) {
        if (fields.size() != columns_) {
            throw ConfigError("csv row has " + std::to_string(fields.size()) +
                              " fields, header has " + std::to_string(columns_));
        }
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) f_ << ',';
            f_ << csv_escape(fields[i]);
        }
        f_ << '\n';
    }

    static std::string num(double v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        return os.str();
    }

private:
    std::ofstream f_;
    std::size_t columns_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw FormatError("csv column not found: " + name);
    }
};

inline CsvTable read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FormatError("cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    CsvTable t;
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    auto end_field = [&] {
        fields.push_back(cur);
        cur.clear();
    };
    auto end_row = [&] {
        end_field();
        if (t.header.empty()) {
            t.header = fields;
        } else {
            if (fields.size() != t.header.size()) {
                throw FormatError("csv row width mismatch in " + path);
            }
            t.rows.push_back(fields);
        }
        fields.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            if (!cur.empty() && cur.back() == '\r') cur.pop_back();
            end_row();
        } else {
            cur += c;
        }
    }
    if (!cur.empty() || !fields.empty()) end_row();
    if (t.header.empty()) throw FormatError("csv file has no header row: " + path);
    return t;
}

}  // namespace sinr
