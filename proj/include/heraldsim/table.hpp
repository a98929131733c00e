// Copyright 2026 The heraldsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef HERALDSIM_TABLE_HPP
#define HERALDSIM_TABLE_HPP

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "heraldsim/error.hpp"

namespace heraldsim {

using Cell = std::variant<double, std::int64_t, std::string>;

/// Column-ordered result table rendered as CSV or JSON.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add_row(std::vector<Cell> row) {
        require(row.size() == columns.size(), "table row has " + std::to_string(row.size()) + " cells, expected " +
                                                  std::to_string(columns.size()));
        rows.push_back(std::move(row));
    }
};

enum class TableFormat { csv, json };

inline TableFormat parse_table_format(std::string_view s) {
    if (s == "csv") {
        return TableFormat::csv;
    }
    if (s == "json") {
        return TableFormat::json;
    }
    fail(ErrorKind::invalid_argument, "unknown output format '" + std::string(s) + "' (expected csv or json)");
}

/// Floating-point values are written with 12 significant digits.
inline std::string format_real(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

inline std::string format_cell(const Cell &c) {
    if (const auto *d = std::get_if<double>(&c)) {
        return format_real(*d);
    }
    if (const auto *i = std::get_if<std::int64_t>(&c)) {
        return std::to_string(*i);
    }
    const auto &s = std::get<std::string>(c);
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string quoted = "\"";
    for (char ch : s) {
        if (ch == '"') {
            quoted += '"';
        }
        quoted += ch;
    }
    return quoted + "\"";
}

inline nlohmann::json cell_to_json(const Cell &c) {
    if (const auto *d = std::get_if<double>(&c)) {
        if (!std::isfinite(*d)) {
            return nullptr;
        }
        // Round through the printed form so CSV and JSON carry identical values.
        return std::stod(format_real(*d));
    }
    if (const auto *i = std::get_if<std::int64_t>(&c)) {
        return *i;
    }
    return std::get<std::string>(c);
}

/// Writes the config echo as a `#`-prefixed JSON line (CSV) or a "config" member (JSON).
inline void emit_table(const Table &table, TableFormat format, std::ostream &out, const nlohmann::json &preamble) {
    require(!table.rows.empty(), "refusing to write an empty result table");
    if (format == TableFormat::csv) {
        out << "# " << preamble.dump() << "\n";
        for (std::size_t c = 0; c < table.columns.size(); ++c) {
            out << (c ? "," : "") << table.columns[c];
        }
        out << "\n";
        for (const auto &row : table.rows) {
            for (std::size_t c = 0; c < row.size(); ++c) {
                out << (c ? "," : "") << format_cell(row[c]);
            }
            out << "\n";
        }
    } else {
        nlohmann::json doc;
        doc["config"] = preamble;
        doc["columns"] = table.columns;
        doc["rows"] = nlohmann::json::array();
        for (const auto &row : table.rows) {
            nlohmann::json obj = nlohmann::json::object();
            for (std::size_t c = 0; c < row.size(); ++c) {
                obj[table.columns[c]] = cell_to_json(row[c]);
            }
            doc["rows"].push_back(std::move(obj));
        }
        out << doc.dump(2) << "\n";
    }
    if (!out) {
        fail(ErrorKind::io, "failed writing result table");
    }
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string &line) {
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            cells.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    cells.push_back(std::move(cur));
    return cells;
}

inline Cell parse_cell(const std::string &s) {
    if (s.empty()) {
        return s;
    }
    if (s.find_first_not_of("-0123456789") == std::string::npos && s != "-") {
        try {
            return static_cast<std::int64_t>(std::stoll(s));
        } catch (const std::out_of_range &) {
        }
    }
    if (s == "nan") {
        return std::nan("");
    }
    if (s == "inf" || s == "-inf") {
        return s[0] == '-' ? -INFINITY : INFINITY;
    }
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used == s.size()) {
            return v;
        }
    } catch (const std::logic_error &) {
    }
    return s;
}

}  // namespace detail

struct ParsedTable {
    nlohmann::json preamble;
    Table table;
};

/// Reads a CSV table written by emit_table.
inline ParsedTable read_csv_table(std::istream &in) {
    ParsedTable out;
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
        fail(ErrorKind::io, "table must start with a '# {json}' preamble line");
    }
    out.preamble = nlohmann::json::parse(line.substr(2));
    if (!std::getline(in, line)) {
        fail(ErrorKind::io, "table has no header");
    }
    out.table.columns = detail::split_csv_line(line);
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::vector<Cell> row;
        for (const auto &s : detail::split_csv_line(line)) {
            row.push_back(detail::parse_cell(s));
        }
        out.table.add_row(std::move(row));
    }
    return out;
}

}  // namespace heraldsim

#endif
