#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "geomherd/util.hpp"

namespace geomherd {

// String-valued table rendered twice: machine CSV and aligned text for eyes.
struct TextTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row) {
        if (row.size() != columns.size())
            throw std::invalid_argument("table: row width does not match header");
        rows.push_back(std::move(row));
    }
};

// Compact numeric cell: fixed short precision, "n/a" for missing values.
inline std::string table_cell(double v, int decimals = 4) {
    if (!std::isfinite(v)) return "n/a";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.*g", decimals + 2, v);
    return std::string(buf);
}

inline std::string table_cell(int v) { return std::to_string(v); }

inline std::string render_csv(const TextTable& table) {
    std::string out;
    for (std::size_t j = 0; j < table.columns.size(); ++j) {
        if (j) out += ',';
        out += table.columns[j];
    }
    out += '\n';
    for (const auto& row : table.rows) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) out += ',';
            out += row[j];
        }
        out += '\n';
    }
    return out;
}

inline std::string render_aligned(const TextTable& table) {
    std::vector<std::size_t> width(table.columns.size());
    for (std::size_t j = 0; j < table.columns.size(); ++j) width[j] = table.columns[j].size();
    for (const auto& row : table.rows)
        for (std::size_t j = 0; j < row.size(); ++j)
            width[j] = std::max(width[j], row[j].size());

    std::string out;
    auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) out += "  ";
            out += row[j];
            out.append(width[j] - row[j].size(), ' ');
        }
        while (!out.empty() && out.back() == ' ') out.pop_back();
        out += '\n';
    };
    emit(table.columns);
    std::vector<std::string> rule(table.columns.size());
    for (std::size_t j = 0; j < rule.size(); ++j) rule[j] = std::string(width[j], '-');
    emit(rule);
    for (const auto& row : table.rows) emit(row);
    return out;
}

// Write both renderings: <base>.csv and <base>.txt.
inline void save_table_pair(const std::string& base, const TextTable& table) {
    write_file(base + ".csv", render_csv(table));
    write_file(base + ".txt", render_aligned(table));
}

}  // namespace geomherd
