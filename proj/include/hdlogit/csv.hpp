#pragma once

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hdlogit/dataset.hpp"

namespace hdlogit {

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

// Strict numeric CSV: one header row, comma separators, '.' decimal point.
// Any cell that is not a finite number is an error naming the offending
// row and column -- silently coercing would corrupt an analysis.
inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("cannot open '" + path + "'");

    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw InvalidInputError("'" + path + "': empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) table.columns.push_back(cell);
        if (!line.empty() && line.back() == ',') table.columns.push_back("");
    }
    if (table.columns.empty()) throw InvalidInputError("'" + path + "': no header columns");

    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        row.reserve(table.columns.size());
        std::size_t start = 0;
        for (std::size_t c = 0; c < table.columns.size(); ++c) {
            std::size_t end = line.find(',', start);
            const bool last = c + 1 == table.columns.size();
            if (last ? end != std::string::npos : end == std::string::npos) {
                throw InvalidInputError("'" + path + "' row " + std::to_string(lineno) +
                                        ": expected " + std::to_string(table.columns.size()) +
                                        " fields");
            }
            if (end == std::string::npos) end = line.size();
            const char* first = line.data() + start;
            const char* stop = line.data() + end;
            while (first < stop && (*first == ' ' || *first == '\t')) ++first;
            while (stop > first && (stop[-1] == ' ' || stop[-1] == '\t')) --stop;
            double value = 0.0;
            const auto [ptr, ec] = std::from_chars(first, stop, value);
            if (ec != std::errc() || ptr != stop || first == stop || !std::isfinite(value)) {
                throw InvalidInputError("'" + path + "' row " + std::to_string(lineno) +
                                        ", column '" + table.columns[c] +
                                        "': not a finite number");
            }
            row.push_back(value);
            start = end + 1;
        }
        table.rows.push_back(std::move(row));
    }
    if (table.rows.empty()) throw InvalidInputError("'" + path + "': no data rows");
    return table;
}

// Assemble the estimation problem from a table: outcome and treatment by
// column name, every other column a control.  An all-ones intercept column
// is prepended unless the caller opts out.
inline Dataset dataset_from_table(const CsvTable& table, const std::string& y_col,
                                  const std::string& d_col, bool add_intercept) {
    const auto find_col = [&](const std::string& name) {
        const auto it = std::find(table.columns.begin(), table.columns.end(), name);
        if (it == table.columns.end()) throw InvalidInputError("no column named '" + name + "'");
        return static_cast<Eigen::Index>(it - table.columns.begin());
    };
    const Eigen::Index yc = find_col(y_col);
    const Eigen::Index dc = find_col(d_col);
    if (yc == dc) throw InvalidInputError("outcome and treatment must be distinct columns");

    const Eigen::Index n = static_cast<Eigen::Index>(table.rows.size());
    Dataset data;
    data.y.resize(n);
    data.d.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double yv = table.rows[i][yc];
        if (yv != 0.0 && yv != 1.0) {
            throw InvalidInputError("column '" + y_col + "' row " + std::to_string(i + 2) +
                                    ": outcome must be 0 or 1");
        }
        data.y(i) = yv;
        data.d(i) = table.rows[i][dc];
    }

    std::vector<Eigen::Index> controls;
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(table.columns.size()); ++c) {
        if (c != yc && c != dc) controls.push_back(c);
    }
    const Eigen::Index offset = add_intercept ? 1 : 0;
    data.X.resize(n, offset + static_cast<Eigen::Index>(controls.size()));
    if (add_intercept) {
        data.X.col(0).setOnes();
        data.intercept = 0;
        data.col_names.push_back("(intercept)");
    }
    for (std::size_t k = 0; k < controls.size(); ++k) {
        for (Eigen::Index i = 0; i < n; ++i) data.X(i, offset + static_cast<Eigen::Index>(k)) = table.rows[i][controls[k]];
        data.col_names.push_back(table.columns[controls[k]]);
    }
    return data;
}

}  // namespace hdlogit
