#ifndef INLA_CSV_HPP
#define INLA_CSV_HPP

#include <cstdlib>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "inla/errors.hpp"

namespace inla {

/// Comma-separated data with a header row. Cells are kept raw; numeric
/// access treats empty cells and the literal NA (any case) as missing.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    int col(const std::string& name) const {
        for (size_t j = 0; j < columns.size(); ++j)
            if (columns[j] == name) return static_cast<int>(j);
        return -1;
    }
    int require_col(const std::string& name) const {
        int j = col(name);
        if (j < 0) throw ValidationError("csv: column '" + name + "' not found");
        return j;
    }

    static bool is_missing(const std::string& cell) {
        if (cell.empty()) return true;
        std::string u;
        for (char c : cell) u.push_back(static_cast<char>(std::toupper(c)));
        return u == "NA";
    }

    /// Numeric cell; `missing` reports NA/empty (value is 0 then).
    double number(size_t row, int col_idx, bool* missing = nullptr) const {
        const std::string& cell = rows.at(row).at(col_idx);
        if (is_missing(cell)) {
            if (!missing)
                throw ValidationError("csv: unexpected missing value at row " +
                                      std::to_string(row + 2) + ", column '" +
                                      columns[col_idx] + "'");
            *missing = true;
            return 0.0;
        }
        if (missing) *missing = false;
        char* end = nullptr;
        double v = std::strtod(cell.c_str(), &end);
        if (end == cell.c_str() || (end && *end != '\0'))
            throw ValidationError("csv: '" + cell + "' at row " + std::to_string(row + 2) +
                                  ", column '" + columns[col_idx] + "' is not a number");
        return v;
    }
};

inline CsvTable read_csv(std::istream& is) {
    CsvTable t;
    std::string line;
    bool header = true;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && !header) continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) {
            size_t a = cell.find_first_not_of(" \t");
            size_t b = cell.find_last_not_of(" \t");
            cells.push_back(a == std::string::npos ? "" : cell.substr(a, b - a + 1));
        }
        if (!line.empty() && line.back() == ',') cells.push_back("");
        if (header) {
            t.columns = cells;
            header = false;
        } else {
            if (cells.size() != t.columns.size())
                throw ValidationError("csv: row " + std::to_string(t.rows.size() + 2) +
                                      " has " + std::to_string(cells.size()) +
                                      " cells, expected " + std::to_string(t.columns.size()));
            t.rows.push_back(std::move(cells));
        }
    }
    if (t.columns.empty()) throw ValidationError("csv: missing header row");
    return t;
}

inline CsvTable read_csv_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open csv file '" + path + "'");
    try {
        return read_csv(f);
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

}  // namespace inla

#endif
