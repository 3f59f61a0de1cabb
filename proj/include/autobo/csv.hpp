#ifndef AUTOBO_CSV_HPP
#define AUTOBO_CSV_HPP
#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "autobo/errors.hpp"

namespace autobo {

/// Shortest-safe decimal text that parses back to the same double.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_csv_double(const std::string& field) {
    try {
        std::size_t used = 0;
        const double v = std::stod(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
        return v;
    } catch (const std::exception&) {
        throw ArgumentError("CSV field is not a number: '" + field + "'");
    }
}

} // namespace autobo

#endif // AUTOBO_CSV_HPP
