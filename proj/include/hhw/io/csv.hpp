#pragma once

// Comma-separated output with shortest round-trip number formatting.

#include <charconv>
#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "hhw/analysis.hpp"
#include "hhw/error.hpp"
#include "hhw/model.hpp"

namespace hhw::io {

inline void append_number(std::string& out, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

inline std::string format_number(double v) {
    std::string s;
    append_number(s, v);
    return s;
}

inline double parse_number(std::string_view s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw domain_error("csv: cannot parse number '" + std::string(s) + "'");
    return v;
}

inline std::vector<std::string_view> split_row(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return cells;
}

inline std::vector<std::string> trajectory_header(std::size_t n, bool memristive) {
    std::vector<std::string> h{"t"};
    for (std::size_t i = 1; i <= n; ++i)
        h.push_back("V_" + std::to_string(i));
    for (std::size_t i = 1; i <= n; ++i)
        h.push_back("R_" + std::to_string(i));
    if (memristive)
        h.push_back("rho");
    return h;
}

inline void write_header(std::ostream& os, const std::vector<std::string>& header) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i)
            os << ',';
        os << header[i];
    }
    os << '\n';
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    const bool memristive = traj.meta.model == ModelKind::memristive;
    write_header(os, trajectory_header(traj.meta.neurons, memristive));
    std::string line;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        line.clear();
        append_number(line, traj.times[k]);
        for (double v : traj.states[k].flat()) {
            line += ',';
            append_number(line, v);
        }
        line += '\n';
        os << line;
    }
}

// Inverse of write_trajectory_csv. Only the state layout is recovered from
// the header; integrator metadata is not part of the file.
inline Trajectory read_trajectory_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line))
        throw domain_error("csv: missing header");
    const auto header = split_row(line);
    const std::size_t cols = header.size();
    const bool memristive = !header.empty() && header.back() == "rho";
    if (cols < 5 || (cols - 1 - (memristive ? 1 : 0)) % 2 != 0)
        throw domain_error("csv: unexpected trajectory header");
    const std::size_t n = (cols - 1 - (memristive ? 1 : 0)) / 2;
    const auto expect = trajectory_header(n, memristive);
    for (std::size_t i = 0; i < cols; ++i)
        if (header[i] != expect[i])
            throw domain_error("csv: unexpected column '" + std::string(header[i]) + "'");

    Trajectory traj;
    traj.meta.model = memristive ? ModelKind::memristive : ModelKind::classical;
    traj.meta.neurons = n;
    std::vector<double> row(cols - 1);
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        const auto cells = split_row(line);
        if (cells.size() != cols)
            throw domain_error("csv: row with " + std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(cols));
        for (std::size_t i = 1; i < cols; ++i)
            row[i - 1] = parse_number(cells[i]);
        traj.push(parse_number(cells[0]), row);
    }
    return traj;
}

inline void write_gaps_csv(std::ostream& os, const GapSeries& gaps) {
    std::vector<std::string> header{"t", "max_gap_sq"};
    for (std::size_t i = 1; i <= gaps.neurons; ++i)
        for (std::size_t j = i + 1; j <= gaps.neurons; ++j)
            header.push_back("gap_sq_" + std::to_string(i) + "_" + std::to_string(j));
    write_header(os, header);
    std::string line;
    for (std::size_t k = 0; k < gaps.size(); ++k) {
        line.clear();
        append_number(line, gaps.times[k]);
        line += ',';
        append_number(line, gaps.max_gap[k]);
        for (double v : gaps.row(k)) {
            line += ',';
            append_number(line, v);
        }
        line += '\n';
        os << line;
    }
}

} // namespace hhw::io
