#pragma once

#include "csdflow/error.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace csdflow {

enum class StopReason { Running, Completed, NeckCollapse, CurvatureBlowup, ConstraintUndefined, SolverFailure, PinchDetected };

inline std::string_view to_string(StopReason r)
{
    switch (r) {
    case StopReason::Running: return "Running";
    case StopReason::Completed: return "Completed";
    case StopReason::NeckCollapse: return "NeckCollapse";
    case StopReason::CurvatureBlowup: return "CurvatureBlowup";
    case StopReason::ConstraintUndefined: return "ConstraintUndefined";
    case StopReason::SolverFailure: return "SolverFailure";
    case StopReason::PinchDetected: return "PinchDetected";
    }
    return "Unknown";
}

inline StopReason parse_stop_reason(std::string_view s)
{
    for (auto r : {StopReason::Running, StopReason::Completed, StopReason::NeckCollapse, StopReason::CurvatureBlowup,
                   StopReason::ConstraintUndefined, StopReason::SolverFailure, StopReason::PinchDetected}) {
        if (s == to_string(r)) return r;
    }
    fail(ErrorCode::IoError, "unknown stop flag '" + std::string(s) + "'");
}

/// One time sample of the tracked global integrals.
struct MonitorRecord
{
    double t = 0, dt = 0;
    double vol = 0, area = 0;
    double int_H = 0, int_abs_H = 0, int_K = 0, int_A2 = 0;
    double willmore = 0; ///< integral H^2
    double int_grad_H2 = 0;
    double h = 0;
    double min_edge = 0;
    StopReason stop = StopReason::Running;
};

inline constexpr std::string_view monitor_csv_header =
    "t,dt,vol,area,intH,intAbsH,intK,intA2,willmore,intGradH2,h,minEdge,stopFlag";

/// Shortest round-trip-exact decimal form (17 significant digits).
inline std::string format_number(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string to_csv_row(const MonitorRecord& r)
{
    std::string s;
    for (double v : {r.t, r.dt, r.vol, r.area, r.int_H, r.int_abs_H, r.int_K, r.int_A2, r.willmore, r.int_grad_H2, r.h,
                     r.min_edge}) {
        s += format_number(v);
        s += ',';
    }
    s += to_string(r.stop);
    return s;
}

inline void write_monitor_csv(const std::string& path, const std::vector<MonitorRecord>& rows)
{
    std::ofstream out(path);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path);
    out << monitor_csv_header << '\n';
    for (const auto& r : rows) out << to_csv_row(r) << '\n';
    if (!out) fail(ErrorCode::IoError, "write failed for " + path);
}

inline std::vector<MonitorRecord> read_monitor_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != monitor_csv_header) fail(ErrorCode::IoError, path + ": unexpected header");
    std::vector<MonitorRecord> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (cells.size() != 13) fail(ErrorCode::IoError, path + ": malformed row '" + line + "'");
        MonitorRecord r;
        double* fields[] = {&r.t, &r.dt, &r.vol, &r.area, &r.int_H, &r.int_abs_H, &r.int_K, &r.int_A2, &r.willmore,
                            &r.int_grad_H2, &r.h, &r.min_edge};
        try {
            for (size_t k = 0; k < 12; ++k) *fields[k] = std::stod(cells[k]);
        } catch (const std::exception&) {
            fail(ErrorCode::IoError, path + ": non-numeric field in '" + line + "'");
        }
        r.stop = parse_stop_reason(cells[12]);
        rows.push_back(r);
    }
    return rows;
}

} // namespace csdflow
