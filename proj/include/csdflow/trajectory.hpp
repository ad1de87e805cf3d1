#pragma once

#include "csdflow/diagnostics.hpp"
#include "csdflow/integrator.hpp"
#include "csdflow/obj_io.hpp"

#include <cstdio>
#include <filesystem>

namespace csdflow {

/// On-disk layout of a run:
///
///     <dir>/monitors.csv               one MonitorRecord per row
///     <dir>/snapshots.csv              step,t,file
///     <dir>/snapshots/step_NNNNNNNN.obj
inline std::string snapshot_file_name(int step)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "step_%08d.obj", step);
    return buf;
}

inline void write_trajectory(const std::string& dir, const std::vector<MonitorRecord>& monitors,
                             const std::vector<Snapshot>& snapshots)
{
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "snapshots", ec);
    if (ec) fail(ErrorCode::IoError, "cannot create " + dir + ": " + ec.message());
    write_monitor_csv((fs::path(dir) / "monitors.csv").string(), monitors);
    std::ofstream index(fs::path(dir) / "snapshots.csv");
    if (!index) fail(ErrorCode::IoError, "cannot write the snapshot index in " + dir);
    index << "step,t,file\n";
    for (const Snapshot& s : snapshots) {
        const std::string name = "snapshots/" + snapshot_file_name(s.step);
        write_obj((fs::path(dir) / name).string(), s.mesh);
        index << s.step << ',' << format_number(s.t) << ',' << name << '\n';
    }
}

struct StoredTrajectory
{
    std::vector<MonitorRecord> monitors;
    std::vector<Snapshot> snapshots;

    StopReason stop() const { return monitors.empty() ? StopReason::Running : monitors.back().stop; }
};

/// Reads a run written by write_trajectory; any missing or malformed piece is an IoError.
inline StoredTrajectory read_trajectory(const std::string& dir)
{
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) fail(ErrorCode::IoError, dir + " is not a directory");
    StoredTrajectory out;
    out.monitors = read_monitor_csv((fs::path(dir) / "monitors.csv").string());
    if (out.monitors.empty()) fail(ErrorCode::IoError, dir + ": monitors.csv has no rows");

    const fs::path index_path = fs::path(dir) / "snapshots.csv";
    std::ifstream index(index_path);
    if (!index) fail(ErrorCode::IoError, "cannot open " + index_path.string());
    std::string line;
    if (!std::getline(index, line) || line != "step,t,file") fail(ErrorCode::IoError, index_path.string() + ": bad header");
    while (std::getline(index, line)) {
        if (line.empty()) continue;
        const size_t a = line.find(','), b = line.find(',', a + 1);
        if (a == std::string::npos || b == std::string::npos) fail(ErrorCode::IoError, index_path.string() + ": bad row '" + line + "'");
        Snapshot s;
        try {
            s.step = std::stoi(line.substr(0, a));
            s.t = std::stod(line.substr(a + 1, b - a - 1));
        } catch (const std::exception&) {
            fail(ErrorCode::IoError, index_path.string() + ": bad row '" + line + "'");
        }
        try {
            s.mesh = read_obj((fs::path(dir) / line.substr(b + 1)).string());
        } catch (const Error& e) {
            fail(ErrorCode::IoError, "snapshot " + line.substr(b + 1) + ": " + e.what());
        }
        out.snapshots.push_back(std::move(s));
    }
    if (out.snapshots.empty()) fail(ErrorCode::IoError, index_path.string() + " lists no snapshots");
    return out;
}

/// rho* at every snapshot for one threshold.
struct LifespanSeries
{
    double eps0 = 0;
    std::vector<double> t;
    std::vector<LifespanRadius> radius;

    std::vector<double> rho_star() const
    {
        std::vector<double> r;
        for (const LifespanRadius& x : radius) r.push_back(x.rho_star);
        return r;
    }
};

inline LifespanSeries lifespan_series(const std::vector<Snapshot>& snapshots, double eps0, double p = 2.0)
{
    LifespanSeries s;
    s.eps0 = eps0;
    for (const Snapshot& snap : snapshots) {
        const GeometryCache cache = compute_geometry(snap.mesh);
        s.t.push_back(snap.t);
        s.radius.push_back(lifespan_radius(snap.mesh, cache, eps0, p));
    }
    return s;
}

struct LifespanChoice
{
    LifespanSeries series;
    LifespanEstimate fit;
};

/// Tries each threshold and keeps the one whose rho*^4 series is best explained by a line with
/// a positive rate. Thresholds that leave too few samples in the window are skipped; when none
/// gives a positive rate, the last estimate (flagged no_concentration) is returned.
inline LifespanChoice fit_lifespan(const std::vector<Snapshot>& snapshots, const std::vector<double>& eps0_candidates,
                                   double p = 2.0, double window = 0.3)
{
    if (eps0_candidates.empty()) fail(ErrorCode::InvalidArgument, "no eps0 candidates");
    std::optional<LifespanChoice> best, fallback;
    std::optional<Error> last_error;
    for (double eps0 : eps0_candidates) {
        LifespanChoice c;
        c.series = lifespan_series(snapshots, eps0, p);
        try {
            c.fit = lifespan_fit(c.series.t, c.series.rho_star(), eps0, window);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::InsufficientSamples) throw;
            last_error = e;
            continue;
        }
        if (c.fit.no_concentration) {
            fallback = std::move(c);
        } else if (!best || c.fit.r_squared > best->fit.r_squared) {
            best = std::move(c);
        }
    }
    if (best) return std::move(*best);
    if (fallback) return std::move(*fallback);
    throw *last_error;
}

} // namespace csdflow
