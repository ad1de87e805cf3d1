#pragma once

#include "csdflow/constraints.hpp"
#include "csdflow/monitor.hpp"
#include "csdflow/profile_curve.hpp"

#include <boost/math/special_functions/fpclassify.hpp> // pchip calls isnan unqualified
#include <boost/math/interpolators/pchip.hpp>

#include <Eigen/SparseCholesky>

namespace csdflow {

/// Generating curve of an axisymmetric surface sampled at N + 1 nodes, equally spaced in
/// arclength, from the bottom pole (index 0) to the top pole (index N). r is exactly zero at the
/// poles and positive in between.
struct AxisymProfile
{
    std::vector<double> r, z;

    int intervals() const { return int(r.size()) - 1; }
};

inline AxisymProfile sample_profile(const ProfileCurve& curve, int intervals)
{
    if (intervals < 8) fail(ErrorCode::ResolutionTooLow, "an axisymmetric profile needs at least 8 intervals");
    AxisymProfile p;
    for (const CurveSample& s : curve.uniform(intervals)) {
        p.r.push_back(s.r);
        p.z.push_back(s.z);
    }
    return p;
}

/// Discrete geometry of a profile. Curvatures come from chord turning angles, which makes a
/// uniformly sampled circle exact; the Laplacian is a finite-volume stencil on the half-frustum
/// cells, so that sum_i mass_i u_i (Delta v)_i is symmetric.
struct AxisymGeometry
{
    std::vector<double> edge_length; ///< N chords
    std::vector<double> edge_radius; ///< chord midpoint radius
    std::vector<double> normal_angle; ///< psi, outward normal (sin psi, -cos psi)
    std::vector<double> kappa_profile, kappa_azimuthal, H, K, mass;
    SparseMatrix stiffness;
};

inline AxisymGeometry axisym_geometry(const AxisymProfile& p)
{
    const int n = p.intervals();
    AxisymGeometry g;
    g.edge_length.resize(size_t(n));
    g.edge_radius.resize(size_t(n));
    std::vector<double> phi(static_cast<size_t>(n), 0.0);
    for (int k = 0; k < n; ++k) {
        const double dr = p.r[size_t(k) + 1] - p.r[size_t(k)];
        const double dz = p.z[size_t(k) + 1] - p.z[size_t(k)];
        g.edge_length[size_t(k)] = std::hypot(dr, dz);
        g.edge_radius[size_t(k)] = 0.5 * (p.r[size_t(k)] + p.r[size_t(k) + 1]);
        const double a = std::atan2(dz, dr);
        phi[size_t(k)] = (k == 0) ? a : phi[size_t(k) - 1] + std::remainder(a - phi[size_t(k) - 1], 2 * std::numbers::pi);
    }
    const size_t nodes = size_t(n) + 1;
    g.normal_angle.assign(nodes, 0.0);
    g.kappa_profile.assign(nodes, 0.0);
    g.kappa_azimuthal.assign(nodes, 0.0);
    g.H.assign(nodes, 0.0);
    g.K.assign(nodes, 0.0);
    g.mass.assign(nodes, 0.0);
    for (size_t i = 1; i < size_t(n); ++i) {
        const double turn = phi[i] - phi[i - 1];
        const double mean_len = 0.5 * (g.edge_length[i - 1] + g.edge_length[i]);
        g.normal_angle[i] = 0.5 * (phi[i - 1] + phi[i]);
        g.kappa_profile[i] = 2.0 * std::sin(0.5 * turn) / mean_len;
        g.kappa_azimuthal[i] = std::sin(g.normal_angle[i]) / p.r[i];
    }
    // Poles: the normal is axial and both principal curvatures equal the chord-based value.
    g.normal_angle[0] = 0.0;
    g.kappa_profile[0] = g.kappa_azimuthal[0] = 2.0 * std::sin(phi.front()) / g.edge_length.front();
    const double top_angle = std::numbers::pi;
    g.normal_angle[size_t(n)] = top_angle;
    g.kappa_profile[size_t(n)] = g.kappa_azimuthal[size_t(n)] = 2.0 * std::sin(top_angle - phi.back()) / g.edge_length.back();
    for (size_t i = 0; i < nodes; ++i) {
        g.H[i] = g.kappa_profile[i] + g.kappa_azimuthal[i];
        g.K[i] = g.kappa_profile[i] * g.kappa_azimuthal[i];
    }

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(4 * size_t(n));
    const double pi = std::numbers::pi;
    for (int k = 0; k < n; ++k) {
        const size_t a = size_t(k), b = size_t(k) + 1;
        const double e = g.edge_length[a];
        const double rm = g.edge_radius[a];
        g.mass[a] += 0.5 * pi * e * (p.r[a] + rm);
        g.mass[b] += 0.5 * pi * e * (rm + p.r[b]);
        const double w = 2.0 * pi * rm / e;
        trip.emplace_back(k, k, w);
        trip.emplace_back(k + 1, k + 1, w);
        trip.emplace_back(k, k + 1, -w);
        trip.emplace_back(k + 1, k, -w);
    }
    g.stiffness.resize(Eigen::Index(nodes), Eigen::Index(nodes));
    g.stiffness.setFromTriplets(trip.begin(), trip.end());
    return g;
}

inline std::vector<double> axisym_laplacian(const AxisymGeometry& g, const std::vector<double>& u)
{
    const Eigen::Map<const Eigen::VectorXd> uu(u.data(), Eigen::Index(u.size()));
    const Eigen::VectorXd Su = g.stiffness * uu;
    std::vector<double> out(u.size());
    for (size_t i = 0; i < u.size(); ++i) out[i] = -Su[Eigen::Index(i)] / g.mass[i];
    return out;
}

/// Volume and area of the polyline of revolution (exact for frusta).
inline double axisym_volume(const AxisymProfile& p)
{
    double v = 0.0;
    for (size_t k = 0; k + 1 < p.r.size(); ++k) {
        const double a = p.r[k], b = p.r[k + 1];
        v += (p.z[k + 1] - p.z[k]) * (a * a + a * b + b * b);
    }
    return std::numbers::pi * v / 3.0;
}

inline double axisym_area(const AxisymProfile& p)
{
    double s = 0.0;
    for (size_t k = 0; k + 1 < p.r.size(); ++k) {
        s += (p.r[k] + p.r[k + 1]) * std::hypot(p.r[k + 1] - p.r[k], p.z[k + 1] - p.z[k]);
    }
    return std::numbers::pi * s;
}

inline ConstraintIntegrals axisym_integrals(const AxisymProfile& p, const AxisymGeometry& g, const std::vector<double>& lapH)
{
    ConstraintIntegrals q;
    const Eigen::Map<const Eigen::VectorXd> H(g.H.data(), Eigen::Index(g.H.size()));
    q.grad_H2 = H.dot(g.stiffness * H);
    q.H = integrate(g.mass, g.H);
    q.abs_H = integrate_by(g.mass, [&](size_t i) { return std::abs(g.H[i]); });
    q.lapH_K = integrate_by(g.mass, [&](size_t i) { return lapH[i] * g.K[i]; });
    q.K = integrate(g.mass, g.K);
    q.area = axisym_area(p);
    const auto [zlo, zhi] = std::minmax_element(p.z.begin(), p.z.end());
    const double rmax = *std::max_element(p.r.begin(), p.r.end());
    q.bbox_diagonal = std::hypot(*zhi - *zlo, 2.0 * rmax, 2.0 * rmax);
    return q;
}

/// Largest deviation of the chord lengths from their mean, relative to the mean.
inline double arclength_defect(const AxisymProfile& p)
{
    std::vector<double> e(p.r.size() - 1);
    for (size_t k = 0; k < e.size(); ++k) e[k] = std::hypot(p.r[k + 1] - p.r[k], p.z[k + 1] - p.z[k]);
    double mean = 0.0;
    for (double x : e) mean += x;
    mean /= double(e.size());
    double worst = 0.0;
    for (double x : e) worst = std::max(worst, std::abs(x / mean - 1.0));
    return worst;
}

/// Resamples to equal chord lengths by monotone cubic interpolation of r and z against cumulative
/// chord length, repeated until the chords agree to `tolerance`.
inline AxisymProfile reparameterize(AxisymProfile p, double tolerance = 1e-10, int max_passes = 6)
{
    const size_t nodes = p.r.size();
    for (int pass = 0; pass < max_passes && arclength_defect(p) > tolerance; ++pass) {
        std::vector<double> s(nodes, 0.0);
        for (size_t k = 1; k < nodes; ++k) s[k] = s[k - 1] + std::hypot(p.r[k] - p.r[k - 1], p.z[k] - p.z[k - 1]);
        const double L = s.back();
        std::vector<double> s2 = s;
        boost::math::interpolators::pchip<std::vector<double>> fr(std::move(s), std::vector<double>(p.r));
        boost::math::interpolators::pchip<std::vector<double>> fz(std::move(s2), std::vector<double>(p.z));
        AxisymProfile q;
        q.r.resize(nodes);
        q.z.resize(nodes);
        for (size_t k = 0; k < nodes; ++k) {
            const double sk = L * double(k) / double(nodes - 1);
            q.r[k] = fr(sk);
            q.z[k] = fz(sk);
        }
        q.r.front() = 0.0;
        q.r.back() = 0.0;
        q.z.front() = p.z.front();
        q.z.back() = p.z.back();
        p = std::move(q);
    }
    return p;
}

/// Radius and height of the thinnest interior waist (a strict local minimum of r away from the
/// poles); radius is +inf when the profile has no waist.
struct NeckSample
{
    double t = 0;
    double radius = std::numeric_limits<double>::infinity();
    double z = 0;
};

inline NeckSample find_neck(const AxisymProfile& p)
{
    NeckSample s;
    for (size_t i = 2; i + 2 < p.r.size(); ++i) {
        if (p.r[i] < p.r[i - 1] && p.r[i] <= p.r[i + 1] && p.r[i] < s.radius) {
            // Parabolic refinement through the three nodes.
            const double a = p.r[i - 1], b = p.r[i], c = p.r[i + 1];
            const double den = a - 2 * b + c;
            const double off = den > 0 ? 0.5 * (a - c) / den : 0.0;
            s.radius = b - 0.25 * (a - c) * off;
            s.z = p.z[i] + off * 0.5 * (p.z[i + 1] - p.z[i - 1]);
        }
    }
    return s;
}

struct AxisymScheme
{
    double alpha = 0.05;      ///< normal displacement per step, as a fraction of min(ds, neck radius)
    double dt_max = 1e-3;
    double dt_min = 1e-16;
    double t_end = 1.0;
    double pinch_radius = 0.01;
    int max_steps = 2000000;
    int sample_every = 1;     ///< monitor row cadence, in steps
    int order = 2;            ///< time accuracy, 1 or 2
};

struct AxisymStepResult
{
    AxisymProfile profile;
    double h = 0;
    double max_speed = 0;
};

/// Normal velocity Delta H + h and the constraint value for the current profile.
inline std::pair<std::vector<double>, ConstraintValue> axisym_velocity(const AxisymProfile& p, const AxisymGeometry& g,
                                                                       const ConstraintSpec& spec, double t)
{
    std::vector<double> V = axisym_laplacian(g, g.H);
    const ConstraintValue hv = evaluate_constraint(axisym_integrals(p, g, V), spec, t);
    if (!hv.valid) fail(ErrorCode::DenominatorVanishing, std::string(to_string(spec.kind)) + " denominator vanished");
    for (double& v : V) v += hv.h;
    return {std::move(V), hv};
}

namespace detail {

/// (D + scale * S D^-1 S), factored once per step.
inline void axisym_factor(const AxisymGeometry& g, double scale, Eigen::SimplicialLDLT<SparseMatrix>& solver)
{
    const Eigen::Index n = Eigen::Index(g.mass.size());
    Eigen::VectorXd inv_mass(n);
    for (Eigen::Index i = 0; i < n; ++i) inv_mass[i] = 1.0 / g.mass[size_t(i)];
    SparseMatrix system = SparseMatrix(g.stiffness * inv_mass.asDiagonal() * g.stiffness) * scale;
    for (Eigen::Index i = 0; i < n; ++i) system.coeffRef(i, i) += g.mass[size_t(i)];
    solver.compute(system);
    if (solver.info() != Eigen::Success) fail(ErrorCode::LinearSolveFailure, "axisymmetric system factorization failed");
}

/// dt * V * normal as an (N + 1) x 2 array of (r, z) components.
inline Eigen::MatrixX2d axisym_motion(const AxisymGeometry& g, const std::vector<double>& V, double dt)
{
    Eigen::MatrixX2d m(Eigen::Index(V.size()), 2);
    for (size_t i = 0; i < V.size(); ++i) {
        const double psi = g.normal_angle[i];
        m(Eigen::Index(i), 0) = dt * V[i] * std::sin(psi);
        m(Eigen::Index(i), 1) = -dt * V[i] * std::cos(psi);
    }
    return m;
}

inline AxisymProfile displaced(const AxisymProfile& p, const Eigen::MatrixX2d& d)
{
    AxisymProfile q = p;
    for (size_t i = 0; i < q.r.size(); ++i) {
        q.r[i] += d(Eigen::Index(i), 0);
        q.z[i] += d(Eigen::Index(i), 1);
        if (!std::isfinite(q.r[i]) || !std::isfinite(q.z[i])) fail(ErrorCode::NanDetected, "non-finite profile position");
    }
    q.r.front() = q.r.back() = 0.0;
    for (size_t i = 1; i + 1 < q.r.size(); ++i) {
        if (!(q.r[i] > 0)) q.r[i] = 0.0; // crossed the axis: only reachable past a pinch
    }
    return q;
}

} // namespace detail

/// One step of the normal-velocity update with the bilaplacian part treated implicitly. Order 1
/// solves (D + dt S D^-1 S) delta = dt D V; order 2 adds a second stage on the same factorization
/// (a Rosenbrock-W pair). The profile is resampled to equal chords afterwards.
inline AxisymStepResult axisym_step(const AxisymProfile& p, double dt, const ConstraintSpec& spec, double t, int order = 2)
{
    const AxisymGeometry g = axisym_geometry(p);
    auto [V, hv] = axisym_velocity(p, g, spec, t);
    AxisymStepResult out;
    out.h = hv.h;
    for (double v : V) out.max_speed = std::max(out.max_speed, std::abs(v));
    auto weighted = [&](Eigen::MatrixX2d rhs) {
        for (Eigen::Index i = 0; i < rhs.rows(); ++i) rhs.row(i) *= g.mass[size_t(i)];
        return rhs;
    };
    Eigen::MatrixX2d d;
    Eigen::SimplicialLDLT<SparseMatrix> solver;
    if (order == 1) {
        detail::axisym_factor(g, dt, solver);
        d = solver.solve(weighted(detail::axisym_motion(g, V, dt)));
    } else {
        constexpr double gamma = 1.0 + 0.5 * std::numbers::sqrt2;
        detail::axisym_factor(g, gamma * dt, solver);
        const Eigen::MatrixX2d d1 = solver.solve(weighted(detail::axisym_motion(g, V, dt)));
        const AxisymProfile stage = detail::displaced(p, d1);
        const AxisymGeometry g1 = axisym_geometry(stage);
        const auto v1 = axisym_velocity(stage, g1, spec, t + dt).first;
        const Eigen::MatrixX2d d2 = solver.solve(weighted(detail::axisym_motion(g1, v1, dt) - 2.0 * d1));
        d = 1.5 * d1 + 0.5 * d2;
    }
    out.profile = reparameterize(detail::displaced(p, d));
    return out;
}

inline MonitorRecord axisym_monitor(const AxisymProfile& p, double t, double dt, double h)
{
    const AxisymGeometry g = axisym_geometry(p);
    const std::vector<double> lapH = axisym_laplacian(g, g.H);
    const ConstraintIntegrals q = axisym_integrals(p, g, lapH);
    MonitorRecord m;
    m.t = t;
    m.dt = dt;
    m.vol = axisym_volume(p);
    m.area = q.area;
    m.int_H = q.H;
    m.int_abs_H = q.abs_H;
    m.int_K = q.K;
    m.int_A2 = integrate_by(g.mass, [&](size_t i) {
        return g.kappa_profile[i] * g.kappa_profile[i] + g.kappa_azimuthal[i] * g.kappa_azimuthal[i];
    });
    m.willmore = integrate_by(g.mass, [&](size_t i) { return g.H[i] * g.H[i]; });
    m.int_grad_H2 = q.grad_H2;
    m.h = h;
    m.min_edge = *std::min_element(g.edge_length.begin(), g.edge_length.end());
    return m;
}

struct AxisymTrajectory
{
    std::vector<MonitorRecord> monitors;
    std::vector<NeckSample> neck;
    AxisymProfile final_profile;
    StopReason stop = StopReason::Running;
    std::string stop_detail;
    double pinch_time = std::numeric_limits<double>::quiet_NaN();
    double max_radial_deviation = 0; ///< largest |distance to centroid - initial mean| seen, for sphere runs
    int steps = 0;
};

/// Advances until t_end or a stop criterion. A pinch is a normal stop; its time is interpolated
/// linearly in radius^4 between the two bracketing steps.
inline AxisymTrajectory axisym_run(AxisymProfile p, const AxisymScheme& scheme, const ConstraintSpec& spec)
{
    if (spec.kind == ConstraintKind::TimeFunction && spec.time_function) spec.time_function->check_bounded(0.0, scheme.t_end);
    AxisymTrajectory out;
    p = reparameterize(std::move(p));
    double t = 0.0;
    double h = 0.0;
    auto radial_extent = [](const AxisymProfile& q) {
        // Centroid of the node set on the axis, then the spread of node distances.
        double zc = 0.0;
        for (double z : q.z) zc += z;
        zc /= double(q.z.size());
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (size_t i = 0; i < q.r.size(); ++i) {
            const double d = std::hypot(q.r[i], q.z[i] - zc);
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
        return std::pair{lo, hi};
    };
    const auto [r0lo, r0hi] = radial_extent(p);
    const double r0 = 0.5 * (r0lo + r0hi);

    NeckSample neck = find_neck(p);
    neck.t = 0.0;
    out.neck.push_back(neck);
    out.monitors.push_back(axisym_monitor(p, t, 0.0, 0.0));
    double dt = 0.0;
    try {
        for (int step = 0; step < scheme.max_steps; ++step) {
            if (t >= scheme.t_end) {
                out.stop = StopReason::Completed;
                break;
            }
            const AxisymGeometry g = axisym_geometry(p);
            double vmax = 0.0;
            {
                auto [V, hv] = axisym_velocity(p, g, spec, t);
                for (double v : V) vmax = std::max(vmax, std::abs(v));
            }
            const double ds = *std::min_element(g.edge_length.begin(), g.edge_length.end());
            const double scale = std::min(ds, neck.radius);
            dt = scheme.dt_max;
            if (vmax > 0) dt = std::min(dt, scheme.alpha * scale / vmax);
            dt = std::min(dt, scheme.t_end - t);
            if (dt < scheme.dt_min) fail(ErrorCode::StepBelowDtMin, "axisymmetric step fell below dt_min");

            AxisymStepResult r = axisym_step(p, dt, spec, t, scheme.order);
            p = std::move(r.profile);
            h = r.h;
            t += dt;
            ++out.steps;

            const auto [lo, hi] = radial_extent(p);
            out.max_radial_deviation = std::max({out.max_radial_deviation, std::abs(lo - r0), std::abs(hi - r0)});
            const NeckSample prev = neck;
            neck = find_neck(p);
            neck.t = t;
            out.neck.push_back(neck);
            const bool pinched = neck.radius < scheme.pinch_radius;
            if (pinched || (step + 1) % scheme.sample_every == 0 || t >= scheme.t_end) {
                out.monitors.push_back(axisym_monitor(p, t, dt, h));
            }
            if (pinched) {
                const double a = std::pow(prev.radius, 4), b = std::pow(neck.radius, 4), c = std::pow(scheme.pinch_radius, 4);
                const double w = std::isfinite(a) && a > b ? (a - c) / (a - b) : 1.0;
                out.pinch_time = prev.t + w * (t - prev.t);
                out.stop = StopReason::PinchDetected;
                break;
            }
        }
        if (out.stop == StopReason::Running) out.stop = (t >= scheme.t_end) ? StopReason::Completed : StopReason::SolverFailure;
    } catch (const Error& e) {
        out.stop = e.code() == ErrorCode::DenominatorVanishing ? StopReason::ConstraintUndefined : StopReason::SolverFailure;
        out.stop_detail = e.what();
    }
    out.monitors.back().stop = out.stop;
    out.final_profile = std::move(p);
    return out;
}

inline void write_profile_csv(const std::string& path, const AxisymProfile& p)
{
    std::ofstream out(path);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path);
    out << "r,z\n";
    for (size_t i = 0; i < p.r.size(); ++i) out << format_number(p.r[i]) << ',' << format_number(p.z[i]) << '\n';
}

inline AxisymProfile read_profile_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path);
    AxisymProfile p;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "r,z") continue;
        const size_t comma = line.find(',');
        if (comma == std::string::npos) fail(ErrorCode::IoError, path + ": malformed row '" + line + "'");
        try {
            p.r.push_back(std::stod(line.substr(0, comma)));
            p.z.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            fail(ErrorCode::IoError, path + ": non-numeric row '" + line + "'");
        }
    }
    if (p.r.size() < 9) fail(ErrorCode::IoError, path + ": profile needs at least 9 nodes");
    if (p.r.front() != 0.0 || p.r.back() != 0.0) fail(ErrorCode::IoError, path + ": profile must start and end on the axis");
    return p;
}

} // namespace csdflow
