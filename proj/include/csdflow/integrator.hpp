#pragma once

#include "csdflow/constraints.hpp"
#include "csdflow/monitor.hpp"

#include <Eigen/CholmodSupport>

#include <functional>
#include <optional>

// Present when the BLAS behind CHOLMOD is OpenBLAS; left null otherwise.
extern "C" void openblas_set_num_threads(int) __attribute__((weak));

namespace csdflow {

enum class SchemeKind { ExplicitEuler, SemiImplicit };

inline std::string_view to_string(SchemeKind k) { return k == SchemeKind::ExplicitEuler ? "ExplicitEuler" : "SemiImplicit"; }

inline SchemeKind parse_scheme_kind(std::string_view s)
{
    if (s == "ExplicitEuler" || s == "explicit") return SchemeKind::ExplicitEuler;
    if (s == "SemiImplicit" || s == "semi-implicit" || s == "imex") return SchemeKind::SemiImplicit;
    fail(ErrorCode::ConfigInvalid, "unknown scheme '" + std::string(s) + "'");
}

enum class DenominatorPolicy { Stop, Throw };

struct SchemeSpec
{
    SchemeKind kind = SchemeKind::SemiImplicit;
    double dt_init = 1e-5;
    double dt_min = 1e-14;
    double dt_max = 1e-3;
    double safety = 0.5;
    /// Stability constant of the explicit step: dt <= min_edge^4 / explicit_k4.
    double explicit_k4 = 32.0;
    int max_steps = 1000000;
    double t_end = 0.05;
    /// NeckCollapse once the shortest edge drops below this fraction of the initial mean edge.
    double min_edge_frac = 0.02;
    /// CurvatureBlowup once max |A| exceeds this multiple of its initial value.
    double max_curvature_factor = 1e3;
    /// Displacement control for the semi-implicit scheme, as fractions of the shortest edge.
    double reject_displacement = 0.2;
    double grow_displacement = 0.02;
    double grow_factor = 1.25;
    /// Time accuracy of the semi-implicit scheme: 1 is the linearly implicit Euler step, 2 adds a
    /// second stage (a Rosenbrock-W pair sharing one factorization).
    int order = 1;
    DenominatorPolicy denominator_policy = DenominatorPolicy::Stop;
    double tangential_smoothing = 0.0;

    void validate() const
    {
        if (!(dt_min > 0 && dt_min <= dt_init && dt_init <= dt_max)) {
            fail(ErrorCode::ConfigInvalid, "scheme needs 0 < dt_min <= dt_init <= dt_max");
        }
        if (!(safety > 0) || !(explicit_k4 > 0) || max_steps <= 0 || !(t_end >= 0)) {
            fail(ErrorCode::ConfigInvalid, "scheme has a non-positive safety, k4, step budget or end time");
        }
        if (!(min_edge_frac >= 0 && min_edge_frac < 1) || !(max_curvature_factor > 1)) {
            fail(ErrorCode::ConfigInvalid, "stop thresholds out of range");
        }
        if (order != 1 && order != 2) fail(ErrorCode::ConfigInvalid, "semi-implicit order must be 1 or 2");
        if (!(tangential_smoothing >= 0 && tangential_smoothing <= 1)) {
            fail(ErrorCode::ConfigInvalid, "tangential smoothing must lie in [0, 1]");
        }
    }
};

struct FlowState
{
    TriMesh mesh;
    double t = 0;
    GeometryCache cache;
    ConstraintValue last_h;
    int step_index = 0;
    double dt = 0;                ///< step size used for the most recent step (0 before the first)
    double next_dt = 0;           ///< proposal for the next step
    double last_displacement = 0; ///< largest vertex displacement of the most recent step
};

inline FlowState make_state(TriMesh mesh, const SchemeSpec& scheme)
{
    FlowState s{std::move(mesh), 0.0, {}, {}, 0, 0.0, scheme.dt_init, 0.0};
    s.cache = compute_geometry(s.mesh);
    return s;
}

/// Step size proposal. Explicit: safety * min_edge^4 / k4, clamped to [dt_min, dt_max].
/// Semi-implicit: the previous proposal, grown when the last step moved less than
/// grow_displacement * min_edge, clamped to dt_max.
inline double adapt_dt(const FlowState& state, const SchemeSpec& spec)
{
    if (spec.kind == SchemeKind::ExplicitEuler) {
        const double h = min_edge_length(state.mesh);
        return std::clamp(spec.safety * h * h * h * h / spec.explicit_k4, spec.dt_min, spec.dt_max);
    }
    double dt = state.next_dt > 0 ? state.next_dt : spec.dt_init;
    if (state.step_index > 0 && state.last_displacement < spec.grow_displacement * min_edge_length(state.mesh)) {
        dt *= spec.grow_factor;
    }
    return std::min(dt, spec.dt_max);
}

/// Moves each vertex a fraction `strength` of the way to the area-weighted centroid of its
/// one-ring faces, keeping only the tangential part of the move.
inline TriMesh tangential_smooth(const TriMesh& mesh, double strength)
{
    if (!(strength >= 0 && strength <= 1)) fail(ErrorCode::InvalidArgument, "smoothing strength must lie in [0, 1]");
    if (strength == 0) return mesh;
    const std::vector<Vec3> normals = vertex_normals(mesh);
    std::vector<Vec3> x = mesh.vertices();
    for (int i = 0; i < mesh.num_vertices(); ++i) {
        Vec3 c = Vec3::Zero();
        double w = 0.0;
        for (int f : mesh.vertex_faces(i)) {
            const Face& t = mesh.faces()[size_t(f)];
            const double a = mesh.face_area(f);
            c += a * (mesh.vertex(t[0]) + mesh.vertex(t[1]) + mesh.vertex(t[2])) / 3.0;
            w += a;
        }
        Vec3 d = c / w - mesh.vertex(i);
        d -= d.dot(normals[size_t(i)]) * normals[size_t(i)];
        x[size_t(i)] += strength * d;
    }
    return mesh.with_positions(std::move(x));
}

namespace detail {

/// The supernodal factorization runs dense kernels through BLAS, whose own threads would make
/// the result depend on the core count. One BLAS thread keeps every run bitwise repeatable.
inline void pin_blas_threads()
{
    static const bool pinned = [] {
        if (openblas_set_num_threads) openblas_set_num_threads(1);
        return true;
    }();
    (void)pinned;
}

/// Factorization workspace reused across steps; the symbolic analysis is kept while the sparsity
/// pattern is unchanged.
struct ImplicitSolver
{
    ImplicitSolver() { pin_blas_threads(); }

    Eigen::CholmodSupernodalLLT<SparseMatrix> llt;
    std::vector<SparseMatrix::StorageIndex> outer, inner;
    bool analyzed = false;

    void factorize(const SparseMatrix& A)
    {
        const bool same = analyzed && outer.size() == size_t(A.outerSize() + 1) && inner.size() == size_t(A.nonZeros()) &&
                          std::equal(outer.begin(), outer.end(), A.outerIndexPtr()) &&
                          std::equal(inner.begin(), inner.end(), A.innerIndexPtr());
        if (!same) {
            llt.analyzePattern(A);
            outer.assign(A.outerIndexPtr(), A.outerIndexPtr() + A.outerSize() + 1);
            inner.assign(A.innerIndexPtr(), A.innerIndexPtr() + A.nonZeros());
            analyzed = true;
        }
        llt.factorize(A);
        if (llt.info() != Eigen::Success) fail(ErrorCode::LinearSolveFailure, "factorization of the step operator failed");
    }
};

inline std::vector<double> normal_speed(const FlowState& s, double h)
{
    std::vector<double> v(s.cache.lap_H.size());
    for (size_t i = 0; i < v.size(); ++i) {
        v[i] = s.cache.lap_H[i] + h;
        if (!std::isfinite(v[i])) fail(ErrorCode::NanDetected, "non-finite normal speed at vertex " + std::to_string(i));
    }
    return v;
}

inline Eigen::MatrixX3d velocity_field(const GeometryCache& c, const std::vector<double>& speed, double dt)
{
    Eigen::MatrixX3d v(Eigen::Index(speed.size()), 3);
    for (size_t i = 0; i < speed.size(); ++i) v.row(Eigen::Index(i)) = dt * speed[i] * c.normal[i].transpose();
    return v;
}

/// Factors mass + scale * L mass^-1 L for the current state.
inline void factor_step_operator(const FlowState& s, double scale, ImplicitSolver& solver)
{
    const auto& m = s.cache.mass();
    const SparseMatrix& L = s.cache.op.stiffness;
    const Eigen::Index n = L.rows();
    Eigen::VectorXd inv_mass(n);
    for (Eigen::Index i = 0; i < n; ++i) inv_mass[i] = 1.0 / m[size_t(i)];
    SparseMatrix A = SparseMatrix(L * inv_mass.asDiagonal() * L) * scale;
    for (Eigen::Index i = 0; i < n; ++i) A.coeffRef(i, i) += m[size_t(i)];
    solver.factorize(A);
}

inline Eigen::MatrixX3d solve_mass_weighted(const FlowState& s, Eigen::MatrixX3d rhs, ImplicitSolver& solver)
{
    const auto& m = s.cache.mass();
    for (Eigen::Index i = 0; i < rhs.rows(); ++i) rhs.row(i) *= m[size_t(i)];
    Eigen::MatrixX3d d = solver.llt.solve(rhs);
    if (solver.llt.info() != Eigen::Success) fail(ErrorCode::LinearSolveFailure, "back-substitution failed");
    return d;
}

inline FlowState advance(const FlowState& s, const Eigen::MatrixX3d& d, double dt, double smoothing,
                         GeometryLevel level = GeometryLevel::Full)
{
    std::vector<Vec3> x = s.mesh.vertices();
    for (size_t i = 0; i < x.size(); ++i) x[i] += d.row(Eigen::Index(i)).transpose();
    FlowState next;
    next.mesh = s.mesh.with_positions(std::move(x));
    if (smoothing > 0) next.mesh = tangential_smooth(next.mesh, smoothing);
    next.cache = compute_geometry(next.mesh, level);
    next.t = s.t + dt;
    next.step_index = s.step_index + 1;
    next.dt = dt;
    next.last_h = s.last_h;
    next.last_displacement = d.rowwise().norm().maxCoeff();
    return next;
}

} // namespace detail

/// Workspace for repeated steps on one topology.
class Stepper
{
public:
    explicit Stepper(SchemeSpec spec)
        : m_spec(std::move(spec))
    {
        m_spec.validate();
    }

    const SchemeSpec& spec() const { return m_spec; }

    /// Advances by one accepted step. The semi-implicit scheme halves dt until the largest vertex
    /// move is at most reject_displacement * min_edge; both schemes stop short of `t_limit`.
    FlowState step(const FlowState& state, const ConstraintSpec& constraint,
                   double t_limit = std::numeric_limits<double>::infinity())
    {
        const ConstraintValue hv = compute_h(state.mesh, state.cache, constraint, state.t);
        const std::vector<double> speed = detail::normal_speed(state, hv.h);
        double proposed = adapt_dt(state, m_spec);
        double dt = std::min(proposed, t_limit - state.t);
        bool truncated = dt < proposed;
        const double edge = min_edge_length(state.mesh);
        const double limit = m_spec.reject_displacement * edge;
        for (;;) {
            if (dt < m_spec.dt_min && !truncated) {
                fail(ErrorCode::StepBelowDtMin, "step size fell below dt_min at t = " + format_number(state.t));
            }
            const std::optional<Eigen::MatrixX3d> trial = displacement(state, speed, dt, constraint);
            if (trial && !trial->allFinite()) fail(ErrorCode::NanDetected, "non-finite displacement");
            // A stable explicit step moves every vertex by a small fraction of an edge. Crossing a
            // whole edge inverts the one-ring and the surface that follows is finite but meaningless.
            if (m_spec.kind == SchemeKind::ExplicitEuler && trial->rowwise().norm().maxCoeff() > edge) {
                fail(ErrorCode::NanDetected, "explicit step diverged at t = " + format_number(state.t));
            }
            if (!trial || (m_spec.kind == SchemeKind::SemiImplicit && trial->rowwise().norm().maxCoeff() > limit)) {
                dt *= 0.5;
                proposed = dt;
                truncated = false;
                continue;
            }
            FlowState next = detail::advance(state, *trial, dt, m_spec.tangential_smoothing);
            next.last_h = hv;
            // A final step shortened to land on t_limit does not shrink later proposals.
            next.next_dt = truncated ? proposed : dt;
            return next;
        }
    }

private:
    /// Vertex displacements for a step of size dt, or nothing when the intermediate stage of the
    /// second-order scheme produced an invalid surface (the caller then retries with dt / 2).
    std::optional<Eigen::MatrixX3d> displacement(const FlowState& state, const std::vector<double>& speed, double dt,
                                                 const ConstraintSpec& constraint)
    {
        const Eigen::MatrixX3d v0 = detail::velocity_field(state.cache, speed, dt);
        if (m_spec.kind == SchemeKind::ExplicitEuler) return v0;
        if (m_spec.order == 1) {
            detail::factor_step_operator(state, dt, m_solver);
            return detail::solve_mass_weighted(state, v0, m_solver);
        }
        constexpr double gamma = 1.0 + 0.5 * std::numbers::sqrt2;
        detail::factor_step_operator(state, gamma * dt, m_solver);
        const Eigen::MatrixX3d d1 = detail::solve_mass_weighted(state, v0, m_solver);
        FlowState stage;
        try {
            stage = detail::advance(state, d1, dt, 0.0, GeometryLevel::Flow);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::DegenerateFace || e.code() == ErrorCode::NanDetected) return std::nullopt;
            throw;
        }
        const ConstraintValue h1 = compute_h(stage.mesh, stage.cache, constraint, state.t + dt);
        const Eigen::MatrixX3d v1 = detail::velocity_field(stage.cache, detail::normal_speed(stage, h1.h), dt);
        const Eigen::MatrixX3d d2 = detail::solve_mass_weighted(state, v1 - 2.0 * d1, m_solver);
        return Eigen::MatrixX3d(1.5 * d1 + 0.5 * d2);
    }

    SchemeSpec m_spec;
    detail::ImplicitSolver m_solver;
};

/// One step with a fresh workspace.
inline FlowState step(const FlowState& state, const SchemeSpec& spec, const ConstraintSpec& constraint)
{
    Stepper stepper(spec);
    return stepper.step(state, constraint);
}

inline MonitorRecord monitor(const FlowState& s)
{
    const auto& c = s.cache;
    const auto& m = c.mass();
    MonitorRecord r;
    r.t = s.t;
    r.dt = s.dt;
    r.vol = enclosed_volume(s.mesh);
    r.area = surface_area(s.mesh);
    r.int_H = integrate(m, c.H);
    r.int_abs_H = integrate_by(m, [&](size_t i) { return std::abs(c.H[i]); });
    r.int_K = integrate(m, c.K);
    r.int_A2 = integrate(m, c.A2);
    r.willmore = integrate_by(m, [&](size_t i) { return c.H[i] * c.H[i]; });
    r.int_grad_H2 = integrate(m, c.grad_H2);
    r.h = s.last_h.h;
    r.min_edge = min_edge_length(s.mesh);
    return r;
}

struct MonitorConfig
{
    int sample_every = 1;   ///< monitor row every k steps (the first and last rows are always kept)
    int snapshot_every = 0; ///< keep a mesh snapshot every k steps; 0 keeps only the first and last
    std::function<void(const FlowState&)> observer; ///< called after every accepted step
};

struct Snapshot
{
    int step = 0;
    double t = 0;
    TriMesh mesh;
};

struct Trajectory
{
    std::vector<MonitorRecord> monitors;
    std::vector<Snapshot> snapshots;
    StopReason stop = StopReason::Running;
    std::string stop_detail;
    std::optional<FlowState> final_state;
};

inline double max_curvature(const GeometryCache& c) { return std::sqrt(*std::max_element(c.A2.begin(), c.A2.end())); }

/// Integrates until t_end or a stop criterion. Stops are normal outcomes and are recorded in the
/// last monitor row; only invalid input throws.
inline Trajectory run(TriMesh initial, const SchemeSpec& scheme, const ConstraintSpec& constraint,
                      const MonitorConfig& monitors = {})
{
    scheme.validate();
    if (constraint.kind == ConstraintKind::TimeFunction) {
        if (!constraint.time_function) fail(ErrorCode::ConfigInvalid, "TimeFunction constraint without a function");
        constraint.time_function->check_bounded(0.0, scheme.t_end);
    }
    Trajectory out;
    Stepper stepper(scheme);
    FlowState state = make_state(std::move(initial), scheme);
    const double edge0 = mean_edge_length(state.mesh);
    const double curvature0 = max_curvature(state.cache);
    try {
        state.last_h = compute_h(state.mesh, state.cache, constraint, 0.0);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::DenominatorVanishing || scheme.denominator_policy == DenominatorPolicy::Throw) throw;
        out.stop = StopReason::ConstraintUndefined;
        out.stop_detail = e.what();
    }
    out.monitors.push_back(monitor(state));
    out.snapshots.push_back({0, 0.0, state.mesh});

    while (out.stop == StopReason::Running) {
        if (state.t >= scheme.t_end) {
            out.stop = StopReason::Completed;
            break;
        }
        if (state.step_index >= scheme.max_steps) {
            out.stop = StopReason::SolverFailure;
            out.stop_detail = "step budget exhausted";
            break;
        }
        try {
            state = stepper.step(state, constraint, scheme.t_end);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::DenominatorVanishing && scheme.denominator_policy == DenominatorPolicy::Stop) {
                out.stop = StopReason::ConstraintUndefined;
            } else if (e.code() == ErrorCode::DenominatorVanishing) {
                throw;
            } else {
                out.stop = StopReason::SolverFailure;
            }
            out.stop_detail = e.what();
            break;
        }
        if (monitors.observer) monitors.observer(state);
        const double edge = min_edge_length(state.mesh);
        if (edge < scheme.min_edge_frac * edge0) {
            out.stop = StopReason::NeckCollapse;
            out.stop_detail = "min edge " + format_number(edge);
        } else if (max_curvature(state.cache) > scheme.max_curvature_factor * curvature0) {
            out.stop = StopReason::CurvatureBlowup;
            out.stop_detail = "max |A| " + format_number(max_curvature(state.cache));
        } else if (state.t >= scheme.t_end) {
            out.stop = StopReason::Completed;
        }
        const bool last = out.stop != StopReason::Running;
        if (last || state.step_index % std::max(1, monitors.sample_every) == 0) out.monitors.push_back(monitor(state));
        if (last || (monitors.snapshot_every > 0 && state.step_index % monitors.snapshot_every == 0)) {
            out.snapshots.push_back({state.step_index, state.t, state.mesh});
        }
    }
    if (out.monitors.back().t != state.t) out.monitors.push_back(monitor(state));
    if (out.snapshots.back().step != state.step_index) out.snapshots.push_back({state.step_index, state.t, state.mesh});
    out.monitors.back().stop = out.stop;
    out.final_state = std::move(state);
    return out;
}

} // namespace csdflow
