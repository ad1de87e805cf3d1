#pragma once

#include "csdflow/operators.hpp"

#include <cstdlib>
#include <thread>

namespace csdflow {

/// Worker count for the parallel loops: CSDFLOW_THREADS if set, else the hardware concurrency.
/// Every parallel loop writes disjoint outputs, so results do not depend on this number.
inline int worker_threads()
{
    if (const char* env = std::getenv("CSDFLOW_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return std::max(1, int(std::thread::hardware_concurrency()));
}

template <typename Fn>
inline void parallel_for(size_t count, Fn&& fn)
{
    const size_t workers = std::min(size_t(worker_threads()), std::max<size_t>(1, count / 64));
    if (workers <= 1) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (size_t i = w; i < count; i += workers) fn(i);
        });
    }
}

// ---------------------------------------------------------------------------------------------
// Curvature concentration

/// Vertex positions plus a regular grid spanning the bounding box.
inline std::vector<Vec3> default_centers(const TriMesh& mesh, int grid = 16)
{
    std::vector<Vec3> c = mesh.vertices();
    const Eigen::AlignedBox3d box = mesh.bounding_box();
    const Vec3 lo = box.min(), span = box.max() - box.min();
    for (int i = 0; i < grid; ++i) {
        for (int j = 0; j < grid; ++j) {
            for (int k = 0; k < grid; ++k) {
                const Vec3 u(double(i) / (grid - 1), double(j) / (grid - 1), double(k) / (grid - 1));
                c.push_back(lo + span.cwiseProduct(u));
            }
        }
    }
    return c;
}

/// Sums of a non-negative vertex density over open balls, accelerated by a uniform grid whose
/// cells are added wholesale when they lie entirely inside the ball.
class BallSummer
{
public:
    BallSummer(const std::vector<Vec3>& points, std::vector<double> density, double radius)
        : m_points(points)
        , m_density(std::move(density))
        , m_radius(radius)
    {
        m_box = Eigen::AlignedBox3d();
        for (const Vec3& p : points) m_box.extend(p);
        const Vec3 span = m_box.diagonal();
        const double target = std::max(radius / 2.0, span.maxCoeff() / 48.0);
        for (int a = 0; a < 3; ++a) m_dims[size_t(a)] = std::clamp(int(std::ceil(span[a] / target)), 1, 48);
        for (int a = 0; a < 3; ++a) m_cell[a] = std::max(span[a] / m_dims[size_t(a)], 1e-300);
        const size_t ncell = size_t(m_dims[0]) * size_t(m_dims[1]) * size_t(m_dims[2]);
        std::vector<int> count(ncell + 1, 0);
        std::vector<size_t> cell_of(points.size());
        for (size_t i = 0; i < points.size(); ++i) {
            cell_of[i] = cell_index(points[i]);
            ++count[cell_of[i] + 1];
        }
        for (size_t c = 0; c < ncell; ++c) count[c + 1] += count[c];
        m_start = count;
        m_members.resize(points.size());
        std::vector<int> fill(count.begin(), count.end() - 1);
        for (size_t i = 0; i < points.size(); ++i) m_members[size_t(fill[cell_of[i]]++)] = int(i);
        m_total.assign(ncell, 0.0);
        for (size_t c = 0; c < ncell; ++c) {
            for (int k = m_start[c]; k < m_start[c + 1]; ++k) m_total[c] += m_density[size_t(m_members[size_t(k)])];
        }
    }

    double sum(const Vec3& center) const
    {
        const double r2 = m_radius * m_radius;
        std::array<int, 3> lo{}, hi{};
        for (int a = 0; a < 3; ++a) {
            lo[size_t(a)] = std::clamp(int(std::floor((center[a] - m_radius - m_box.min()[a]) / m_cell[a])), 0, m_dims[size_t(a)] - 1);
            hi[size_t(a)] = std::clamp(int(std::floor((center[a] + m_radius - m_box.min()[a]) / m_cell[a])), 0, m_dims[size_t(a)] - 1);
        }
        double s = 0.0;
        for (int i = lo[0]; i <= hi[0]; ++i) {
            for (int j = lo[1]; j <= hi[1]; ++j) {
                for (int k = lo[2]; k <= hi[2]; ++k) {
                    const size_t c = (size_t(i) * size_t(m_dims[1]) + size_t(j)) * size_t(m_dims[2]) + size_t(k);
                    if (m_start[c] == m_start[c + 1]) continue;
                    const Vec3 cmin = m_box.min() + Vec3(i * m_cell[0], j * m_cell[1], k * m_cell[2]);
                    const Vec3 cmax = cmin + Vec3(m_cell[0], m_cell[1], m_cell[2]);
                    const Vec3 near = center.cwiseMax(cmin).cwiseMin(cmax);
                    if ((near - center).squaredNorm() >= r2) continue;
                    const Vec3 far = (center - cmin).cwiseAbs().cwiseMax((center - cmax).cwiseAbs());
                    if (far.squaredNorm() < r2 * (1.0 - 1e-12)) {
                        s += m_total[c];
                        continue;
                    }
                    for (int q = m_start[c]; q < m_start[c + 1]; ++q) {
                        const size_t v = size_t(m_members[size_t(q)]);
                        if ((m_points[v] - center).squaredNorm() < r2) s += m_density[v];
                    }
                }
            }
        }
        return s;
    }

private:
    size_t cell_index(const Vec3& p) const
    {
        std::array<int, 3> ijk{};
        for (int a = 0; a < 3; ++a) {
            ijk[size_t(a)] = std::clamp(int(std::floor((p[a] - m_box.min()[a]) / m_cell[a])), 0, m_dims[size_t(a)] - 1);
        }
        return (size_t(ijk[0]) * size_t(m_dims[1]) + size_t(ijk[1])) * size_t(m_dims[2]) + size_t(ijk[2]);
    }

    const std::vector<Vec3>& m_points;
    std::vector<double> m_density;
    double m_radius;
    Eigen::AlignedBox3d m_box;
    std::array<int, 3> m_dims{};
    Vec3 m_cell;
    std::vector<int> m_start, m_members;
    std::vector<double> m_total;
};

struct ConcentrationReport
{
    double rho = 0;
    double p = 2;
    std::vector<Vec3> centers;
    std::vector<double> values;
    double eta = 0;
    size_t argmax = 0;
    double total = 0; ///< integral |A|^p over the whole surface

    const Vec3& argmax_center() const { return centers[argmax]; }
};

/// |A|^p weighted by the vertex masses.
inline std::vector<double> curvature_density(const GeometryCache& cache, double p)
{
    std::vector<double> d(cache.A2.size());
    for (size_t i = 0; i < d.size(); ++i) d[i] = cache.op.mass[i] * std::pow(cache.A2[i], 0.5 * p);
    return d;
}

/// Curvature mass of |A|^p in the open ball of radius rho around each center; eta is the largest.
inline ConcentrationReport concentration(const TriMesh& mesh, const GeometryCache& cache, double rho, double p = 2.0,
                                         std::vector<Vec3> centers = {})
{
    if (!(rho > 0)) fail(ErrorCode::InvalidArgument, "concentration radius must be positive");
    if (!(p >= 1)) fail(ErrorCode::InvalidArgument, "concentration exponent must be at least 1");
    ConcentrationReport r;
    r.rho = rho;
    r.p = p;
    r.centers = centers.empty() ? default_centers(mesh) : std::move(centers);
    const std::vector<double> density = curvature_density(cache, p);
    for (double d : density) r.total += d;
    const BallSummer summer(mesh.vertices(), density, rho);
    r.values.assign(r.centers.size(), 0.0);
    parallel_for(r.centers.size(), [&](size_t i) { r.values[i] = summer.sum(r.centers[i]); });
    for (size_t i = 0; i < r.values.size(); ++i) {
        if (r.values[i] > r.eta) {
            r.eta = r.values[i];
            r.argmax = i;
        }
    }
    return r;
}

struct LifespanRadius
{
    double rho_star = 0;  ///< largest bracketed radius with eta <= eps0
    double rho_upper = 0; ///< smallest bracketed radius with eta > eps0
    double eta_at_star = 0;
    double eta_at_upper = 0;
    double diameter = 0;
    bool threshold_above_total = false;
};

/// Bisection on the non-decreasing map rho -> eta(rho) over (0, d_ext], to relative tolerance.
inline LifespanRadius lifespan_radius(const TriMesh& mesh, const GeometryCache& cache, double eps0, double p = 2.0,
                                      const std::vector<Vec3>& centers = {}, double rel_tol = 1e-3)
{
    if (!(eps0 > 0)) fail(ErrorCode::InvalidArgument, "eps0 must be positive");
    LifespanRadius out;
    out.diameter = extrinsic_diameter(mesh);
    const std::vector<Vec3> c = centers.empty() ? default_centers(mesh) : centers;
    double total = 0.0;
    for (double d : curvature_density(cache, p)) total += d;
    auto eta = [&](double rho) { return concentration(mesh, cache, rho, p, c).eta; };
    if (eps0 >= total) {
        out.threshold_above_total = true;
        out.rho_star = out.rho_upper = out.diameter;
        out.eta_at_star = out.eta_at_upper = eta(out.diameter);
        return out;
    }
    double lo = 0.0, hi = out.diameter;
    double eta_lo = 0.0, eta_hi = eta(hi);
    if (eta_hi <= eps0) {
        out.rho_star = out.rho_upper = hi;
        out.eta_at_star = out.eta_at_upper = eta_hi;
        return out;
    }
    while (hi - lo > rel_tol * hi) {
        const double mid = 0.5 * (lo + hi);
        const double e = eta(mid);
        if (e <= eps0) {
            lo = mid;
            eta_lo = e;
        } else {
            hi = mid;
            eta_hi = e;
        }
    }
    out.rho_star = lo;
    out.rho_upper = hi;
    out.eta_at_star = eta_lo;
    out.eta_at_upper = eta_hi;
    return out;
}

struct LifespanEstimate
{
    double eps0 = 0;
    double c = 0;             ///< rate in rho*^4 ~ c (T - t)
    double t_est = 0;         ///< extrapolated singular time
    double r_squared = 0;
    double t_lower = 0;       ///< rho*(0)^4 / c
    double window_start = 0;
    size_t samples = 0;
    std::vector<double> residuals;
    bool no_concentration = false;
};

/// Least-squares line through (t, rho*^4) on the final `window` fraction of the run.
inline LifespanEstimate lifespan_fit(const std::vector<double>& t, const std::vector<double>& rho_star, double eps0,
                                     double window = 0.3, size_t min_samples = 8)
{
    if (t.size() != rho_star.size() || t.empty()) fail(ErrorCode::InvalidArgument, "lifespan series are empty or ragged");
    LifespanEstimate e;
    e.eps0 = eps0;
    const double t0 = t.front(), t1 = t.back();
    e.window_start = t1 - window * (t1 - t0);
    std::vector<double> x, y;
    for (size_t i = 0; i < t.size(); ++i) {
        if (t[i] >= e.window_start) {
            x.push_back(t[i]);
            y.push_back(std::pow(rho_star[i], 4));
        }
    }
    e.samples = x.size();
    if (x.size() < min_samples) {
        fail(ErrorCode::InsufficientSamples,
             std::to_string(x.size()) + " samples in the fit window, need " + std::to_string(min_samples));
    }
    Eigen::MatrixX2d A(Eigen::Index(x.size()), 2);
    Eigen::VectorXd b(Eigen::Index(x.size()));
    for (size_t i = 0; i < x.size(); ++i) {
        A(Eigen::Index(i), 0) = 1.0;
        A(Eigen::Index(i), 1) = x[i];
        b[Eigen::Index(i)] = y[i];
    }
    const Eigen::Vector2d coef = A.colPivHouseholderQr().solve(b);
    const Eigen::VectorXd res = b - A * coef;
    e.residuals.assign(res.data(), res.data() + res.size());
    const double mean = b.mean();
    const double ss_tot = (b.array() - mean).square().sum();
    const double ss_res = res.squaredNorm();
    e.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 0.0;
    e.c = -coef(1);
    // Decay across the window smaller than a millionth of the level counts as no concentration.
    const double drop = e.c * (x.back() - x.front());
    if (!(e.c > 0) || drop <= 1e-6 * std::abs(mean)) {
        e.no_concentration = true;
        e.t_est = std::numeric_limits<double>::infinity();
        e.t_lower = std::numeric_limits<double>::infinity();
        return e;
    }
    e.t_est = coef(0) / e.c;
    e.t_lower = std::pow(rho_star.front(), 4) / e.c;
    return e;
}

// ---------------------------------------------------------------------------------------------
// Inequality checkers

struct RatioReport
{
    double lhs = 0;
    double rhs = 0;
    double ratio = 0;
    bool holds = false;
};

inline double topping_constant_n2() { return 32.0 / std::numbers::pi; }

/// Extrinsic diameter against (32 / pi) integral |H|.
inline RatioReport check_topping(const TriMesh& mesh, const GeometryCache& cache)
{
    RatioReport r;
    r.lhs = extrinsic_diameter(mesh);
    r.rhs = topping_constant_n2() * integrate_by(cache.mass(), [&](size_t i) { return std::abs(cache.H[i]); });
    r.ratio = r.lhs / r.rhs;
    r.holds = r.ratio <= 1.0;
    return r;
}

/// Volume of the unit ball in R^n.
inline double unit_ball_volume(int n) { return std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0); }

/// 4^{n+1} / omega_n^{1/n}; 64 / sqrt(pi) for surfaces.
inline double michael_simon_constant(int n) { return std::pow(4.0, n + 1) / std::pow(unit_ball_volume(n), 1.0 / n); }

/// (integral u^2)^{1/2} against C (integral |grad u| + integral |u| |H|), for surfaces.
inline RatioReport check_michael_simon(const TriMesh& mesh, const GeometryCache& cache, const std::vector<double>& u)
{
    if (u.size() != size_t(mesh.num_vertices())) fail(ErrorCode::InvalidArgument, "field size does not match the mesh");
    RatioReport r;
    r.lhs = std::sqrt(integrate_by(cache.mass(), [&](size_t i) { return u[i] * u[i]; }));
    double grad = 0.0;
    for (int f = 0; f < mesh.num_faces(); ++f) {
        grad += cache.op.face_area[size_t(f)] * face_gradient(mesh, cache.op, f, u.data()).norm();
    }
    const double weighted = integrate_by(cache.mass(), [&](size_t i) { return std::abs(u[i] * cache.H[i]); });
    r.rhs = michael_simon_constant(2) * (grad + weighted);
    r.ratio = r.lhs / r.rhs;
    r.holds = r.ratio <= 1.0;
    return r;
}

/// Radial cutoff: 1 on the ball of radius rho, 0 outside radius 2 rho, with a quintic smoothstep
/// in between. The recorded derivative bounds are the maxima of the profile's first and second
/// derivatives: 15/8 / rho and (10 / sqrt(3)) / rho^2.
struct CutoffSpec
{
    Vec3 center = Vec3::Zero();
    double rho = 1.0;
    double c_gamma1 = 0.0;
    double c_gamma2 = 0.0;
    bool everywhere = false;

    static CutoffSpec ball(const Vec3& center, double rho)
    {
        if (!(rho > 0)) fail(ErrorCode::InvalidArgument, "cutoff radius must be positive");
        return {center, rho, 1.875 / rho, (10.0 / std::sqrt(3.0)) / (rho * rho), false};
    }

    /// The constant function 1 (all derivative bounds zero).
    static CutoffSpec unit() { return {Vec3::Zero(), std::numeric_limits<double>::infinity(), 0.0, 0.0, true}; }

    double operator()(const Vec3& x) const
    {
        if (everywhere) return 1.0;
        const double s = ((x - center).norm() - rho) / rho;
        if (s <= 0) return 1.0;
        if (s >= 1) return 0.0;
        return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
    }
};

struct InterpolationReport
{
    double beta = 0, theta = 0, s = 0;
    double grad_A = 0;       ///< integral |grad A|^2 gamma^{s-2}
    double lap_A = 0;        ///< integral |Delta A|^2 gamma^s (surrogate for the second derivative)
    double A2 = 0;           ///< integral |A|^2 gamma^{s-4} over gamma > 0
    double lhs = 0, rhs = 0;
    double ratio = 0;
    double slack = 0.1;
    int support = 0;         ///< vertices with gamma > 0
    bool holds = false;
};

/// Evaluates (1 - beta) int |grad A|^2 g^{s-2} <= theta int |grad2 A|^2 g^s + C int |A|^2 g^{s-4}
/// with C = (beta + theta ((s - 2) c_gamma1)^2) / (4 beta theta). First and second derivatives of
/// A are replaced by the per-face gradient and the cotan Laplacian of its nine ambient components.
inline InterpolationReport check_interpolation_babyint(const TriMesh& mesh, const GeometryCache& cache, const CutoffSpec& cutoff,
                                                      double beta = 1.0, double theta = 1.0, double s = 4.0, double slack = 0.1)
{
    if (!(beta > 0 && theta > 0 && s >= 4)) fail(ErrorCode::InvalidArgument, "need beta, theta > 0 and s >= 4");
    const size_t nv = size_t(mesh.num_vertices());
    InterpolationReport r;
    r.beta = beta;
    r.theta = theta;
    r.s = s;
    r.slack = slack;
    std::vector<double> gamma(nv);
    for (size_t i = 0; i < nv; ++i) {
        gamma[i] = cutoff(mesh.vertex(int(i)));
        if (gamma[i] > 0) ++r.support;
    }
    if (r.support < 50) {
        fail(ErrorCode::CutoffTooNarrow, "cutoff covers " + std::to_string(r.support) + " vertices, need 50");
    }

    std::vector<double> grad2(nv, 0.0), lap2(nv, 0.0), comp(nv);
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            for (size_t i = 0; i < nv; ++i) comp[i] = cache.A[i](a, b);
            const std::vector<double> g = grad_norm_sq(mesh, cache.op, comp);
            const std::vector<double> l = apply_laplacian(cache.op, comp);
            for (size_t i = 0; i < nv; ++i) {
                grad2[i] += g[i];
                lap2[i] += l[i] * l[i];
            }
        }
    }
    const auto& m = cache.mass();
    for (size_t i = 0; i < nv; ++i) {
        if (gamma[i] <= 0) continue;
        r.grad_A += m[i] * grad2[i] * std::pow(gamma[i], s - 2);
        r.lap_A += m[i] * lap2[i] * std::pow(gamma[i], s);
        r.A2 += m[i] * cache.A2[i] * std::pow(gamma[i], s - 4);
    }
    const double coef = (beta + theta * std::pow((s - 2) * cutoff.c_gamma1, 2)) / (4.0 * beta * theta);
    r.lhs = (1.0 - beta) * r.grad_A;
    r.rhs = theta * r.lap_A + coef * r.A2;
    r.ratio = r.rhs > 0 ? r.lhs / r.rhs : (r.lhs > 0 ? std::numeric_limits<double>::infinity() : 0.0);
    r.holds = r.lhs <= (1.0 + slack) * r.rhs;
    return r;
}

struct CoveringReport
{
    double rho = 0;
    int count = 0;
    double log_bound = 0;        ///< natural log of the bound
    double bound = 0;            ///< may overflow to +inf; compare in log space
    Vec3 x2 = Vec3::Zero();      ///< argmax of the ball integral of |A|^4
    double max_ball_A4 = 0;
    bool beyond_remark_range = false; ///< rho > d_ext sqrt(3) / 2, where a single ball suffices
    bool holds = false;
};

/// Greedy farthest-point cover of the vertex set by closed balls of radius rho, seeded at the
/// bounding-box centre, against (32 sqrt3 / (2 pi rho))^12 |M|^9 (int_{B_rho(x2)} |A|^4)^3.
inline CoveringReport covering_count(const TriMesh& mesh, const GeometryCache& cache, double rho)
{
    if (!(rho > 0) || !std::isfinite(rho)) fail(ErrorCode::RhoOutOfRange, "covering radius must be positive and finite");
    CoveringReport r;
    r.rho = rho;
    const double dext = extrinsic_diameter(mesh);
    r.beyond_remark_range = rho > dext * std::sqrt(3.0) / 2.0;

    const auto& x = mesh.vertices();
    std::vector<double> dist(x.size());
    const Vec3 seed = mesh.bounding_box().center();
    for (size_t i = 0; i < x.size(); ++i) dist[i] = (x[i] - seed).norm();
    r.count = 1;
    for (;;) {
        const size_t far = size_t(std::max_element(dist.begin(), dist.end()) - dist.begin());
        if (dist[far] <= rho) break;
        ++r.count;
        const Vec3 c = x[far];
        for (size_t i = 0; i < x.size(); ++i) dist[i] = std::min(dist[i], (x[i] - c).norm());
    }

    const ConcentrationReport a4 = concentration(mesh, cache, rho, 4.0);
    r.x2 = a4.argmax_center();
    r.max_ball_A4 = a4.eta;
    const double area = surface_area(mesh);
    r.log_bound = 12.0 * std::log(32.0 * std::sqrt(3.0) / (2.0 * std::numbers::pi * rho)) + 9.0 * std::log(area) +
                  3.0 * std::log(r.max_ball_A4);
    r.bound = std::exp(r.log_bound);
    r.holds = std::log(double(r.count)) <= r.log_bound;
    return r;
}

/// Pointwise residual |2K - (H^2 - |A|^2)| of the discrete Gauss equation, relative to |A|^2.
inline std::vector<double> gauss_equation_residual(const GeometryCache& c)
{
    std::vector<double> r(c.H.size());
    for (size_t i = 0; i < r.size(); ++i) r[i] = std::abs(2.0 * c.K[i] - (c.H[i] * c.H[i] - c.A2[i])) / c.A2[i];
    return r;
}

/// Thinnest waist of a surface elongated along z: the smallest distance to the z-axis among
/// vertices lying between the widest points of the lower and upper halves.
struct Waist
{
    double radius = std::numeric_limits<double>::infinity();
    double z = 0;
};

inline Waist waist(const TriMesh& mesh)
{
    double zc = 0.0;
    for (const Vec3& p : mesh.vertices()) zc += p.z();
    zc /= mesh.num_vertices();
    double r_up = -1, z_up = 0, r_dn = -1, z_dn = 0;
    for (const Vec3& p : mesh.vertices()) {
        const double r = p.head<2>().norm();
        if (p.z() > zc && r > r_up) {
            r_up = r;
            z_up = p.z();
        } else if (p.z() <= zc && r > r_dn) {
            r_dn = r;
            z_dn = p.z();
        }
    }
    Waist w;
    for (const Vec3& p : mesh.vertices()) {
        if (p.z() > z_dn && p.z() < z_up) {
            const double r = p.head<2>().norm();
            if (r < w.radius) {
                w.radius = r;
                w.z = p.z();
            }
        }
    }
    return w;
}

} // namespace csdflow
