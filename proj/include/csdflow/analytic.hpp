#pragma once

#include "csdflow/error.hpp"

#include <Eigen/Dense>

#include <numbers>
#include <random>
#include <sstream>
#include <vector>

namespace csdflow {

/// Position, first and second partial derivatives and outward unit normal of a chart at (u, v).
struct ChartJet
{
    Eigen::Vector3d f, fu, fv, fuu, fuv, fvv, normal;
};

/// Closed surfaces with closed-form charts, used as references for the curvature identities.
struct AnalyticSurface
{
    enum class Kind { Sphere, Torus };
    Kind kind = Kind::Sphere;
    double major = 1.0; ///< sphere radius, or torus centre-circle radius
    double minor = 0.0; ///< torus tube radius

    static AnalyticSurface sphere(double radius)
    {
        if (!(radius > 0)) fail(ErrorCode::InvalidArgument, "sphere radius must be positive");
        return {Kind::Sphere, radius, 0.0};
    }

    static AnalyticSurface torus(double R, double r)
    {
        if (!(r > 0 && R > r)) fail(ErrorCode::InvalidArgument, "torus needs 0 < r < R");
        return {Kind::Torus, R, r};
    }

    /// Sphere: (u, v) = (polar angle, azimuth). Torus: (u, v) = (angle around the axis, tube angle).
    ChartJet jet(double u, double v) const
    {
        ChartJet j;
        const double cu = std::cos(u), su = std::sin(u), cv = std::cos(v), sv = std::sin(v);
        if (kind == Kind::Sphere) {
            const double R = major;
            j.normal = {su * cv, su * sv, cu};
            j.f = R * j.normal;
            j.fu = R * Eigen::Vector3d(cu * cv, cu * sv, -su);
            j.fv = R * Eigen::Vector3d(-su * sv, su * cv, 0.0);
            j.fuu = -j.f;
            j.fuv = R * Eigen::Vector3d(-cu * sv, cu * cv, 0.0);
            j.fvv = R * Eigen::Vector3d(-su * cv, -su * sv, 0.0);
        } else {
            const double R = major, r = minor;
            const double w = R + r * cv;
            j.normal = {cv * cu, cv * su, sv};
            j.f = {w * cu, w * su, r * sv};
            j.fu = {-w * su, w * cu, 0.0};
            j.fv = {-r * sv * cu, -r * sv * su, r * cv};
            j.fuu = {-w * cu, -w * su, 0.0};
            j.fuv = {r * sv * su, -r * sv * cu, 0.0};
            j.fvv = {-r * cv * cu, -r * cv * su, -r * sv};
        }
        return j;
    }

    /// Closed-form mean and Gauss curvature.
    std::pair<double, double> exact_curvatures(double, double v) const
    {
        if (kind == Kind::Sphere) return {2.0 / major, 1.0 / (major * major)};
        const double cv = std::cos(v);
        const double k1 = 1.0 / minor, k2 = cv / (major + minor * cv);
        return {k1 + k2, k1 * k2};
    }

    /// Parameter box kept away from chart singularities.
    std::pair<Eigen::Vector2d, Eigen::Vector2d> sample_box() const
    {
        const double pi = std::numbers::pi;
        if (kind == Kind::Sphere) return {{0.3, 0.0}, {pi - 0.3, 2 * pi}};
        return {{0.0, 0.0}, {2 * pi, 2 * pi}};
    }
};

namespace detail {

using Mat2 = Eigen::Matrix2d;

/// Fourth-order central first derivative.
template <typename Fn>
auto d4(Fn&& fn, double x, double h)
{
    using T = std::decay_t<decltype(fn(x))>;
    return T((fn(x - 2 * h) - 8.0 * fn(x - h) + 8.0 * fn(x + h) - fn(x + 2 * h)) / (12.0 * h));
}

struct PointGeometry
{
    Mat2 g, g_inv, A;
    std::array<Mat2, 2> gamma; ///< gamma[k](i, j) = Christoffel symbol with upper index k
};

inline PointGeometry point_geometry(const AnalyticSurface& s, double u, double v)
{
    const ChartJet j = s.jet(u, v);
    PointGeometry p;
    p.g << j.fu.dot(j.fu), j.fu.dot(j.fv), j.fv.dot(j.fu), j.fv.dot(j.fv);
    p.g_inv = p.g.inverse();
    // Weingarten sign: second derivatives of f have normal part -A_ij nu.
    p.A << -j.fuu.dot(j.normal), -j.fuv.dot(j.normal), -j.fuv.dot(j.normal), -j.fvv.dot(j.normal);
    const std::array<Eigen::Vector3d, 2> d1{j.fu, j.fv};
    const Eigen::Vector3d d2[2][2] = {{j.fuu, j.fuv}, {j.fuv, j.fvv}};
    for (int k = 0; k < 2; ++k) {
        for (int a = 0; a < 2; ++a) {
            for (int b = 0; b < 2; ++b) {
                double acc = 0.0;
                for (int l = 0; l < 2; ++l) acc += p.g_inv(k, l) * d2[a][b].dot(d1[size_t(l)]);
                p.gamma[size_t(k)](a, b) = acc;
            }
        }
    }
    return p;
}

inline double trace_g(const PointGeometry& p, const Mat2& T) { return (p.g_inv * T).trace(); }

inline double norm2_g(const PointGeometry& p, const Mat2& T) { return (p.g_inv * T * p.g_inv * T.transpose()).trace(); }

/// Gauss curvature from the metric alone (Brioschi formula), metric derivatives by finite differences.
inline double intrinsic_gauss(const AnalyticSurface& s, double u, double v, double h)
{
    auto metric = [&](double uu, double vv) {
        const ChartJet j = s.jet(uu, vv);
        return Eigen::Vector3d(j.fu.dot(j.fu), j.fu.dot(j.fv), j.fv.dot(j.fv));
    };
    const Eigen::Vector3d m = metric(u, v);
    const Eigen::Vector3d mu = d4([&](double x) { return metric(x, v); }, u, h);
    const Eigen::Vector3d mv = d4([&](double x) { return metric(u, x); }, v, h);
    const Eigen::Vector3d muu = d4([&](double x) { return Eigen::Vector3d(d4([&](double y) { return metric(y, v); }, x, h)); }, u, h);
    const Eigen::Vector3d mvv = d4([&](double x) { return Eigen::Vector3d(d4([&](double y) { return metric(u, y); }, x, h)); }, v, h);
    const Eigen::Vector3d muv = d4([&](double x) { return Eigen::Vector3d(d4([&](double y) { return metric(y, x); }, u, h)); }, v, h);
    const double E = m[0], F = m[1], G = m[2];
    const double Eu = mu[0], Fu = mu[1], Gu = mu[2];
    const double Ev = mv[0], Fv = mv[1], Gv = mv[2];
    const double Evv = mvv[0], Fuv = muv[1], Guu = muu[2];
    Eigen::Matrix3d P, Q;
    P << -0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * Eu, Fu - 0.5 * Ev, Fv - 0.5 * Gu, E, F, 0.5 * Gv, F, G;
    Q << 0.0, 0.5 * Ev, 0.5 * Gu, 0.5 * Ev, E, F, 0.5 * Gu, F, G;
    const double W = E * G - F * F;
    return (P.determinant() - Q.determinant()) / (W * W);
}

/// Covariant first derivative (index k first) of the second fundamental form, with the partial
/// derivatives of A taken by finite differences.
inline std::array<Mat2, 2> nabla_A(const AnalyticSurface& s, double u, double v, double h)
{
    const PointGeometry p = point_geometry(s, u, v);
    const std::array<Mat2, 2> dA{d4([&](double x) { return Mat2(point_geometry(s, x, v).A); }, u, h),
                                 d4([&](double x) { return Mat2(point_geometry(s, u, x).A); }, v, h)};
    std::array<Mat2, 2> out;
    for (int k = 0; k < 2; ++k) {
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                double acc = dA[size_t(k)](i, j);
                for (int m = 0; m < 2; ++m) {
                    acc -= p.gamma[size_t(m)](k, i) * p.A(m, j) + p.gamma[size_t(m)](k, j) * p.A(i, m);
                }
                out[size_t(k)](i, j) = acc;
            }
        }
    }
    return out;
}

} // namespace detail

struct IdentityReport
{
    std::vector<Eigen::Vector2d> samples;
    std::vector<double> gauss_residual;  ///< |2K - (H^2 - |A|^2)| with K from the metric alone
    std::vector<double> simons_residual; ///< |Delta A - grad^2 H - (H A.A - |A|^2 A)|
    std::vector<double> simons_residual_half; ///< the same at half the step
    double step = 0;
    double max_gauss = 0, max_simons = 0;
    double richardson_change = 0; ///< largest |residual(h) - residual(h/2)| of the Simons check

    std::string to_text() const
    {
        std::ostringstream out;
        out.precision(17);
        out << "samples " << samples.size() << "\nstep " << step << "\nmax_gauss_residual " << max_gauss
            << "\nmax_simons_residual " << max_simons << "\nrichardson_change " << richardson_change << '\n';
        for (size_t i = 0; i < samples.size(); ++i) {
            out << samples[i][0] << ' ' << samples[i][1] << ' ' << gauss_residual[i] << ' ' << simons_residual[i] << '\n';
        }
        return out.str();
    }
};

/// Simons identity residual at one parameter point, all derivatives by nested fourth-order
/// finite differences of the closed-form chart.
inline double simons_residual(const AnalyticSurface& s, double u, double v, double h)
{
    using detail::Mat2;
    const detail::PointGeometry p = detail::point_geometry(s, u, v);
    auto H_at = [&](double a, double b) {
        const detail::PointGeometry q = detail::point_geometry(s, a, b);
        return detail::trace_g(q, q.A);
    };
    // Hessian of H.
    const Eigen::Vector2d dH(detail::d4([&](double x) { return H_at(x, v); }, u, h),
                             detail::d4([&](double x) { return H_at(u, x); }, v, h));
    Mat2 ddH;
    ddH(0, 0) = detail::d4([&](double x) { return detail::d4([&](double y) { return H_at(y, v); }, x, h); }, u, h);
    ddH(1, 1) = detail::d4([&](double x) { return detail::d4([&](double y) { return H_at(u, y); }, x, h); }, v, h);
    ddH(0, 1) = ddH(1, 0) = detail::d4([&](double x) { return detail::d4([&](double y) { return H_at(y, x); }, u, h); }, v, h);
    Mat2 hessH = ddH;
    for (int k = 0; k < 2; ++k) hessH -= p.gamma[size_t(k)] * dH[k];

    // Rough Laplacian of A: g^{kl} (grad_l grad_k A)_ij.
    const std::array<Mat2, 2> nA = detail::nabla_A(s, u, v, h);
    std::array<std::array<Mat2, 2>, 2> dnA; // dnA[l][k] = partial_l of (nabla_k A)
    for (int k = 0; k < 2; ++k) {
        dnA[0][size_t(k)] = detail::d4([&](double x) { return Mat2(detail::nabla_A(s, x, v, h)[size_t(k)]); }, u, h);
        dnA[1][size_t(k)] = detail::d4([&](double x) { return Mat2(detail::nabla_A(s, u, x, h)[size_t(k)]); }, v, h);
    }
    Mat2 lapA = Mat2::Zero();
    for (int l = 0; l < 2; ++l) {
        for (int k = 0; k < 2; ++k) {
            Mat2 t;
            for (int i = 0; i < 2; ++i) {
                for (int j = 0; j < 2; ++j) {
                    double acc = dnA[size_t(l)][size_t(k)](i, j);
                    for (int m = 0; m < 2; ++m) {
                        acc -= p.gamma[size_t(m)](l, k) * nA[size_t(m)](i, j) + p.gamma[size_t(m)](l, i) * nA[size_t(k)](m, j) +
                               p.gamma[size_t(m)](l, j) * nA[size_t(k)](i, m);
                    }
                    t(i, j) = acc;
                }
            }
            lapA += p.g_inv(k, l) * t;
        }
    }
    const double H = detail::trace_g(p, p.A);
    const double A2 = detail::norm2_g(p, p.A);
    const Mat2 AA = p.A * p.g_inv * p.A;
    const Mat2 residual = lapA - hessH - (H * AA - A2 * p.A);
    return std::sqrt(std::max(0.0, detail::norm2_g(p, residual)));
}

/// Evaluates the Gauss equation and the Simons identity at `samples` random chart points. The
/// Simons residual is repeated at step h / 2; a step so small that rounding would dominate the
/// nested differences is rejected with StepTooSmall.
inline IdentityReport identity_checks(const AnalyticSurface& s, int samples, double h = 2e-3, std::uint64_t seed = 1)
{
    if (samples <= 0) fail(ErrorCode::InvalidArgument, "need at least one sample point");
    // Rounding in a nested fourth-order second difference is about eps / h^2 relative.
    if (!(h > 0) || 1e-16 / (h * h) > 1e-7) {
        fail(ErrorCode::StepTooSmall, "finite-difference step " + std::to_string(h) + " would be dominated by cancellation");
    }
    IdentityReport r;
    r.step = h;
    std::mt19937_64 rng(seed);
    const auto [lo, hi] = s.sample_box();
    std::uniform_real_distribution<double> du(lo[0], hi[0]), dv(lo[1], hi[1]);
    for (int k = 0; k < samples; ++k) {
        const double u = du(rng), v = dv(rng);
        r.samples.emplace_back(u, v);
        const detail::PointGeometry p = detail::point_geometry(s, u, v);
        const double H = detail::trace_g(p, p.A);
        const double A2 = detail::norm2_g(p, p.A);
        const double K = detail::intrinsic_gauss(s, u, v, h);
        r.gauss_residual.push_back(std::abs(2.0 * K - (H * H - A2)));
        r.simons_residual.push_back(simons_residual(s, u, v, h));
        r.simons_residual_half.push_back(simons_residual(s, u, v, 0.5 * h));
        r.max_gauss = std::max(r.max_gauss, r.gauss_residual.back());
        r.max_simons = std::max(r.max_simons, r.simons_residual.back());
        r.richardson_change = std::max(r.richardson_change, std::abs(r.simons_residual.back() - r.simons_residual_half.back()));
    }
    return r;
}

} // namespace csdflow
