#pragma once

#include "csdflow/mesh.hpp"
#include "csdflow/profile_curve.hpp"

#include <map>
#include <numbers>
#include <string>
#include <variant>

namespace csdflow {

struct Icosphere
{
    int level = 0;
    double radius = 1.0;
};
struct Ellipsoid
{
    double a = 1.0, b = 1.0, c = 1.0;
    int level = 0;
};
struct Dumbbell
{
    double bulb_radius = 1.0;
    double neck_radius = 0.2;
    double neck_length = 1.0;
    int resolution = 64;
};
struct Torus
{
    double major_radius = 2.0;
    double minor_radius = 1.0;
    int resolution = 32;
};

using PrimitiveSpec = std::variant<Icosphere, Ellipsoid, Dumbbell, Torus>;

namespace detail {

inline TriMesh make_icosphere(int level, double radius)
{
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> x = {{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0}, {0, -1, phi}, {0, 1, phi},
                           {0, -1, -phi}, {0, 1, -phi}, {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
    std::vector<Face> f = {{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                           {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
                           {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
    for (auto& p : x) p.normalize();

    for (int l = 0; l < level; ++l) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            x.push_back((x[size_t(a)] + x[size_t(b)]).normalized());
            const int id = int(x.size()) - 1;
            midpoint.emplace(key, id);
            return id;
        };
        std::vector<Face> next;
        next.reserve(f.size() * 4);
        for (const Face& t : f) {
            const int ab = mid(t[0], t[1]);
            const int bc = mid(t[1], t[2]);
            const int ca = mid(t[2], t[0]);
            next.push_back({t[0], ab, ca});
            next.push_back({t[1], bc, ab});
            next.push_back({t[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        f = std::move(next);
    }
    for (auto& p : x) p *= radius;
    return TriMesh::build(std::move(x), std::move(f));
}

inline TriMesh make_torus(double R, double r, int res)
{
    const int n_minor = res;
    const int n_major = std::max(3, int(std::lround(res * R / r)));
    std::vector<Vec3> x;
    x.reserve(size_t(n_major * n_minor));
    for (int i = 0; i < n_major; ++i) {
        const double u = 2.0 * std::numbers::pi * i / n_major;
        for (int j = 0; j < n_minor; ++j) {
            const double v = 2.0 * std::numbers::pi * j / n_minor;
            x.emplace_back((R + r * std::cos(v)) * std::cos(u), (R + r * std::cos(v)) * std::sin(u), r * std::sin(v));
        }
    }
    auto id = [&](int i, int j) { return ((i % n_major) * n_minor) + (j % n_minor); };
    std::vector<Face> f;
    f.reserve(size_t(2 * n_major * n_minor));
    for (int i = 0; i < n_major; ++i) {
        for (int j = 0; j < n_minor; ++j) {
            f.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            f.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }
    return TriMesh::build(std::move(x), std::move(f));
}

} // namespace detail

/// Ring-based mesh of the surface of revolution generated by `curve`. The target edge length is
/// 2 pi / resolution times the local feature size 1 / max|principal curvature|, graded so that it
/// changes by at most `grading` per unit arclength. Rings carry a varying number of vertices and
/// are stitched by angular zippering; the poles are single vertices.
inline TriMesh revolve_profile(const ProfileCurve& curve, int resolution, double grading = 0.25)
{
    const double L = curve.length();
    const int dense = 8192;
    std::vector<double> h(size_t(dense) + 1);
    double rmax = 0.0;
    for (int i = 0; i <= dense; ++i) rmax = std::max(rmax, curve.at(L * i / dense).r);
    for (int i = 0; i <= dense; ++i) {
        const CurveSample c = curve.at(L * i / dense);
        const double kmax = std::max({std::abs(c.kappa_profile), std::abs(c.kappa_azimuthal), 1.0 / rmax});
        h[size_t(i)] = 2.0 * std::numbers::pi / (kmax * resolution);
    }
    const double ds = L / dense;
    for (int i = 1; i <= dense; ++i) h[size_t(i)] = std::min(h[size_t(i)], h[size_t(i) - 1] + grading * ds);
    for (int i = dense - 1; i >= 0; --i) h[size_t(i)] = std::min(h[size_t(i)], h[size_t(i) + 1] + grading * ds);

    // Cumulative "edge count" along the profile, trapezoidal.
    std::vector<double> count(size_t(dense) + 1, 0.0);
    for (int i = 1; i <= dense; ++i) {
        count[size_t(i)] = count[size_t(i) - 1] + 0.5 * ds * (1.0 / h[size_t(i) - 1] + 1.0 / h[size_t(i)]);
    }
    const int intervals = std::max(2, int(std::lround(count.back())));
    if (intervals < 2 || resolution < 6) fail(ErrorCode::ResolutionTooLow, "resolution too low for a revolved mesh");

    std::vector<Vec3> x;
    std::vector<Face> f;
    x.emplace_back(0.0, 0.0, curve.at(0.0).z);
    std::vector<int> prev_ring = {0};
    std::vector<double> prev_angle = {0.0};
    size_t cursor = 0;
    for (int k = 1; k <= intervals; ++k) {
        std::vector<int> ring;
        std::vector<double> angle;
        if (k == intervals) {
            x.emplace_back(0.0, 0.0, curve.at(L).z);
            ring.push_back(int(x.size()) - 1);
            angle.push_back(0.0);
        } else {
            const double target = count.back() * k / intervals;
            while (cursor + 1 < size_t(dense) && count[cursor + 1] < target) ++cursor;
            const double frac = (target - count[cursor]) / (count[cursor + 1] - count[cursor]);
            const double s = ds * (double(cursor) + frac);
            const CurveSample c = curve.at(s);
            const double hk = h[cursor] + frac * (h[cursor + 1] - h[cursor]);
            const int n = std::max(3, int(std::lround(2.0 * std::numbers::pi * c.r / hk)));
            const double offset = (k % 2 == 0) ? 0.0 : 0.5;
            for (int j = 0; j < n; ++j) {
                const double th = 2.0 * std::numbers::pi * (j + offset) / n;
                x.emplace_back(c.r * std::cos(th), c.r * std::sin(th), c.z);
                ring.push_back(int(x.size()) - 1);
                angle.push_back(th);
            }
        }

        // Zipper between prev_ring (lower) and ring (upper).
        const int nl = int(prev_ring.size());
        const int nu = int(ring.size());
        if (nl == 1) {
            for (int j = 0; j < nu; ++j) f.push_back({prev_ring[0], ring[size_t((j + 1) % nu)], ring[size_t(j)]});
        } else if (nu == 1) {
            for (int i = 0; i < nl; ++i) f.push_back({prev_ring[size_t(i)], prev_ring[size_t((i + 1) % nl)], ring[0]});
        } else {
            const double two_pi = 2.0 * std::numbers::pi;
            const double a0 = prev_angle[0];
            int j0 = 0;
            double best = two_pi;
            for (int j = 0; j < nu; ++j) {
                double d = std::remainder(angle[size_t(j)] - a0, two_pi);
                if (std::abs(d) < best) {
                    best = std::abs(d);
                    j0 = j;
                }
            }
            const double b0 = a0 + std::remainder(angle[size_t(j0)] - a0, two_pi);
            int il = 0;
            int iu = 0;
            while (il < nl || iu < nu) {
                const double next_l = a0 + two_pi * (il + 1) / nl;
                const double next_u = b0 + two_pi * (iu + 1) / nu;
                const int l = prev_ring[size_t(il % nl)];
                const int u = ring[size_t((j0 + iu) % nu)];
                if (iu >= nu || (il < nl && next_l <= next_u)) {
                    f.push_back({l, prev_ring[size_t((il + 1) % nl)], u});
                    ++il;
                } else {
                    f.push_back({l, ring[size_t((j0 + iu + 1) % nu)], u});
                    ++iu;
                }
            }
        }
        prev_ring = std::move(ring);
        prev_angle = std::move(angle);
    }
    return TriMesh::build(std::move(x), std::move(f));
}

inline TriMesh generate_primitive(const PrimitiveSpec& spec)
{
    return std::visit(
        [](const auto& p) -> TriMesh {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Icosphere>) {
                if (p.level < 0 || !(p.radius > 0)) fail(ErrorCode::InvalidArgument, "icosphere needs level >= 0, radius > 0");
                if (p.level > 8) fail(ErrorCode::InvalidArgument, "icosphere level above 8 is not supported");
                return detail::make_icosphere(p.level, p.radius);
            } else if constexpr (std::is_same_v<T, Ellipsoid>) {
                if (p.level < 0 || !(p.a > 0 && p.b > 0 && p.c > 0)) {
                    fail(ErrorCode::InvalidArgument, "ellipsoid needs level >= 0 and positive axes");
                }
                TriMesh sphere = detail::make_icosphere(p.level, 1.0);
                return transformed(sphere, Eigen::Vector3d(p.a, p.b, p.c).asDiagonal(), Vec3::Zero());
            } else if constexpr (std::is_same_v<T, Dumbbell>) {
                const auto g = DumbbellGeometry::solve(p.bulb_radius, p.neck_radius, p.neck_length);
                if (p.resolution < 6) fail(ErrorCode::ResolutionTooLow, "dumbbell resolution must be at least 6");
                return revolve_profile(g.curve(), p.resolution);
            } else {
                if (!(p.major_radius > 0 && p.minor_radius > 0)) fail(ErrorCode::InvalidArgument, "torus radii must be positive");
                if (!(p.minor_radius < p.major_radius)) {
                    fail(ErrorCode::InvalidArgument, "torus minor radius must be below the major radius");
                }
                if (p.resolution < 3) fail(ErrorCode::ResolutionTooLow, "torus resolution must be at least 3");
                return detail::make_torus(p.major_radius, p.minor_radius, p.resolution);
            }
        },
        spec);
}

} // namespace csdflow
