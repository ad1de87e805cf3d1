#pragma once

#include "csdflow/error.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace csdflow {

/// Point of a generating curve in the (r, z) half-plane together with its first two derivatives
/// with respect to the local parameter.
struct CurveJet
{
    double r = 0, z = 0;
    double dr = 0, dz = 0;
    double ddr = 0, ddz = 0;
};

/// Sample of a generating curve at a given arclength.
struct CurveSample
{
    double s = 0;
    double r = 0, z = 0;
    double tangent_angle = 0; ///< atan2(z', r') with unit-speed derivatives
    double kappa_profile = 0; ///< signed curvature of the profile, positive on spheres
    double kappa_azimuthal = 0; ///< sin(angle) / r, limit at the poles
};

/// Closed generating curve of a surface of revolution about the z-axis, running from the bottom
/// pole (r = 0) to the top pole (r = 0). Built from smooth pieces joined with C1 continuity; each
/// piece is parameterized on [0, 1]. Arclength is tabulated with composite Gauss-Legendre
/// quadrature and inverted by Newton iteration.
class ProfileCurve
{
public:
    using Piece = std::function<CurveJet(double)>;

    explicit ProfileCurve(std::vector<Piece> pieces, int cells_per_piece = 256)
        : m_pieces(std::move(pieces))
        , m_cells(cells_per_piece)
    {
        if (m_pieces.empty()) fail(ErrorCode::InvalidArgument, "profile has no pieces");
        m_piece_start.push_back(0.0);
        for (const auto& piece : m_pieces) {
            std::vector<double> table(size_t(m_cells) + 1, 0.0);
            for (int c = 0; c < m_cells; ++c) {
                table[size_t(c) + 1] = table[size_t(c)] + speed_integral(piece, double(c) / m_cells, double(c + 1) / m_cells);
            }
            m_piece_start.push_back(m_piece_start.back() + table.back());
            m_tables.push_back(std::move(table));
        }
    }

    double length() const { return m_piece_start.back(); }

    CurveSample at(double s) const
    {
        s = std::clamp(s, 0.0, length());
        size_t p = size_t(std::upper_bound(m_piece_start.begin(), m_piece_start.end(), s) - m_piece_start.begin());
        p = std::clamp<size_t>(p, 1, m_pieces.size()) - 1;
        const double local = s - m_piece_start[p];
        const auto& table = m_tables[p];
        size_t c = size_t(std::upper_bound(table.begin(), table.end(), local) - table.begin());
        c = std::clamp<size_t>(c, 1, size_t(m_cells)) - 1;
        double tau = (double(c) + (local - table[c]) / std::max(table[c + 1] - table[c], 1e-300)) / m_cells;
        const double lo = double(c) / m_cells;
        const double hi = double(c + 1) / m_cells;
        for (int it = 0; it < 50; ++it) {
            const double arc = table[c] + speed_integral(m_pieces[p], lo, tau);
            const CurveJet j = m_pieces[p](tau);
            const double speed = std::hypot(j.dr, j.dz);
            const double step = (arc - local) / speed;
            tau = std::clamp(tau - step, lo, hi);
            if (std::abs(step) < 1e-15) break;
        }
        return sample(m_pieces[p](tau), s);
    }

    /// Uniform-arclength sampling with n intervals (n + 1 nodes, poles included).
    std::vector<CurveSample> uniform(int n) const
    {
        std::vector<CurveSample> out;
        out.reserve(size_t(n) + 1);
        for (int i = 0; i <= n; ++i) out.push_back(at(length() * double(i) / double(n)));
        out.front().r = 0.0;
        out.back().r = 0.0;
        return out;
    }

private:
    static CurveSample sample(const CurveJet& j, double s)
    {
        CurveSample out;
        out.s = s;
        out.r = j.r;
        out.z = j.z;
        const double speed = std::hypot(j.dr, j.dz);
        out.tangent_angle = std::atan2(j.dz, j.dr);
        out.kappa_profile = (j.dr * j.ddz - j.dz * j.ddr) / (speed * speed * speed);
        out.kappa_azimuthal = (j.r > 1e-12) ? (j.dz / speed) / j.r : out.kappa_profile;
        return out;
    }

    static double speed_integral(const Piece& piece, double a, double b)
    {
        // 8-point Gauss-Legendre.
        static constexpr std::array<double, 4> x = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                                                    0.9602898564975363};
        static constexpr std::array<double, 4> w = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
                                                    0.1012285362903763};
        const double mid = 0.5 * (a + b);
        const double half = 0.5 * (b - a);
        double sum = 0.0;
        for (size_t k = 0; k < 4; ++k) {
            for (double sign : {-1.0, 1.0}) {
                const CurveJet j = piece(mid + sign * half * x[k]);
                sum += w[k] * std::hypot(j.dr, j.dz);
            }
        }
        return sum * half;
    }

    std::vector<Piece> m_pieces;
    int m_cells;
    std::vector<std::vector<double>> m_tables;
    std::vector<double> m_piece_start;
};

// ---------------------------------------------------------------------------------------------

/// Circular arc of the circle centred at (0, zc) with radius a, by polar angle measured from the
/// downward axis: (a sin t, zc - a cos t), t from t0 to t1.
inline ProfileCurve::Piece circle_piece(double a, double zc, double t0, double t1)
{
    return [=](double tau) {
        const double dt = t1 - t0;
        const double t = t0 + tau * dt;
        CurveJet j;
        j.r = a * std::sin(t);
        j.z = zc - a * std::cos(t);
        j.dr = a * std::cos(t) * dt;
        j.dz = a * std::sin(t) * dt;
        j.ddr = -a * std::sin(t) * dt * dt;
        j.ddz = a * std::cos(t) * dt * dt;
        return j;
    };
}

inline ProfileCurve sphere_profile(double radius)
{
    if (!(radius > 0)) fail(ErrorCode::InvalidArgument, "sphere radius must be positive");
    return ProfileCurve({circle_piece(radius, 0.0, 0.0, std::numbers::pi)});
}

/// Spheroid with equatorial radius a and polar semi-axis c.
inline ProfileCurve spheroid_profile(double a, double c)
{
    if (!(a > 0 && c > 0)) fail(ErrorCode::InvalidArgument, "spheroid axes must be positive");
    return ProfileCurve({[=](double tau) {
        const double pi = std::numbers::pi;
        const double t = tau * pi;
        CurveJet j;
        j.r = a * std::sin(t);
        j.z = -c * std::cos(t);
        j.dr = a * std::cos(t) * pi;
        j.dz = c * std::sin(t) * pi;
        j.ddr = -a * std::sin(t) * pi * pi;
        j.ddz = c * std::cos(t) * pi * pi;
        return j;
    }});
}

/// Two spherical bulbs of radius `bulb` joined by a cosine neck r(z) = b + (r_j - b)(1 - cos(pi z /
/// neck_length)) on |z| <= neck_length / 2. The junction angle on each bulb is solved so that the
/// profile is C1; the neck attains its minimum radius `neck` at z = 0.
struct DumbbellGeometry
{
    double bulb = 1.0;
    double neck = 0.2;
    double neck_length = 1.0;
    double junction_angle = 0.0; ///< polar angle on the bulb, from its neck-side pole
    double junction_radius = 0.0;
    double bulb_center = 0.0; ///< z of the upper bulb centre

    static DumbbellGeometry solve(double bulb, double neck, double neck_length)
    {
        if (!(bulb > 0 && neck > 0 && neck_length > 0)) {
            fail(ErrorCode::InvalidArgument, "dumbbell lengths must be positive");
        }
        if (!(neck < bulb)) fail(ErrorCode::InvalidArgument, "dumbbell neck radius must be below the bulb radius");
        DumbbellGeometry g;
        g.bulb = bulb;
        g.neck = neck;
        g.neck_length = neck_length;
        const double zj = 0.5 * neck_length;
        const double pi = std::numbers::pi;
        // Slope match: (a sin(phi) - b) * pi / (2 zj) = cot(phi), monotone in phi.
        auto mismatch = [&](double phi) { return (bulb * std::sin(phi) - neck) * pi / (2 * zj) - 1.0 / std::tan(phi); };
        double lo = std::asin(neck / bulb);
        double hi = 0.5 * pi;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (mismatch(mid) < 0 ? lo : hi) = mid;
        }
        g.junction_angle = 0.5 * (lo + hi);
        g.junction_radius = bulb * std::sin(g.junction_angle);
        g.bulb_center = zj + bulb * std::cos(g.junction_angle);
        return g;
    }

    double neck_radius_at(double z) const
    {
        const double zj = 0.5 * neck_length;
        return neck + (junction_radius - neck) * (1.0 - std::cos(std::numbers::pi * z / (2 * zj)));
    }

    ProfileCurve curve() const
    {
        const double pi = std::numbers::pi;
        const double zj = 0.5 * neck_length;
        const double amp = junction_radius - neck;
        const double k = pi / (2 * zj);
        const double b = neck;
        auto neck_piece = [=](double tau) {
            const double z = -zj + 2 * zj * tau;
            const double dz = 2 * zj;
            CurveJet j;
            j.z = z;
            j.r = b + amp * (1.0 - std::cos(k * z));
            j.dz = dz;
            j.dr = amp * k * std::sin(k * z) * dz;
            j.ddz = 0.0;
            j.ddr = amp * k * k * std::cos(k * z) * dz * dz;
            return j;
        };
        return ProfileCurve({circle_piece(bulb, -bulb_center, 0.0, pi - junction_angle), neck_piece,
                             circle_piece(bulb, bulb_center, junction_angle, pi)});
    }

    double half_height() const { return bulb_center + bulb; }
};

} // namespace csdflow
