#pragma once

#include "csdflow/diagnostics.hpp"
#include "csdflow/monitor.hpp"
#include "csdflow/primitives.hpp"

#include <random>

namespace csdflow {

struct NamedMesh
{
    std::string name;
    TriMesh mesh;
};

inline std::vector<NamedMesh> primitive_catalogue()
{
    std::vector<NamedMesh> out;
    out.push_back({"icosphere(3,1)", generate_primitive(Icosphere{3, 1.0})});
    out.push_back({"icosphere(4,1)", generate_primitive(Icosphere{4, 1.0})});
    out.push_back({"ellipsoid(1,1,2,3)", generate_primitive(Ellipsoid{1.0, 1.0, 2.0, 3})});
    out.push_back({"ellipsoid(1,0.7,0.4,3)", generate_primitive(Ellipsoid{1.0, 0.7, 0.4, 3})});
    out.push_back({"dumbbell(1,0.2,1,48)", generate_primitive(Dumbbell{1.0, 0.2, 1.0, 48})});
    out.push_back({"dumbbell(1,0.1,2,96)", generate_primitive(Dumbbell{1.0, 0.1, 2.0, 96})});
    out.push_back({"torus(2,1,32)", generate_primitive(Torus{2.0, 1.0, 32})});
    out.push_back({"torus(2,0.5,48)", generate_primitive(Torus{2.0, 0.5, 48})});
    return out;
}

/// Icosphere(level) with a smooth random radial bump field: r = 1 + amplitude * sum of five
/// cosines of random direction and frequency 1 to 3, scaled so the field stays in [-1, 1].
inline TriMesh perturbed_icosphere(int level, double amplitude, std::mt19937_64& rng)
{
    const TriMesh base = generate_primitive(Icosphere{level, 1.0});
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::uniform_int_distribution<int> freq(1, 3);
    struct Wave
    {
        Vec3 dir;
        double phase;
        int k;
    };
    std::vector<Wave> waves;
    for (int j = 0; j < 5; ++j) {
        Vec3 d(gauss(rng), gauss(rng), gauss(rng));
        d.normalize();
        waves.push_back({d, phase(rng), freq(rng)});
    }
    std::vector<Vec3> x = base.vertices();
    for (Vec3& p : x) {
        double bump = 0.0;
        for (const Wave& w : waves) bump += std::cos(w.k * p.dot(w.dir) + w.phase);
        p *= 1.0 + amplitude * bump / double(waves.size());
    }
    return base.with_positions(std::move(x));
}

struct InequalityRow
{
    std::string mesh;
    std::string check;
    double lhs = 0, rhs = 0, ratio = 0;
    bool holds = false;
};

/// Topping, Michael-Simon (u = 1 and u = 2 + x), greedy covering at three radii and the
/// interpolation checker around the point of largest |A|^2.
inline std::vector<InequalityRow> check_mesh_inequalities(const std::string& name, const TriMesh& mesh)
{
    const GeometryCache cache = compute_geometry(mesh);
    std::vector<InequalityRow> rows;
    auto add = [&](std::string check, const RatioReport& r) { rows.push_back({name, std::move(check), r.lhs, r.rhs, r.ratio, r.holds}); };

    add("topping", check_topping(mesh, cache));
    add("michael_simon[u=1]", check_michael_simon(mesh, cache, std::vector<double>(size_t(mesh.num_vertices()), 1.0)));
    std::vector<double> u(size_t(mesh.num_vertices()));
    for (int i = 0; i < mesh.num_vertices(); ++i) u[size_t(i)] = 2.0 + mesh.vertex(i).x();
    add("michael_simon[u=2+x]", check_michael_simon(mesh, cache, u));

    const double d = extrinsic_diameter(mesh);
    for (double frac : {0.125, 0.25, 0.5}) {
        const CoveringReport c = covering_count(mesh, cache, frac * d);
        rows.push_back({name, "covering[rho=" + format_number(frac) + "d]", double(c.count), c.bound,
                        std::exp(std::log(double(c.count)) - c.log_bound), c.holds});
    }

    const size_t peak = size_t(std::max_element(cache.A2.begin(), cache.A2.end()) - cache.A2.begin());
    double rho = 0.125 * d;
    for (;;) {
        try {
            for (double beta : {0.5, 1.0}) {
                const InterpolationReport r =
                    check_interpolation_babyint(mesh, cache, CutoffSpec::ball(mesh.vertex(int(peak)), rho), beta, 1.0, 4.0);
                rows.push_back({name, "babyint[beta=" + format_number(beta) + "]", r.lhs, r.rhs, r.ratio, r.holds});
            }
            break;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::CutoffTooNarrow) throw;
            rho *= 2.0;
        }
    }
    return rows;
}

} // namespace csdflow
