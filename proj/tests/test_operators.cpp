#include "csdflow/analytic.hpp"
#include "csdflow/diagnostics.hpp"
#include "csdflow/primitives.hpp"

#include <gtest/gtest.h>

#include <map>

using namespace csdflow;

namespace {

const TriMesh& sphere4()
{
    static const TriMesh m = generate_primitive(Icosphere{4, 1.0});
    return m;
}

const TriMesh& torus64()
{
    static const TriMesh m = generate_primitive(Torus{2.0, 1.0, 64});
    return m;
}

/// Vertices on the outer equator of the (2, 1) torus.
std::vector<int> outer_equator(const TriMesh& m)
{
    std::vector<int> out;
    for (int i = 0; i < m.num_vertices(); ++i) {
        const Vec3& p = m.vertex(i);
        if (std::abs(p.head<2>().norm() - 3.0) < 1e-9 && std::abs(p.z()) < 1e-9) out.push_back(i);
    }
    return out;
}

/// Surface of [0,1]^3 with each face split into an n x n grid of right triangles.
TriMesh gridded_box(int n)
{
    std::map<std::array<int, 3>, int> index;
    std::vector<Vec3> x;
    std::vector<Face> f;
    auto vid = [&](const std::array<int, 3>& k) {
        auto [it, fresh] = index.emplace(k, int(x.size()));
        if (fresh) x.emplace_back(double(k[0]) / n, double(k[1]) / n, double(k[2]) / n);
        return it->second;
    };
    // origin, u axis, v axis of each side, with u x v pointing outwards
    const std::array<std::array<std::array<int, 3>, 3>, 6> sides = {{
        {{{0, 0, 0}, {0, 1, 0}, {1, 0, 0}}}, {{{0, 0, 1}, {1, 0, 0}, {0, 1, 0}}},
        {{{0, 0, 0}, {1, 0, 0}, {0, 0, 1}}}, {{{0, 1, 0}, {0, 0, 1}, {1, 0, 0}}},
        {{{0, 0, 0}, {0, 0, 1}, {0, 1, 0}}}, {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}},
    }};
    for (const auto& [o, u, v] : sides) {
        auto at = [&](int i, int j) {
            std::array<int, 3> k;
            for (int d = 0; d < 3; ++d) k[size_t(d)] = o[size_t(d)] * n + u[size_t(d)] * i + v[size_t(d)] * j;
            return vid(k);
        };
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                f.push_back({at(i, j), at(i + 1, j), at(i + 1, j + 1)});
                f.push_back({at(i, j), at(i + 1, j + 1), at(i, j + 1)});
            }
        }
    }
    return TriMesh::build(std::move(x), std::move(f));
}

std::vector<double> z_field(const TriMesh& m)
{
    std::vector<double> u(size_t(m.num_vertices()));
    for (int i = 0; i < m.num_vertices(); ++i) u[size_t(i)] = m.vertex(i).z();
    return u;
}

} // namespace

TEST(CotanLaplacian, SymmetricAndKillsConstants)
{
    const CotanOperator op = cotan_laplacian(sphere4());
    const SparseMatrix asym = SparseMatrix(op.stiffness.transpose()) - op.stiffness;
    EXPECT_EQ(asym.norm(), 0.0);
    const std::vector<double> lap = apply_laplacian(op, std::vector<double>(op.mass.size(), 3.0));
    for (double v : lap) EXPECT_LE(std::abs(v), 1e-10);
}

TEST(CotanLaplacian, MassIsArea)
{
    for (const TriMesh* m : {&sphere4(), &torus64()}) {
        const CotanOperator op = cotan_laplacian(*m);
        double total = 0.0;
        for (double x : op.mass) total += x;
        EXPECT_NEAR(total / surface_area(*m), 1.0, 1e-9);
    }
}

TEST(CotanLaplacian, SphericalHarmonicEigenvalue)
{
    const CotanOperator op = cotan_laplacian(sphere4());
    const std::vector<double> u = z_field(sphere4());
    const std::vector<double> lap = apply_laplacian(op, u);
    double worst = 0.0;
    for (size_t i = 0; i < u.size(); ++i) worst = std::max(worst, std::abs(lap[i] + 2.0 * u[i]));
    EXPECT_LE(worst, 0.02 * 2.0);
}

TEST(CotanLaplacian, DirichletEnergyIsQuadraticForm)
{
    const TriMesh& m = torus64();
    const CotanOperator op = cotan_laplacian(m);
    std::vector<double> u(size_t(m.num_vertices()));
    for (int i = 0; i < m.num_vertices(); ++i) u[size_t(i)] = std::sin(2.0 * m.vertex(i).x()) + m.vertex(i).z() * m.vertex(i).y();
    const Eigen::Map<const Eigen::VectorXd> uv(u.data(), Eigen::Index(u.size()));
    const double form = uv.dot(op.stiffness * uv);
    EXPECT_NEAR(integrate(op.mass, grad_norm_sq(m, op, u)) / form, 1.0, 1e-9);
}

TEST(MeanCurvature, SphereIsTwoOverR)
{
    const GeometryCache c = compute_geometry(sphere4());
    for (double h : c.H) EXPECT_NEAR(h, 2.0, 0.02);
    for (int i = 0; i < sphere4().num_vertices(); i += 97) EXPECT_GT(c.normal[size_t(i)].dot(sphere4().vertex(i)), 0.999);
}

TEST(MeanCurvature, TorusOuterEquator)
{
    const GeometryCache c = compute_geometry(torus64());
    const std::vector<int> ring = outer_equator(torus64());
    ASSERT_FALSE(ring.empty());
    for (int i : ring) EXPECT_NEAR(c.H[size_t(i)], 4.0 / 3.0, 0.03 * 4.0 / 3.0);
}

TEST(MeanCurvature, ScalesInversely)
{
    const TriMesh m = generate_primitive(Dumbbell{1.0, 0.2, 1.0, 32});
    const GeometryCache a = compute_geometry(m);
    const GeometryCache b = compute_geometry(scaled(m, 2.0));
    for (size_t i = 0; i < a.H.size(); ++i) EXPECT_NEAR(b.H[i] * 2.0, a.H[i], 1e-12 * std::abs(a.H[i]) + 1e-14);
}

TEST(MeanCurvature, ErrorDecreasesUnderRefinement)
{
    double prev = 1.0;
    for (int level = 2; level <= 5; ++level) {
        const GeometryCache c = compute_geometry(generate_primitive(Icosphere{level, 1.0}));
        double err = 0.0;
        for (double h : c.H) err = std::max(err, std::abs(h - 2.0) / 2.0);
        EXPECT_LT(err, prev) << "level " << level;
        prev = err;
    }
    EXPECT_LE(prev, 0.01);
}

TEST(ShapeOperator, Sphere)
{
    const GeometryCache c = compute_geometry(sphere4());
    for (size_t i = 0; i < c.A2.size(); ++i) {
        EXPECT_NEAR(c.A2[i], 2.0, 0.06);
        EXPECT_GE(c.A2[i], 0.5 * c.H[i] * c.H[i] - 1e-12);
    }
}

TEST(ShapeOperator, TorusPrincipalCurvatures)
{
    const GeometryCache c = compute_geometry(torus64());
    for (int i : outer_equator(torus64())) {
        const Eigen::Vector2d k = principal_curvatures(c.A[size_t(i)], c.normal[size_t(i)]);
        EXPECT_NEAR(k[0], 1.0 / 3.0, 0.05 / 3.0);
        EXPECT_NEAR(k[1], 1.0, 0.05);
    }
}

TEST(ShapeOperator, FlatPatchOfABox)
{
    const TriMesh box = gridded_box(8);
    const GeometryCache c = compute_geometry(box);
    int interior = 0;
    for (int i = 0; i < box.num_vertices(); ++i) {
        const Vec3& p = box.vertex(i);
        // the whole one-ring must lie inside the bottom face, away from the box edges
        const bool ring_is_flat = std::abs(p.z()) < 1e-12 && p.x() > 0.2 && p.x() < 0.8 && p.y() > 0.2 && p.y() < 0.8;
        if (!ring_is_flat) continue;
        ++interior;
        EXPECT_LE(std::sqrt(c.A2[size_t(i)]), 1e-9);
        EXPECT_LE(std::abs(c.H[size_t(i)]), 1e-9);
    }
    EXPECT_EQ(interior, 25);
}

TEST(GaussCurvature, SphereAndTopology)
{
    const GeometryCache c = compute_geometry(sphere4());
    for (double k : c.K) EXPECT_NEAR(k, 1.0, 0.02);
    const double four_pi = 4.0 * std::numbers::pi;
    for (const TriMesh& m : {sphere4(), generate_primitive(Dumbbell{1.0, 0.12, 1.2, 48}), generate_primitive(Ellipsoid{1, 0.7, 0.4, 3}),
                             gridded_box(5)}) {
        const GeometryCache g = compute_geometry(m);
        EXPECT_NEAR(integrate(g.mass(), g.K) / four_pi, 1.0, 1e-9);
    }
    const GeometryCache t = compute_geometry(torus64());
    EXPECT_NEAR(integrate(t.mass(), t.K), 0.0, 1e-9);
}

TEST(GaussCurvature, GaussEquationPointwise)
{
    for (const TriMesh* m : {&sphere4(), &torus64()}) {
        const std::vector<double> r = gauss_equation_residual(compute_geometry(*m));
        EXPECT_LE(*std::max_element(r.begin(), r.end()), 0.05);
    }
}

TEST(CurvatureDerivatives, ConstantHOnSphere)
{
    double prev_grad = 1.0;
    for (int level = 3; level <= 5; ++level) {
        const GeometryCache c = compute_geometry(generate_primitive(Icosphere{level, 1.0}));
        const double max_H = *std::max_element(c.H.begin(), c.H.end());
        for (double v : c.lap_H) EXPECT_LE(std::abs(v), 0.05 * max_H);
        const double grad = *std::max_element(c.grad_H2.begin(), c.grad_H2.end());
        EXPECT_LT(grad, prev_grad);
        EXPECT_LE(grad, 1e-6);
        prev_grad = grad;
    }
}

TEST(CurvatureDerivatives, EigenfunctionInPlaceOfH)
{
    GeometryCache c = compute_geometry(sphere4());
    c.H = z_field(sphere4());
    const std::vector<double> lap = laplacian_of_H(c);
    for (size_t i = 0; i < lap.size(); ++i) EXPECT_NEAR(lap[i], -2.0 * c.H[i], 0.04);
}

TEST(AnalyticIdentities, Sphere)
{
    const IdentityReport r = identity_checks(AnalyticSurface::sphere(1.5), 20);
    EXPECT_LE(r.max_gauss, 1e-10);
    EXPECT_LE(r.max_simons, 1e-6);
}

TEST(AnalyticIdentities, Torus)
{
    const IdentityReport r = identity_checks(AnalyticSurface::torus(2.0, 1.0), 100);
    EXPECT_EQ(r.samples.size(), 100u);
    EXPECT_LE(r.max_gauss, 1e-8);
    EXPECT_LE(r.max_simons, 1e-4);
    EXPECT_LE(r.richardson_change, 1e-4);
}

TEST(AnalyticIdentities, TinyStepIsRejected)
{
    try {
        identity_checks(AnalyticSurface::sphere(1.0), 1, 1e-6);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::StepTooSmall);
    }
}
