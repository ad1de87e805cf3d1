#pragma once

#include "csdflow/mesh.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>

#include <cstdint>
#include <numbers>
#include <vector>

namespace csdflow {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum VertexFlag : std::uint8_t {
    FlagNone = 0,
    FlagZeroNormal = 1,
    FlagRankDeficientFit = 2,
};

/// Cotangent stiffness L (positive semi-definite, L_ij = -w_ij, L_ii = sum_j w_ij) and the
/// mixed-Voronoi lumped mass. The Laplace-Beltrami operator is Delta u = -M^{-1} L u.
struct CotanOperator
{
    SparseMatrix stiffness;
    std::vector<double> mass;
    std::vector<double> edge_weight;
    std::vector<std::array<double, 3>> corner_cot;
    /// Mixed-Voronoi share of each face at each of its corners; sums to the face area.
    std::vector<std::array<double, 3>> corner_mass;
    std::vector<double> face_area;
    std::vector<Vec3> face_normal;
};

/// Per-vertex differential geometry of a mesh, consistent with one position state.
struct GeometryCache
{
    CotanOperator op;
    std::vector<Vec3> normal;
    std::vector<Vec3> mean_curvature_vector; ///< -Delta f = H nu
    std::vector<double> H;
    std::vector<Eigen::Matrix3d> A; ///< shape operator as an ambient tangential 3x3 tensor
    std::vector<double> A2; ///< |A|^2
    std::vector<double> K;
    std::vector<double> angle_defect;
    std::vector<double> lap_H;
    std::vector<double> grad_H2;
    std::vector<std::uint8_t> flags;

    const std::vector<double>& mass() const { return op.mass; }
};

/// Mass-weighted vertex sum, always accumulated in vertex order.
inline double integrate(const std::vector<double>& mass, const std::vector<double>& field)
{
    double s = 0.0;
    for (size_t i = 0; i < mass.size(); ++i) s += mass[i] * field[i];
    return s;
}

template <typename Fn>
inline double integrate_by(const std::vector<double>& mass, Fn&& fn)
{
    double s = 0.0;
    for (size_t i = 0; i < mass.size(); ++i) s += mass[i] * fn(i);
    return s;
}

inline CotanOperator cotan_laplacian(const TriMesh& mesh)
{
    const int nv = mesh.num_vertices();
    const int nf = mesh.num_faces();
    CotanOperator op;
    op.mass.assign(size_t(nv), 0.0);
    op.edge_weight.assign(size_t(mesh.num_edges()), 0.0);
    op.corner_cot.resize(size_t(nf));
    op.corner_mass.resize(size_t(nf));
    op.face_area.resize(size_t(nf));
    op.face_normal.resize(size_t(nf));

    for (int f = 0; f < nf; ++f) {
        const Face& t = mesh.faces()[size_t(f)];
        const Vec3 area_vec = mesh.face_area_vector(f);
        const double area = area_vec.norm();
        op.face_area[size_t(f)] = area;
        op.face_normal[size_t(f)] = area_vec / area;
        std::array<double, 3> cot{};
        std::array<double, 3> len2{}; // squared length of edge opposite corner k
        for (int k = 0; k < 3; ++k) {
            const Vec3& p = mesh.vertex(t[size_t(k)]);
            const Vec3 a = mesh.vertex(t[size_t((k + 1) % 3)]) - p;
            const Vec3 b = mesh.vertex(t[size_t((k + 2) % 3)]) - p;
            cot[size_t(k)] = a.dot(b) / (2.0 * area);
            len2[size_t(k)] = (b - a).squaredNorm();
        }
        for (int k = 0; k < 3; ++k) {
            if (!std::isfinite(cot[size_t(k)])) {
                fail(ErrorCode::DegenerateFace, "non-finite cotangent weight on face " + std::to_string(f));
            }
            op.edge_weight[size_t(mesh.face_edges(f)[size_t(k)])] += 0.5 * cot[size_t(k)];
        }
        op.corner_cot[size_t(f)] = cot;

        std::array<double, 3> share{};
        const int obtuse = cot[0] < 0 ? 0 : (cot[1] < 0 ? 1 : (cot[2] < 0 ? 2 : -1));
        for (int k = 0; k < 3; ++k) {
            if (obtuse == -1) {
                // Voronoi region: edges from k are opposite corners k+2 and k+1.
                share[size_t(k)] = (len2[size_t((k + 2) % 3)] * cot[size_t((k + 2) % 3)] +
                                    len2[size_t((k + 1) % 3)] * cot[size_t((k + 1) % 3)]) /
                                   8.0;
            } else {
                share[size_t(k)] = (k == obtuse) ? 0.5 * area : 0.25 * area;
            }
            op.mass[size_t(t[size_t(k)])] += share[size_t(k)];
        }
        op.corner_mass[size_t(f)] = share;
    }

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(size_t(mesh.num_edges()) * 2 + size_t(nv));
    std::vector<double> diag(size_t(nv), 0.0);
    const auto& edges = mesh.edges();
    for (size_t e = 0; e < edges.size(); ++e) {
        const double w = op.edge_weight[e];
        trip.emplace_back(edges[e].v0, edges[e].v1, -w);
        trip.emplace_back(edges[e].v1, edges[e].v0, -w);
        diag[size_t(edges[e].v0)] += w;
        diag[size_t(edges[e].v1)] += w;
    }
    for (int v = 0; v < nv; ++v) trip.emplace_back(v, v, diag[size_t(v)]);
    op.stiffness.resize(nv, nv);
    op.stiffness.setFromTriplets(trip.begin(), trip.end());
    return op;
}

/// Delta u = -M^{-1} L u.
inline std::vector<double> apply_laplacian(const CotanOperator& op, const std::vector<double>& u)
{
    const Eigen::Map<const Eigen::VectorXd> uu(u.data(), Eigen::Index(u.size()));
    const Eigen::VectorXd Lu = op.stiffness * uu;
    std::vector<double> out(u.size());
    for (size_t i = 0; i < u.size(); ++i) out[i] = -Lu[Eigen::Index(i)] / op.mass[i];
    return out;
}

/// Area-weighted outward vertex normals. Vertices whose umbrella area vector vanishes are flagged
/// and receive a zero normal.
inline std::vector<Vec3> vertex_normals(const TriMesh& mesh, std::vector<std::uint8_t>* flags = nullptr)
{
    std::vector<Vec3> n(size_t(mesh.num_vertices()), Vec3::Zero());
    for (int f = 0; f < mesh.num_faces(); ++f) {
        const Vec3 a = mesh.face_area_vector(f);
        for (int v : mesh.faces()[size_t(f)]) n[size_t(v)] += a;
    }
    for (size_t i = 0; i < n.size(); ++i) {
        double local = 0.0;
        for (int f : mesh.vertex_faces(int(i))) local += mesh.face_area(f);
        if (n[i].norm() <= 1e-12 * local) {
            n[i].setZero();
            if (flags) (*flags)[i] |= FlagZeroNormal;
        } else {
            n[i].normalize();
        }
    }
    return n;
}

struct MeanCurvature
{
    std::vector<double> H;
    std::vector<Vec3> normal;
    std::vector<Vec3> vector; ///< -Delta f
    std::vector<std::uint8_t> flags;
};

/// H = (L f)_i . nu_i / m_i, so that the sphere of radius R has H = +2/R with outward normals.
inline MeanCurvature mean_curvature(const TriMesh& mesh, const CotanOperator& op)
{
    const int nv = mesh.num_vertices();
    MeanCurvature out;
    out.flags.assign(size_t(nv), FlagNone);
    out.normal = vertex_normals(mesh, &out.flags);
    out.H.assign(size_t(nv), 0.0);
    out.vector.assign(size_t(nv), Vec3::Zero());
    for (int k = 0; k < op.stiffness.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(op.stiffness, k); it; ++it) {
            out.vector[size_t(it.row())] += it.value() * mesh.vertex(int(it.col()));
        }
    }
    for (int i = 0; i < nv; ++i) {
        out.vector[size_t(i)] /= op.mass[size_t(i)];
        out.H[size_t(i)] = out.vector[size_t(i)].dot(out.normal[size_t(i)]);
    }
    return out;
}

inline std::vector<double> angle_defects(const TriMesh& mesh)
{
    std::vector<double> d = vertex_angle_sums(mesh);
    for (auto& x : d) x = 2.0 * std::numbers::pi - x;
    return d;
}

/// K_i = (2 pi - sum of angles) / m_i.
inline std::vector<double> gauss_curvature(const TriMesh& mesh, const CotanOperator& op)
{
    std::vector<double> K = angle_defects(mesh);
    for (size_t i = 0; i < K.size(); ++i) K[i] /= op.mass[i];
    return K;
}

/// Gradient of a piecewise-linear vertex field on face f.
inline Vec3 face_gradient(const TriMesh& mesh, const CotanOperator& op, int f, const double* u, int stride = 1)
{
    const Face& t = mesh.faces()[size_t(f)];
    const Vec3& n = op.face_normal[size_t(f)];
    Vec3 g = Vec3::Zero();
    for (int k = 0; k < 3; ++k) {
        const Vec3 e = mesh.vertex(t[size_t((k + 2) % 3)]) - mesh.vertex(t[size_t((k + 1) % 3)]);
        g += u[size_t(t[size_t(k)]) * size_t(stride)] * n.cross(e);
    }
    return g / (2.0 * op.face_area[size_t(f)]);
}

/// Per-vertex |grad u|^2: face values distributed with weight area/3 and divided by the vertex
/// mass, so that the mass-weighted sum equals u^T L u.
inline std::vector<double> grad_norm_sq(const TriMesh& mesh, const CotanOperator& op, const std::vector<double>& u)
{
    std::vector<double> g(u.size(), 0.0);
    for (int f = 0; f < mesh.num_faces(); ++f) {
        const double w = op.face_area[size_t(f)] / 3.0 * face_gradient(mesh, op, f, u.data()).squaredNorm();
        for (int v : mesh.faces()[size_t(f)]) g[size_t(v)] += w;
    }
    for (size_t i = 0; i < g.size(); ++i) g[i] /= op.mass[i];
    return g;
}

inline std::vector<double> laplacian_of_H(const GeometryCache& cache) { return apply_laplacian(cache.op, cache.H); }

inline std::vector<double> grad_H_norm_sq(const TriMesh& mesh, const GeometryCache& cache)
{
    return grad_norm_sq(mesh, cache.op, cache.H);
}

struct ShapeOperator
{
    std::vector<Eigen::Matrix3d> A;
    std::vector<double> A2;
    std::vector<std::uint8_t> flags;
};

namespace detail {

/// Rotation taking unit vector a onto unit vector b along the shortest arc.
inline Eigen::Matrix3d align(const Vec3& a, const Vec3& b)
{
    const Vec3 v = a.cross(b);
    const double c = a.dot(b);
    if (c < -1.0 + 1e-12) return -Eigen::Matrix3d::Identity();
    Eigen::Matrix3d vx;
    vx << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return Eigen::Matrix3d::Identity() + vx + vx * vx / (1.0 + c);
}

} // namespace detail

/// Per-face second fundamental form fitted by least squares to the change of vertex normals along
/// the three edges (dnu(e) = A e), rotated into each vertex tangent plane and averaged with the
/// mixed-Voronoi corner weights. When `mean_curvature` is given, the trace of each vertex tensor is
/// replaced by it, so trace(A) = H and |A|^2 >= H^2 / 2 hold exactly.
inline ShapeOperator shape_operator(const TriMesh& mesh, const CotanOperator& op, const std::vector<Vec3>& normals,
                                    const std::vector<double>* mean_curvature = nullptr)
{
    const int nv = mesh.num_vertices();
    ShapeOperator out;
    out.A.assign(size_t(nv), Eigen::Matrix3d::Zero());
    out.A2.assign(size_t(nv), 0.0);
    out.flags.assign(size_t(nv), FlagNone);
    std::vector<double> weight(size_t(nv), 0.0);

    for (int f = 0; f < mesh.num_faces(); ++f) {
        const Face& t = mesh.faces()[size_t(f)];
        const Vec3& nf = op.face_normal[size_t(f)];
        const Vec3 u = (mesh.vertex(t[1]) - mesh.vertex(t[0])).normalized();
        const Vec3 v = nf.cross(u);
        Eigen::Matrix3d N = Eigen::Matrix3d::Zero();
        Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
        bool normals_ok = true;
        for (int k = 0; k < 3; ++k) {
            const int a = t[size_t((k + 1) % 3)];
            const int b = t[size_t((k + 2) % 3)];
            if (normals[size_t(a)].isZero() || normals[size_t(b)].isZero()) normals_ok = false;
            const Vec3 e = mesh.vertex(b) - mesh.vertex(a);
            const Vec3 dn = normals[size_t(b)] - normals[size_t(a)];
            const double eu = e.dot(u), ev = e.dot(v);
            const double nu = dn.dot(u), nv_ = dn.dot(v);
            // Rows (eu, ev, 0) and (0, eu, ev) against unknowns (a11, a12, a22).
            Eigen::Vector3d r1(eu, ev, 0.0), r2(0.0, eu, ev);
            N += r1 * r1.transpose() + r2 * r2.transpose();
            rhs += r1 * nu + r2 * nv_;
        }
        const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(N, Eigen::EigenvaluesOnly);
        const double lmin = es.eigenvalues()(0);
        const double lmax = es.eigenvalues()(2);
        if (!normals_ok || !(lmin > 1e-10 * lmax)) {
            for (int vtx : t) out.flags[size_t(vtx)] |= FlagRankDeficientFit;
            continue;
        }
        const Eigen::Vector3d sol = N.ldlt().solve(rhs);
        Eigen::Matrix2d S;
        S << sol(0), sol(1), sol(1), sol(2);
        Eigen::Matrix<double, 3, 2> P;
        P.col(0) = u;
        P.col(1) = v;
        for (int k = 0; k < 3; ++k) {
            const int vtx = t[size_t(k)];
            const Vec3& nvtx = normals[size_t(vtx)];
            if (nvtx.isZero()) continue;
            const Eigen::Matrix3d R = detail::align(nf, nvtx);
            const Eigen::Matrix<double, 3, 2> Q = R * P;
            const double w = op.corner_mass[size_t(f)][size_t(k)];
            out.A[size_t(vtx)] += w * (Q * S * Q.transpose());
            weight[size_t(vtx)] += w;
        }
    }

    // Vertices whose faces were all rejected take the average of their neighbours.
    std::vector<Eigen::Matrix3d> fallback(size_t(nv), Eigen::Matrix3d::Zero());
    for (int i = 0; i < nv; ++i) {
        if (weight[size_t(i)] > 0) {
            out.A[size_t(i)] /= weight[size_t(i)];
        }
    }
    for (int i = 0; i < nv; ++i) {
        if (weight[size_t(i)] > 0) continue;
        out.flags[size_t(i)] |= FlagRankDeficientFit;
        int count = 0;
        for (int j : mesh.vertex_neighbors(i)) {
            if (weight[size_t(j)] > 0) {
                fallback[size_t(i)] += out.A[size_t(j)];
                ++count;
            }
        }
        if (count > 0) fallback[size_t(i)] /= count;
    }
    for (int i = 0; i < nv; ++i) {
        if (weight[size_t(i)] <= 0) out.A[size_t(i)] = fallback[size_t(i)];
        Eigen::Matrix3d& Ai = out.A[size_t(i)];
        Ai = 0.5 * (Ai + Ai.transpose());
        const Vec3& n = normals[size_t(i)];
        if (mean_curvature && !n.isZero()) {
            const Eigen::Matrix3d T = Eigen::Matrix3d::Identity() - n * n.transpose();
            Ai = T * Ai * T;
            Ai += 0.5 * ((*mean_curvature)[size_t(i)] - Ai.trace()) * T;
        }
        out.A2[size_t(i)] = Ai.squaredNorm();
    }
    return out;
}

/// Principal curvatures (ascending) of a vertex tensor: the two eigenvalues of largest magnitude
/// after discarding the normal direction.
inline Eigen::Vector2d principal_curvatures(const Eigen::Matrix3d& A, const Vec3& normal)
{
    const Vec3 e1 = normal.unitOrthogonal();
    const Vec3 e2 = normal.cross(e1);
    Eigen::Matrix2d S;
    S << e1.dot(A * e1), e1.dot(A * e2), e2.dot(A * e1), e2.dot(A * e2);
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(S);
    return es.eigenvalues();
}

/// Full: every field. Flow: only what the normal velocity and constraints need (A and A2 are
/// left empty).
enum class GeometryLevel { Full, Flow };

inline GeometryCache compute_geometry(const TriMesh& mesh, GeometryLevel level = GeometryLevel::Full)
{
    GeometryCache c;
    c.op = cotan_laplacian(mesh);
    MeanCurvature mc = mean_curvature(mesh, c.op);
    c.normal = std::move(mc.normal);
    c.H = std::move(mc.H);
    c.mean_curvature_vector = std::move(mc.vector);
    c.flags = std::move(mc.flags);
    if (level == GeometryLevel::Full) {
        ShapeOperator so = shape_operator(mesh, c.op, c.normal, &c.H);
        c.A = std::move(so.A);
        c.A2 = std::move(so.A2);
        for (size_t i = 0; i < c.flags.size(); ++i) c.flags[i] |= so.flags[i];
    }
    c.angle_defect = angle_defects(mesh);
    c.K.resize(c.angle_defect.size());
    for (size_t i = 0; i < c.K.size(); ++i) c.K[i] = c.angle_defect[i] / c.op.mass[i];
    c.lap_H = apply_laplacian(c.op, c.H);
    c.grad_H2 = grad_norm_sq(mesh, c.op, c.H);
    for (size_t i = 0; i < c.H.size(); ++i) {
        if (!std::isfinite(c.H[i]) || !std::isfinite(c.lap_H[i]) || (!c.A2.empty() && !std::isfinite(c.A2[i]))) {
            fail(ErrorCode::NanDetected, "non-finite curvature at vertex " + std::to_string(i));
        }
    }
    return c;
}

} // namespace csdflow
