#pragma once

#include "csdflow/error.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace csdflow {

using Vec3 = Eigen::Vector3d;
using Face = std::array<int, 3>;

struct Edge
{
    int v0 = -1; // v0 < v1
    int v1 = -1;
    int f0 = -1; // face traversing v0 -> v1
    int f1 = -1; // face traversing v1 -> v0
};

/// Connectivity shared between all position states of one surface.
struct MeshTopology
{
    std::vector<Face> faces;
    std::vector<Edge> edges;
    /// face_edges[f][k] is the edge opposite corner k of face f.
    std::vector<std::array<int, 3>> face_edges;
    std::vector<int> vertex_face_offsets;
    std::vector<int> vertex_faces;
    std::vector<int> vertex_neighbor_offsets;
    std::vector<int> vertex_neighbors;
    int num_vertices = 0;
};

/// Closed, oriented, manifold triangle mesh. Immutable once built; position updates produce a new
/// TriMesh that shares the topology.
class TriMesh
{
public:
    TriMesh() = default;

    /// Validates and builds adjacency. Throws Error with NonManifoldEdge, NonManifoldVertex,
    /// InconsistentOrientation, DegenerateFace, IndexOutOfRange or InvalidArgument.
    static TriMesh build(std::vector<Vec3> vertices, std::vector<Face> faces);

    /// Same connectivity, new positions. Only the geometric invariants are re-checked.
    TriMesh with_positions(std::vector<Vec3> vertices) const;

    const std::vector<Vec3>& vertices() const { return m_vertices; }
    const Vec3& vertex(int i) const { return m_vertices[static_cast<size_t>(i)]; }
    const std::vector<Face>& faces() const { return m_topo->faces; }
    const std::vector<Edge>& edges() const { return m_topo->edges; }
    const std::array<int, 3>& face_edges(int f) const { return m_topo->face_edges[size_t(f)]; }

    std::span<const int> vertex_faces(int v) const
    {
        const auto b = size_t(m_topo->vertex_face_offsets[size_t(v)]);
        const auto e = size_t(m_topo->vertex_face_offsets[size_t(v) + 1]);
        return {m_topo->vertex_faces.data() + b, e - b};
    }
    std::span<const int> vertex_neighbors(int v) const
    {
        const auto b = size_t(m_topo->vertex_neighbor_offsets[size_t(v)]);
        const auto e = size_t(m_topo->vertex_neighbor_offsets[size_t(v) + 1]);
        return {m_topo->vertex_neighbors.data() + b, e - b};
    }

    int num_vertices() const { return static_cast<int>(m_vertices.size()); }
    int num_faces() const { return static_cast<int>(m_topo->faces.size()); }
    int num_edges() const { return static_cast<int>(m_topo->edges.size()); }
    int euler_characteristic() const { return num_vertices() - num_edges() + num_faces(); }
    bool shares_topology(const TriMesh& other) const { return m_topo == other.m_topo; }

    Vec3 face_area_vector(int f) const
    {
        const Face& t = faces()[size_t(f)];
        return 0.5 * (vertex(t[1]) - vertex(t[0])).cross(vertex(t[2]) - vertex(t[0]));
    }
    double face_area(int f) const { return face_area_vector(f).norm(); }

    Eigen::AlignedBox3d bounding_box() const
    {
        Eigen::AlignedBox3d box;
        for (const auto& v : m_vertices) box.extend(v);
        return box;
    }
    double bbox_diagonal() const { return bounding_box().diagonal().norm(); }

private:
    void check_geometry() const;

    std::vector<Vec3> m_vertices;
    std::shared_ptr<const MeshTopology> m_topo;
};

// ---------------------------------------------------------------------------------------------

namespace detail {

inline std::uint64_t edge_key(int a, int b, int n)
{
    return static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(n) + static_cast<std::uint64_t>(b);
}

} // namespace detail

inline TriMesh TriMesh::build(std::vector<Vec3> vertices, std::vector<Face> faces)
{
    const int nv = static_cast<int>(vertices.size());
    if (nv == 0 || faces.empty()) fail(ErrorCode::InvalidArgument, "mesh has no vertices or faces");

    std::vector<int> valence(size_t(nv), 0);
    for (size_t f = 0; f < faces.size(); ++f) {
        const Face& t = faces[f];
        for (int k = 0; k < 3; ++k) {
            if (t[size_t(k)] < 0 || t[size_t(k)] >= nv) {
                fail(ErrorCode::IndexOutOfRange,
                     "face " + std::to_string(f) + " references vertex " + std::to_string(t[size_t(k)]));
            }
        }
        if (t[0] == t[1] || t[1] == t[2] || t[2] == t[0]) {
            fail(ErrorCode::DegenerateFace, "face " + std::to_string(f) + " repeats a vertex");
        }
        for (int k = 0; k < 3; ++k) ++valence[size_t(t[size_t(k)])];
    }
    for (int v = 0; v < nv; ++v) {
        if (valence[size_t(v)] == 0) {
            fail(ErrorCode::InvalidArgument, "vertex " + std::to_string(v) + " is not referenced");
        }
    }

    auto topo = std::make_shared<MeshTopology>();
    topo->num_vertices = nv;
    topo->faces = std::move(faces);
    const auto& F = topo->faces;
    const int nf = static_cast<int>(F.size());

    // Undirected edges keyed by (min, max). Incidence is checked before orientation so that an edge
    // with three faces reports as non-manifold regardless of face order.
    std::unordered_map<std::uint64_t, int> edge_index;
    edge_index.reserve(size_t(nf) * 2);
    std::vector<int> incidence;
    topo->face_edges.resize(size_t(nf));
    for (int f = 0; f < nf; ++f) {
        for (int k = 0; k < 3; ++k) {
            const int a = F[size_t(f)][size_t((k + 1) % 3)];
            const int b = F[size_t(f)][size_t((k + 2) % 3)];
            const int lo = std::min(a, b);
            const int hi = std::max(a, b);
            auto [it, inserted] = edge_index.try_emplace(detail::edge_key(lo, hi, nv), int(topo->edges.size()));
            if (inserted) {
                topo->edges.push_back(Edge{lo, hi, -1, -1});
                incidence.push_back(0);
            }
            ++incidence[size_t(it->second)];
            topo->face_edges[size_t(f)][size_t(k)] = it->second;
        }
    }
    for (size_t i = 0; i < topo->edges.size(); ++i) {
        if (incidence[i] != 2) {
            const Edge& e = topo->edges[i];
            fail(ErrorCode::NonManifoldEdge, "edge (" + std::to_string(e.v0) + "," + std::to_string(e.v1) + ") has " +
                                                 std::to_string(incidence[i]) + " faces");
        }
    }
    for (int f = 0; f < nf; ++f) {
        for (int k = 0; k < 3; ++k) {
            const int a = F[size_t(f)][size_t((k + 1) % 3)];
            Edge& e = topo->edges[size_t(topo->face_edges[size_t(f)][size_t(k)])];
            int& slot = (a == e.v0) ? e.f0 : e.f1;
            if (slot != -1) {
                fail(ErrorCode::InconsistentOrientation, "edge (" + std::to_string(e.v0) + "," + std::to_string(e.v1) +
                                                             ") traversed twice in the same direction");
            }
            slot = f;
        }
    }

    // Vertex -> faces (CSR).
    topo->vertex_face_offsets.assign(size_t(nv) + 1, 0);
    for (int v = 0; v < nv; ++v) topo->vertex_face_offsets[size_t(v) + 1] = topo->vertex_face_offsets[size_t(v)] + valence[size_t(v)];
    topo->vertex_faces.resize(size_t(topo->vertex_face_offsets.back()));
    {
        std::vector<int> fill(topo->vertex_face_offsets.begin(), topo->vertex_face_offsets.end() - 1);
        for (int f = 0; f < nf; ++f) {
            for (int k = 0; k < 3; ++k) {
                const int v = F[size_t(f)][size_t(k)];
                topo->vertex_faces[size_t(fill[size_t(v)]++)] = f;
            }
        }
    }

    // Vertex -> neighbours (CSR) and the single-fan test: walking "next outgoing edge" around a
    // vertex must visit every incident face exactly once.
    std::vector<int> degree(size_t(nv), 0);
    for (const Edge& e : topo->edges) {
        ++degree[size_t(e.v0)];
        ++degree[size_t(e.v1)];
    }
    topo->vertex_neighbor_offsets.assign(size_t(nv) + 1, 0);
    for (int v = 0; v < nv; ++v) topo->vertex_neighbor_offsets[size_t(v) + 1] = topo->vertex_neighbor_offsets[size_t(v)] + degree[size_t(v)];
    topo->vertex_neighbors.resize(size_t(topo->vertex_neighbor_offsets.back()));
    {
        std::vector<int> fill(topo->vertex_neighbor_offsets.begin(), topo->vertex_neighbor_offsets.end() - 1);
        for (const Edge& e : topo->edges) {
            topo->vertex_neighbors[size_t(fill[size_t(e.v0)]++)] = e.v1;
            topo->vertex_neighbors[size_t(fill[size_t(e.v1)]++)] = e.v0;
        }
    }
    for (int v = 0; v < nv; ++v) {
        if (degree[size_t(v)] != valence[size_t(v)]) {
            fail(ErrorCode::NonManifoldVertex, "vertex " + std::to_string(v) + " is not a single disk fan");
        }
    }
    {
        // In each incident face, the corner at v maps the incoming neighbour to the outgoing one.
        std::unordered_map<std::uint64_t, int> next_of;
        for (int v = 0; v < nv; ++v) {
            const int b = topo->vertex_face_offsets[size_t(v)];
            const int e = topo->vertex_face_offsets[size_t(v) + 1];
            next_of.clear();
            int start = -1;
            for (int i = b; i < e; ++i) {
                const Face& t = F[size_t(topo->vertex_faces[size_t(i)])];
                const int c = (t[0] == v) ? 0 : (t[1] == v ? 1 : 2);
                const int out = t[size_t((c + 1) % 3)];
                const int in = t[size_t((c + 2) % 3)];
                next_of[std::uint64_t(out)] = in;
                start = out;
            }
            int cur = start;
            int steps = 0;
            do {
                auto it = next_of.find(std::uint64_t(cur));
                if (it == next_of.end()) break;
                cur = it->second;
                ++steps;
            } while (cur != start && steps <= e - b);
            if (steps != e - b || cur != start) {
                fail(ErrorCode::NonManifoldVertex, "vertex " + std::to_string(v) + " is not a single disk fan");
            }
        }
    }

    TriMesh mesh;
    mesh.m_vertices = std::move(vertices);
    mesh.m_topo = std::move(topo);
    if (mesh.euler_characteristic() % 2 != 0) {
        fail(ErrorCode::InconsistentOrientation, "odd Euler characteristic on a closed surface");
    }
    mesh.check_geometry();
    return mesh;
}

inline TriMesh TriMesh::with_positions(std::vector<Vec3> vertices) const
{
    if (vertices.size() != m_vertices.size()) {
        fail(ErrorCode::InvalidArgument, "position count does not match the topology");
    }
    TriMesh mesh;
    mesh.m_vertices = std::move(vertices);
    mesh.m_topo = m_topo;
    mesh.check_geometry();
    return mesh;
}

inline void TriMesh::check_geometry() const
{
    for (size_t i = 0; i < m_vertices.size(); ++i) {
        if (!m_vertices[i].allFinite()) {
            fail(ErrorCode::NanDetected, "vertex " + std::to_string(i) + " has a non-finite coordinate");
        }
    }
    const double diag = bbox_diagonal();
    const double area_eps = 1e-12 * diag * diag;
    for (int f = 0; f < num_faces(); ++f) {
        const double a = face_area(f);
        if (!(a >= area_eps)) {
            fail(ErrorCode::DegenerateFace,
                 "face " + std::to_string(f) + " has area " + std::to_string(a) + " below " + std::to_string(area_eps));
        }
    }
}

// ---------------------------------------------------------------------------------------------
// Global measures

/// Signed enclosed volume, positive for outward orientation.
inline double enclosed_volume(const TriMesh& mesh)
{
    double vol = 0.0;
    for (const Face& t : mesh.faces()) {
        vol += mesh.vertex(t[0]).dot(mesh.vertex(t[1]).cross(mesh.vertex(t[2])));
    }
    return vol / 6.0;
}

inline double surface_area(const TriMesh& mesh)
{
    double area = 0.0;
    for (int f = 0; f < mesh.num_faces(); ++f) area += mesh.face_area(f);
    return area;
}

/// Diameter of the vertex set. Stands in for the supremum over the whole surface; the
/// difference is bounded by the longest edge.
inline double extrinsic_diameter(const TriMesh& mesh)
{
    const auto& x = mesh.vertices();
    Vec3 c = Vec3::Zero();
    for (const auto& p : x) c += p;
    c /= double(x.size());
    std::vector<std::pair<double, int>> by_radius(x.size());
    for (size_t i = 0; i < x.size(); ++i) by_radius[i] = {(x[i] - c).norm(), int(i)};
    std::sort(by_radius.begin(), by_radius.end(), [](const auto& a, const auto& b) {
        return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    // |x_i - x_j| <= r_i + r_j prunes pairs that cannot beat the current best.
    double best2 = 0.0;
    for (size_t i = 0; i < by_radius.size(); ++i) {
        const double ri = by_radius[i].first;
        if (4.0 * ri * ri <= best2) break;
        const Vec3& xi = x[size_t(by_radius[i].second)];
        for (size_t j = i + 1; j < by_radius.size(); ++j) {
            const double bound = ri + by_radius[j].first;
            if (bound * bound <= best2) break;
            best2 = std::max(best2, (xi - x[size_t(by_radius[j].second)]).squaredNorm());
        }
    }
    return std::sqrt(best2);
}

inline double edge_length(const TriMesh& mesh, const Edge& e)
{
    return (mesh.vertex(e.v1) - mesh.vertex(e.v0)).norm();
}

inline double min_edge_length(const TriMesh& mesh)
{
    double m = std::numeric_limits<double>::infinity();
    for (const Edge& e : mesh.edges()) m = std::min(m, edge_length(mesh, e));
    return m;
}

inline double mean_edge_length(const TriMesh& mesh)
{
    double s = 0.0;
    for (const Edge& e : mesh.edges()) s += edge_length(mesh, e);
    return s / double(mesh.num_edges());
}

/// Sum of interior angles at each vertex.
inline std::vector<double> vertex_angle_sums(const TriMesh& mesh)
{
    std::vector<double> sums(size_t(mesh.num_vertices()), 0.0);
    for (const Face& t : mesh.faces()) {
        for (int k = 0; k < 3; ++k) {
            const Vec3& p = mesh.vertex(t[size_t(k)]);
            const Vec3 a = mesh.vertex(t[size_t((k + 1) % 3)]) - p;
            const Vec3 b = mesh.vertex(t[size_t((k + 2) % 3)]) - p;
            sums[size_t(t[size_t(k)])] += std::atan2(a.cross(b).norm(), a.dot(b));
        }
    }
    return sums;
}

/// Triangle quality 2 r_in / r_circ: 1 for equilateral, 0 for degenerate.
inline double triangle_quality(const Vec3& a, const Vec3& b, const Vec3& c)
{
    const double la = (b - c).norm();
    const double lb = (c - a).norm();
    const double lc = (a - b).norm();
    const double s = 0.5 * (la + lb + lc);
    const double area = 0.5 * (b - a).cross(c - a).norm();
    if (area <= 0.0) return 0.0;
    const double r_in = area / s;
    const double r_circ = la * lb * lc / (4.0 * area);
    return 2.0 * r_in / r_circ;
}

inline double min_triangle_quality(const TriMesh& mesh)
{
    double q = 1.0;
    for (const Face& t : mesh.faces()) {
        q = std::min(q, triangle_quality(mesh.vertex(t[0]), mesh.vertex(t[1]), mesh.vertex(t[2])));
    }
    return q;
}

inline TriMesh transformed(const TriMesh& mesh, const Eigen::Matrix3d& linear, const Vec3& shift)
{
    std::vector<Vec3> x = mesh.vertices();
    for (auto& p : x) p = linear * p + shift;
    return mesh.with_positions(std::move(x));
}

inline TriMesh scaled(const TriMesh& mesh, double s)
{
    return transformed(mesh, s * Eigen::Matrix3d::Identity(), Vec3::Zero());
}

} // namespace csdflow
