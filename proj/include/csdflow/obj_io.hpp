#pragma once

#include "csdflow/mesh.hpp"
#include "csdflow/monitor.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace csdflow {

/// Writes "v x y z" and "f a b c" records with 1-based indices and 17 significant digits.
inline void write_obj(const std::string& path, const TriMesh& mesh)
{
    std::ofstream out(path);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path);
    for (const Vec3& p : mesh.vertices()) {
        out << "v " << format_number(p.x()) << ' ' << format_number(p.y()) << ' ' << format_number(p.z()) << '\n';
    }
    for (const Face& f : mesh.faces()) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    if (!out) fail(ErrorCode::IoError, "write failed for " + path);
}

namespace detail {

/// Vertex index of an OBJ face token such as "12", "12/4" or "-1//3".
inline int obj_index(const std::string& token, int vertex_count, const std::string& where)
{
    const std::string head = token.substr(0, token.find('/'));
    int k = 0;
    try {
        size_t used = 0;
        k = std::stoi(head, &used);
        if (used != head.size()) throw std::invalid_argument(head);
    } catch (const std::exception&) {
        fail(ErrorCode::IoError, where + ": bad face index '" + token + "'");
    }
    if (k < 0) k += vertex_count + 1;
    if (k < 1 || k > vertex_count) fail(ErrorCode::IoError, where + ": face index " + token + " out of range");
    return k - 1;
}

} // namespace detail

/// Reads vertices and faces; polygons are fanned into triangles, other records are skipped.
inline TriMesh read_obj(const std::string& path)
{
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path);
    std::vector<Vec3> x;
    std::vector<Face> f;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        if (tag == "v") {
            Vec3 p;
            if (!(ls >> p.x() >> p.y() >> p.z())) fail(ErrorCode::IoError, where + ": malformed vertex");
            x.push_back(p);
        } else if (tag == "f") {
            std::vector<int> poly;
            for (std::string tok; ls >> tok;) poly.push_back(detail::obj_index(tok, int(x.size()), where));
            if (poly.size() < 3) fail(ErrorCode::IoError, where + ": face with fewer than 3 vertices");
            for (size_t k = 1; k + 1 < poly.size(); ++k) f.push_back({poly[0], poly[k], poly[k + 1]});
        }
    }
    return TriMesh::build(std::move(x), std::move(f));
}

/// Reads a binary little-endian PLY with float or double x, y, z and a face list property.
inline TriMesh read_ply(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path);
    auto bad = [&](const std::string& what) { fail(ErrorCode::IoError, path + ": " + what); };

    std::string line;
    if (!std::getline(in, line) || line != "ply") bad("missing ply magic");
    struct Property
    {
        std::string name, type, count_type;
        bool list = false;
    };
    struct Element
    {
        std::string name;
        long count = 0;
        std::vector<Property> props;
    };
    std::vector<Element> elements;
    bool binary_le = false;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw == "format") {
            std::string fmt;
            ls >> fmt;
            binary_le = fmt == "binary_little_endian";
        } else if (kw == "element") {
            Element e;
            ls >> e.name >> e.count;
            elements.push_back(e);
        } else if (kw == "property") {
            if (elements.empty()) bad("property before element");
            Property p;
            ls >> p.type;
            if (p.type == "list") {
                p.list = true;
                ls >> p.count_type >> p.type;
            }
            ls >> p.name;
            elements.back().props.push_back(p);
        } else if (kw == "end_header") {
            break;
        }
    }
    if (!binary_le) bad("only binary_little_endian PLY is supported");
    if constexpr (std::endian::native != std::endian::little) bad("big-endian hosts are not supported");

    auto size_of = [&](const std::string& t) -> int {
        if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
        if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
        if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" || t == "float32") return 4;
        if (t == "double" || t == "float64") return 8;
        fail(ErrorCode::IoError, path + ": unknown property type '" + t + "'");
    };
    auto read_value = [&](const std::string& t) -> double {
        unsigned char buf[8];
        const int n = size_of(t);
        if (!in.read(reinterpret_cast<char*>(buf), n)) bad("truncated body");
        auto as = [&]<typename T>(T) {
            T v;
            std::memcpy(&v, buf, sizeof(T));
            return double(v);
        };
        if (t == "char" || t == "int8") return as(std::int8_t{});
        if (t == "uchar" || t == "uint8") return as(std::uint8_t{});
        if (t == "short" || t == "int16") return as(std::int16_t{});
        if (t == "ushort" || t == "uint16") return as(std::uint16_t{});
        if (t == "int" || t == "int32") return as(std::int32_t{});
        if (t == "uint" || t == "uint32") return as(std::uint32_t{});
        if (t == "float" || t == "float32") return as(float{});
        return as(double{});
    };

    std::vector<Vec3> x;
    std::vector<Face> f;
    for (const Element& e : elements) {
        for (long k = 0; k < e.count; ++k) {
            Vec3 p = Vec3::Zero();
            for (const Property& prop : e.props) {
                if (prop.list) {
                    const long m = long(read_value(prop.count_type));
                    std::vector<int> poly(size_t(std::max(0L, m)));
                    for (int& v : poly) v = int(read_value(prop.type));
                    if (e.name == "face" && (prop.name == "vertex_indices" || prop.name == "vertex_index")) {
                        if (poly.size() < 3) bad("face with fewer than 3 vertices");
                        for (size_t j = 1; j + 1 < poly.size(); ++j) f.push_back({poly[0], poly[j], poly[j + 1]});
                    }
                    continue;
                }
                const double v = read_value(prop.type);
                if (e.name == "vertex") {
                    if (prop.name == "x") p.x() = v;
                    if (prop.name == "y") p.y() = v;
                    if (prop.name == "z") p.z() = v;
                }
            }
            if (e.name == "vertex") x.push_back(p);
        }
    }
    return TriMesh::build(std::move(x), std::move(f));
}

/// Dispatches on the file extension (.ply or anything else as OBJ).
inline TriMesh read_mesh(const std::string& path)
{
    const bool ply = path.size() >= 4 && path.compare(path.size() - 4, 4, ".ply") == 0;
    return ply ? read_ply(path) : read_obj(path);
}

} // namespace csdflow
